//! Floating point rank detection: normal rank of rational matrices by random
//! evaluation, numerical rank of real and PSD matrices.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rmat::RMat;

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const DEFAULT_TRIALS: usize = 8;
pub const DEFAULT_RADIUS: f64 = 1.0 + 1e-3;
const POLE_RESAMPLE_BUDGET: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOptions {
    /// Singular values below `tol * sigma_max` count as zero.
    pub tol: f64,
    pub trials: usize,
    pub seed: u64,
    /// Radius of the evaluation circle.
    pub radius: f64,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            tol: DEFAULT_RANK_TOL,
            trials: DEFAULT_TRIALS,
            seed: 0,
            radius: DEFAULT_RADIUS,
        }
    }
}

impl RankOptions {
    pub fn with_seed(self, seed: u64) -> Self {
        RankOptions { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEstimate {
    /// Maximum numerical rank over the trials.
    pub rank: usize,
    pub trial_ranks: Vec<usize>,
    /// Largest `sigma_min / sigma_max` seen over the trials, where
    /// `sigma_min` is the `min(rows, cols)`-th singular value. Zero for empty
    /// or identically zero matrices.
    pub sigma_ratio: f64,
}

/// Numerical rank from singular values with a relative threshold.
pub fn rank_from_singular_values(sv: &[f64], tol: f64) -> usize {
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 || !max.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Numerical rank with the threshold taken relative to `max(sv[0], reference)`.
/// Used for submatrices of a larger computed matrix, whose round-off is set
/// by the scale of the parent rather than of the submatrix.
pub fn rank_with_reference(sv: &[f64], tol: f64, reference: f64) -> usize {
    let max = sv.iter().copied().fold(reference.abs(), f64::max);
    if max == 0.0 || !max.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Singular values of a complex matrix, descending.
pub fn complex_singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Singular values of a real matrix, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn real_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    rank_from_singular_values(&singular_values(m), tol)
}

/// Rank of a symmetric PSD matrix by eigenvalue thresholding relative to the
/// largest eigenvalue.
pub fn psd_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 {
        return 0;
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    eig.iter().filter(|&&e| e > tol * max).count()
}

/// Random point on the circle `|z| = radius`.
pub fn sample_point(rng: &mut impl Rng, radius: f64) -> Complex64 {
    Complex64::from_polar(radius, rng.random::<f64>() * TAU)
}

/// Normal rank of a rational matrix: maximum numerical rank over random
/// evaluation points on a circle just outside the unit circle.
pub fn normal_rank(m: &RMat, opts: &RankOptions) -> Result<RankEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    sampled_rank(opts, |_| {
        let z = sample_point(&mut rng, opts.radius);
        m.eval(z)
    })
}

/// Shared trial loop: `eval` produces one matrix sample per call, or `None`
/// when the sample hit a pole and must be redrawn.
pub fn sampled_rank(
    opts: &RankOptions,
    mut eval: impl FnMut(usize) -> Option<DMatrix<Complex64>>,
) -> Result<RankEstimate> {
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut trial_ranks = Vec::with_capacity(opts.trials);
    let mut sigma_ratio: f64 = 0.0;
    for trial in 0..opts.trials {
        let mut sample = None;
        for _ in 0..POLE_RESAMPLE_BUDGET {
            if let Some(v) = eval(trial) {
                sample = Some(v);
                break;
            }
        }
        let v = sample.ok_or(Error::PoleBudgetExhausted)?;
        let sv = complex_singular_values(&v);
        trial_ranks.push(rank_from_singular_values(&sv, opts.tol));
        if let (Some(first), Some(last)) = (sv.first(), sv.last()) {
            if *first > 0.0 {
                sigma_ratio = sigma_ratio.max(last / first);
            }
        }
    }
    Ok(RankEstimate {
        rank: trial_ranks.iter().copied().max().unwrap_or(0),
        trial_ranks,
        sigma_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::int;
    use crate::rat::Rat;

    fn a() -> Rat {
        Rat::delay(int(1), 1)
    }
    fn b() -> Rat {
        Rat::delay(int(2), 1)
    }

    #[test]
    fn deficient_example_has_rank_one() {
        let m = RMat::from_rows(vec![
            vec![Rat::one(), Rat::zero()],
            vec![&a() + &Rat::one(), Rat::zero()],
        ]);
        let est = normal_rank(&m, &RankOptions::default()).unwrap();
        assert_eq!(est.rank, 1);
        assert!(est.sigma_ratio < 1e-9);
    }

    #[test]
    fn unimodular_example_has_full_rank() {
        let m = RMat::from_rows(vec![
            vec![a(), Rat::one()],
            vec![&(&a() * &b()) + &Rat::one(), b()],
        ]);
        assert_eq!(normal_rank(&m, &RankOptions::default()).unwrap().rank, 2);
    }

    #[test]
    fn zero_matrix_rank_zero() {
        let est = normal_rank(&RMat::zeros(3, 2), &RankOptions::default()).unwrap();
        assert_eq!(est.rank, 0);
        assert_eq!(
            normal_rank(&RMat::zeros(0, 2), &RankOptions::default())
                .unwrap()
                .rank,
            0
        );
    }

    #[test]
    fn zero_trials_rejected() {
        let opts = RankOptions {
            trials: 0,
            ..Default::default()
        };
        assert!(normal_rank(&RMat::identity(2), &opts).is_err());
    }

    #[test]
    fn reference_scale_suppresses_round_off() {
        assert_eq!(rank_from_singular_values(&[1e-17], 1e-9), 1);
        assert_eq!(rank_with_reference(&[1e-17], 1e-9, 1.0), 0);
        assert_eq!(rank_with_reference(&[0.5, 1e-3], 1e-9, 2.0), 2);
    }

    #[test]
    fn psd_rank_counts_positive_eigenvalues() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(psd_rank(&m, 1e-9), 2);
    }
}
