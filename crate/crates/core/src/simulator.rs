//! Time-domain simulation of network models and the equivalent-model
//! family behind the non-identifiable example.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{network_transfer, validate_model, NetworkModel};
use crate::numeric::psd_rank;
use crate::poly::scalar_to_f64;
use crate::rat::Rat;
use crate::rmat::RMat;

/// Outputs above this magnitude are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
/// Shortest record accepted by [`sample_spectrum_feedthrough`].
pub const MIN_SPECTRUM_SAMPLES: usize = 1024;
/// Burn-in used when a record is generated for spectrum estimation.
pub const SPECTRUM_BURN_IN: usize = 2048;

/// Signals of one simulation run, one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub r: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

impl SignalRecord {
    pub fn len(&self) -> usize {
        self.w.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.w.ncols() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    Zero,
    Record(DMatrix<f64>),
    /// Gaussian white noise with covariance `Lambda`.
    Seeded(u64),
}

/// Direct-form realization of `num(z) / den(z)` in powers of `z^{-1}`.
struct Filter {
    b: Vec<f64>,
    a: Vec<f64>,
}

impl Filter {
    fn new(r: &Rat) -> Result<Self> {
        if !r.is_proper() {
            return Err(Error::Improper {
                num: r.num_degree().unwrap_or(0),
                den: r.den_degree(),
            });
        }
        let n = r.den_degree();
        // coefficient of z^{-j} is the coefficient of z^{n-j}
        let b = (0..=n)
            .map(|j| scalar_to_f64(&r.num().coeff(n - j)))
            .collect();
        let a = (0..=n)
            .map(|j| scalar_to_f64(&r.den().coeff(n - j)))
            .collect();
        Ok(Filter { b, a })
    }

    /// `y[t] = sum_j b_j u[t-j] - sum_{j>=1} a_j y[t-j]`, zero initial state.
    fn apply(&self, u: &[f64], y: &mut [f64]) {
        for t in 0..u.len() {
            let mut acc = 0.0;
            for (j, bj) in self.b.iter().enumerate().take(t + 1) {
                acc += bj * u[t - j];
            }
            for (j, aj) in self.a.iter().enumerate().skip(1).take(t) {
                acc -= aj * y[t - j];
            }
            y[t] = acc;
        }
    }
}

/// `y = M u` for a proper rational matrix `M` and input rows `u`.
fn filter_matrix(m: &RMat, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = u.ncols();
    let mut y = DMatrix::zeros(m.rows(), n);
    let mut buf = vec![0.0; n];
    for i in 0..m.rows() {
        for c in 0..m.cols() {
            let entry = &m[(i, c)];
            if entry.is_zero() {
                continue;
            }
            let input: Vec<f64> = u.row(c).iter().copied().collect();
            Filter::new(entry)?.apply(&input, &mut buf);
            for t in 0..n {
                y[(i, t)] += buf[t];
            }
        }
    }
    Ok(y)
}

fn check_divergence(w: &DMatrix<f64>) -> Result<()> {
    for t in 0..w.ncols() {
        for i in 0..w.nrows() {
            let v = w[(i, t)];
            if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Diverged { sample: t, node: i });
            }
        }
    }
    Ok(())
}

/// Symmetric square root of a PSD matrix.
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// White Gaussian noise with covariance `lambda`, `n` samples.
pub fn gaussian_noise(lambda: &DMatrix<f64>, n: usize, seed: u64) -> DMatrix<f64> {
    let p = lambda.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi = DMatrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut rng));
    sqrt_psd(lambda) * xi
}

/// Node signals `w = T_wr r + T_we e` with zero initial conditions.
pub fn simulate(m: &NetworkModel, r: &DMatrix<f64>, noise: &Noise) -> Result<SignalRecord> {
    simulate_with_burn_in(m, r, noise, 0)
}

/// As [`simulate`], with `burn_in` leading samples (zero excitation,
/// generated noise) discarded.
pub fn simulate_with_burn_in(
    m: &NetworkModel,
    r: &DMatrix<f64>,
    noise: &Noise,
    burn_in: usize,
) -> Result<SignalRecord> {
    let (k, p) = (m.k(), m.p());
    if r.nrows() != k {
        return Err(Error::Dimension(format!(
            "excitation has {} rows, model has K = {k}",
            r.nrows()
        )));
    }
    let n = r.ncols();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "at least one sample is required".into(),
        ));
    }
    let total = n + burn_in;
    let e = match noise {
        Noise::Zero => DMatrix::zeros(p, total),
        Noise::Record(e) => {
            if e.nrows() != p || e.ncols() != n {
                return Err(Error::Dimension(format!(
                    "noise record is {}x{}, expected {p}x{n}",
                    e.nrows(),
                    e.ncols()
                )));
            }
            let mut full = DMatrix::zeros(p, total);
            full.view_mut((0, burn_in), (p, n)).copy_from(e);
            full
        }
        Noise::Seeded(seed) => gaussian_noise(&m.lambda, total, *seed),
    };
    let mut rr = DMatrix::zeros(k, total);
    rr.view_mut((0, burn_in), (k, n)).copy_from(r);

    let t = network_transfer(m)?;
    let input = DMatrix::from_fn(
        k + p,
        total,
        |i, j| if i < k { rr[(i, j)] } else { e[(i - k, j)] },
    );
    let w = filter_matrix(&t, &input)?;
    check_divergence(&w)?;
    Ok(SignalRecord {
        r: r.clone(),
        e: e.columns(burn_in, n).into_owned(),
        w: w.columns(burn_in, n).into_owned(),
    })
}

/// Member of the one-parameter family of models with the same `T` as the
/// two-module example: `G23 = g23`, `G21 = (A + 1)(B - g23)`.
pub fn witness_family_s2(s2: &NetworkModel, g23: &Rat) -> Result<NetworkModel> {
    if s2.l() != 3 {
        return Err(Error::InvalidArgument("expected a three-node model".into()));
    }
    for i in 0..3 {
        for j in 0..3 {
            if !matches!((i, j), (1, 2) | (2, 0)) && !s2.g[(i, j)].is_zero() {
                return Err(Error::InvalidArgument(format!(
                    "unexpected module G[{}][{}] = {}",
                    i + 1,
                    j + 1,
                    s2.g[(i, j)]
                )));
            }
        }
    }
    let a = &s2.g[(2, 0)];
    let b = &s2.g[(1, 2)];
    let mut alt = s2.clone();
    alt.g[(1, 2)] = g23.clone();
    alt.g[(1, 0)] = &(a + &Rat::one()) * &(b - g23);
    let rep = validate_model(&alt)?;
    if !rep.is_valid() {
        let msgs: Vec<String> = rep.violations.iter().map(ToString::to_string).collect();
        return Err(Error::Validation(msgs.join("; ")));
    }
    Ok(alt)
}

/// Sample estimate of `Phi_vbar^inf`: the noise is reconstructed from the
/// node signals through the model, its covariance estimated, and mapped
/// through `T_we^inf`.
pub fn sample_spectrum_feedthrough(rec: &SignalRecord, m: &NetworkModel) -> Result<DMatrix<f64>> {
    let (l, k, p) = (m.l(), m.k(), m.p());
    let n = rec.len();
    if n < MIN_SPECTRUM_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "spectrum estimation needs at least {MIN_SPECTRUM_SAMPLES} samples, got {n}"
        )));
    }
    if rec.w.nrows() != l || rec.r.nrows() != k {
        return Err(Error::Dimension("record does not match the model".into()));
    }
    if p == 0 {
        return Ok(DMatrix::zeros(l, l));
    }
    // e = H_a^{-1} [(I - G) w - R r] restricted to the first p rows
    let rows: Vec<usize> = (0..p).collect();
    let all_l: Vec<usize> = (0..l).collect();
    let h_a_inv = m.h.select(&rows, &rows).invert()?;
    let img = m.i_minus_g().select(&rows, &all_l);
    let neg_r = RMat::zeros(p, k).sub(&m.r.select(&rows, &(0..k).collect::<Vec<_>>()))?;
    let whitener = h_a_inv.mul(&img.hstack(&neg_r)?)?;
    let input = DMatrix::from_fn(l + k, n, |i, j| {
        if i < l {
            rec.w[(i, j)]
        } else {
            rec.r[(i - l, j)]
        }
    });
    let e_hat = filter_matrix(&whitener, &input)?;
    let lambda_hat = &e_hat * e_hat.transpose() / n as f64;

    let g_inf = m.g.feedthrough()?;
    let inv = (DMatrix::<f64>::identity(l, l) - g_inf)
        .try_inverse()
        .ok_or(Error::Singular)?;
    let t_we = inv * m.h.feedthrough()?;
    let phi = &t_we * lambda_hat * t_we.transpose();
    Ok((&phi + phi.transpose()) * 0.5)
}

/// Rank of a spectrum estimate by eigenvalue thresholding.
pub fn spectrum_rank(phi: &DMatrix<f64>, tol: f64) -> usize {
    psd_rank(phi, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::int;

    fn impulse(rows: usize, channel: usize, n: usize) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(rows, n);
        r[(channel, 0)] = 1.0;
        r
    }

    #[test]
    fn uncoupled_impulse_passes_through() {
        let m = NetworkModel::new(
            RMat::zeros(2, 2),
            RMat::identity(2),
            RMat::identity(2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let rec = simulate(&m, &impulse(2, 0, 5), &Noise::Zero).unwrap();
        assert_eq!(
            rec.w.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert!(rec.w.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn s1_impulse_response() {
        let mut g = RMat::zeros(3, 3);
        g[(1, 0)] = Rat::delay(int(1), 1);
        g[(2, 1)] = Rat::delay(int(2), 1);
        let r = RMat::from_rows(vec![
            vec![Rat::one(), Rat::zero()],
            vec![Rat::zero(), Rat::one()],
            vec![Rat::one(), Rat::zero()],
        ]);
        let m = NetworkModel::noise_free(g, r).unwrap();
        let rec = simulate(&m, &impulse(2, 0, 6), &Noise::Zero).unwrap();
        // (z^2 + 2) / z^2 = 1 + 2 z^{-2}
        assert_eq!(
            rec.w.row(2).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 0.0, 2.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn unstable_model_diverges() {
        let mut g = RMat::zeros(2, 2);
        g[(0, 1)] = Rat::delay(int(3), 1);
        g[(1, 0)] = Rat::one();
        let m = NetworkModel::noise_free(g, RMat::identity(2)).unwrap();
        let err = simulate(&m, &impulse(2, 0, 200), &Noise::Zero).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn witness_family_keeps_true_member() {
        let mut g = RMat::zeros(3, 3);
        let b = Rat::delay(int(2), 1);
        g[(1, 2)] = b.clone();
        g[(2, 0)] = Rat::delay(int(1), 1);
        let r = RMat::from_rows(vec![
            vec![Rat::one(), Rat::zero()],
            vec![Rat::zero(), Rat::one()],
            vec![Rat::one(), Rat::zero()],
        ]);
        let s2 = NetworkModel::noise_free(g, r).unwrap();
        assert_eq!(witness_family_s2(&s2, &b).unwrap(), s2);
        let zero = witness_family_s2(&s2, &Rat::zero()).unwrap();
        assert_eq!(
            zero.g[(1, 0)],
            Rat::delay(int(2), 1) + Rat::delay(int(2), 2)
        );
        assert_eq!(
            network_transfer(&zero).unwrap(),
            network_transfer(&s2).unwrap()
        );
    }

    #[test]
    fn short_record_rejected_and_noise_free_is_zero() {
        let m = NetworkModel::noise_free(RMat::zeros(2, 2), RMat::identity(2)).unwrap();
        let rec = simulate(&m, &DMatrix::zeros(2, 100), &Noise::Zero).unwrap();
        assert!(sample_spectrum_feedthrough(&rec, &m).is_err());
        let rec = simulate(&m, &DMatrix::zeros(2, 2000), &Noise::Zero).unwrap();
        assert_eq!(
            sample_spectrum_feedthrough(&rec, &m).unwrap(),
            DMatrix::zeros(2, 2)
        );
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let lam = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = sqrt_psd(&lam);
        assert!((&s * &s - lam).amax() < 1e-12);
    }
}
