//! Feedthrough-level noise spectrum objects: `Phi_vbar^inf`, its LDL^T
//! factorization, the square noise embedding and the node ordering that
//! puts the noisy nodes first.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ModelSetStructure, NetworkModel};
use crate::numeric::{psd_rank, sample_point};
use crate::rat::Rat;
use crate::rmat::RMat;

/// Relative threshold for ranks, pivots and consistency checks.
pub const SPECTRAL_TOL: f64 = 1e-9;
const EMBEDDING_FREQUENCIES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFeedthrough {
    /// `lim_{z -> inf} Phi_vbar(z)`, symmetric PSD.
    pub phi: DMatrix<f64>,
    pub p: usize,
}

impl NoiseFeedthrough {
    pub fn new(phi: DMatrix<f64>) -> Self {
        let phi = symmetrize(&phi);
        let p = psd_rank(&phi, SPECTRAL_TOL);
        NoiseFeedthrough { phi, p }
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `H^inf Lambda H^inf^T`, the noise covariance embedded in node space.
pub fn embedded_lambda(m: &NetworkModel) -> Result<DMatrix<f64>> {
    let h = m.h.feedthrough()?;
    Ok(symmetrize(&(&h * &m.lambda * h.transpose())))
}

/// `Phi_vbar^inf = (I - G^inf)^{-1} H^inf Lambda H^inf^T (I - G^inf)^{-T}`.
pub fn noise_feedthrough_spectrum(m: &NetworkModel) -> Result<NoiseFeedthrough> {
    let l = m.l();
    let img = DMatrix::<f64>::identity(l, l) - m.g.feedthrough()?;
    let inv = img.try_inverse().ok_or(Error::Singular)?;
    let lam = embedded_lambda(m)?;
    Ok(NoiseFeedthrough::new(&inv * lam * inv.transpose()))
}

/// `Pi^T A Pi` for an ordering with `order[k]` the original index at `k`.
pub fn permute_sym(a: &DMatrix<f64>, order: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(order.len(), order.len(), |i, j| a[(order[i], order[j])])
}

/// Inverse of [`permute_sym`].
pub fn unpermute_sym(a: &DMatrix<f64>, order: &[usize]) -> DMatrix<f64> {
    let n = order.len();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(order[i], order[j])] = a[(i, j)];
        }
    }
    out
}

/// Unit upper triangular `U` and diagonal `D` with `Pi^T Phi Pi = U D U^T`.
///
/// Zero pivots are allowed when the remaining column vanishes (reduced rank);
/// otherwise the factorization breaks down.
pub fn ldl_recover_lambda(
    phi: &DMatrix<f64>,
    order: &[usize],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = phi.nrows();
    if phi.ncols() != n || order.len() != n {
        return Err(Error::Dimension(format!(
            "spectrum {}x{} with ordering of length {}",
            phi.nrows(),
            phi.ncols(),
            order.len()
        )));
    }
    let a = permute_sym(phi, order);
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let mut u = DMatrix::<f64>::identity(n, n);
    let mut d = DVector::<f64>::zeros(n);
    for k in (0..n).rev() {
        // residual column k after removing the already factored trailing part
        let col: Vec<f64> = (0..=k)
            .map(|i| {
                a[(i, k)]
                    - (k + 1..n)
                        .map(|j| u[(i, j)] * u[(k, j)] * d[j])
                        .sum::<f64>()
            })
            .collect();
        let pivot = col[k];
        if pivot.abs() <= SPECTRAL_TOL * scale {
            let residual = col[..k].iter().map(|v| v.abs()).fold(0.0, f64::max);
            if residual > SPECTRAL_TOL.sqrt() * scale {
                return Err(Error::LdlBreakdown { pivot: k, residual });
            }
            continue;
        }
        d[k] = pivot;
        for i in 0..k {
            u[(i, k)] = col[i] / pivot;
        }
    }
    Ok((u, d))
}

/// Result of comparing a recovered `D` with the expected permuted covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct LdlCheck {
    pub d: Option<DVector<f64>>,
    /// `max |Pi^T Lambda Pi - diag(D)| / max |Lambda|`; infinite on breakdown.
    pub mismatch: f64,
    pub flagged: bool,
}

/// Runs the LDL^T recovery and flags it when `diag(D)` does not reproduce
/// the expected covariance (as happens with algebraic loops).
pub fn ldl_consistency(phi: &DMatrix<f64>, order: &[usize], expected: &DMatrix<f64>) -> LdlCheck {
    match ldl_recover_lambda(phi, order) {
        Err(_) => LdlCheck {
            d: None,
            mismatch: f64::INFINITY,
            flagged: true,
        },
        Ok((_, d)) => {
            let want = permute_sym(expected, order);
            let diff = &want - DMatrix::from_diagonal(&d);
            let mismatch = diff.amax() / expected.amax().max(f64::MIN_POSITIVE);
            LdlCheck {
                d: Some(d),
                mismatch,
                flagged: mismatch > 1e-6,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquareEmbedding {
    pub f_breve: RMat,
    pub delta_breve: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
}

/// Square monic factor of a tall noise model `F` (`L x p`, monic upper block):
/// `F Delta F^* = F_breve Delta_breve F_breve^*`.
pub fn square_embedding(f: &RMat, delta: &DMatrix<f64>) -> Result<SquareEmbedding> {
    let (l, p) = (f.rows(), f.cols());
    if p > l || delta.nrows() != p || delta.ncols() != p {
        return Err(Error::Dimension(format!(
            "F {l}x{p} with Delta {}x{}",
            delta.nrows(),
            delta.ncols()
        )));
    }
    let finf = f.feedthrough()?;
    let upper = finf.view((0, 0), (p, p));
    if (upper - DMatrix::<f64>::identity(p, p)).amax() > 1e-12 {
        return Err(Error::NoiseStructure(
            "upper block of F is not monic".into(),
        ));
    }
    let gamma: DMatrix<f64> = finf.view((p, 0), (l - p, p)).into_owned();

    let mut fb = RMat::zeros(l, l);
    for i in 0..l {
        for j in 0..p {
            fb[(i, j)] = f[(i, j)].clone();
        }
    }
    for i in p..l {
        for j in 0..p {
            let g = Rat::constant(f[(i, j)].feedthrough()?);
            fb[(i, j)] = &f[(i, j)] - &g;
        }
        fb[(i, i)] = Rat::one();
    }
    let stacked = {
        let mut s = DMatrix::<f64>::zeros(l, p);
        s.view_mut((0, 0), (p, p))
            .copy_from(&DMatrix::identity(p, p));
        s.view_mut((p, 0), (l - p, p)).copy_from(&gamma);
        s
    };
    let delta_breve = symmetrize(&(&stacked * delta * stacked.transpose()));
    let emb = SquareEmbedding {
        f_breve: fb,
        delta_breve,
        gamma,
    };
    verify_embedding(f, delta, &emb)?;
    Ok(emb)
}

fn spectrum_at(f: &DMatrix<Complex64>, delta: &DMatrix<f64>) -> DMatrix<Complex64> {
    let d = delta.map(|v| Complex64::new(v, 0.0));
    f * d * f.adjoint()
}

fn verify_embedding(f: &RMat, delta: &DMatrix<f64>, emb: &SquareEmbedding) -> Result<()> {
    let l = f.rows();
    let monic = (emb.f_breve.feedthrough()? - DMatrix::<f64>::identity(l, l)).amax();
    if monic > 1e-12 {
        return Err(Error::NoiseStructure("embedded factor is not monic".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < EMBEDDING_FREQUENCIES {
        attempts += 1;
        if attempts > 64 * EMBEDDING_FREQUENCIES {
            return Err(Error::PoleBudgetExhausted);
        }
        let z = sample_point(&mut rng, 1.0);
        let (Some(fz), Some(bz)) = (f.eval(z), emb.f_breve.eval(z)) else {
            continue;
        };
        let lhs = spectrum_at(&fz, delta);
        let rhs = spectrum_at(&bz, &emb.delta_breve);
        let scale = lhs.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let err = (&lhs - &rhs).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if err > 1e-9 * scale {
            return Err(Error::NoiseStructure(format!(
                "embedding changes the spectrum by {err:e}"
            )));
        }
        checked += 1;
    }
    Ok(())
}

/// How `Lambda-tilde` is recovered from the spectrum.
#[derive(Debug, Clone, Copy)]
pub enum OrderingRoute<'a> {
    /// `G^inf = 0`: `Lambda-tilde = Phi`.
    StrictlyProper,
    /// No algebraic loops; `order` makes `Pi^T G^inf Pi` upper triangular.
    NoAlgebraicLoops { order: &'a [usize] },
    /// `G^inf` is recovered row by row from `T_wr^inf`.
    Feedthrough { structure: &'a ModelSetStructure },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ordering {
    pub p: usize,
    /// `order[k]`: node placed at position `k`; the first `p` are noisy.
    pub order: Vec<usize>,
    pub lambda_tilde: DMatrix<f64>,
    /// Feedthrough of `G` used for the recovery.
    pub g_inf: DMatrix<f64>,
}

/// Recovers `G^inf` from `T_wr^inf` using the known feedthroughs of a
/// structure: for each row, least squares on the columns of `R` whose
/// feedthrough is known.
pub fn recover_g_inf(s: &ModelSetStructure, t_wr_inf: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (l, k) = (s.l(), s.k());
    if t_wr_inf.nrows() != l || t_wr_inf.ncols() != k {
        return Err(Error::Dimension(
            "T_wr^inf does not match the structure".into(),
        ));
    }
    let mut g = DMatrix::<f64>::zeros(l, l);
    for i in 0..l {
        let unknown: Vec<usize> = (0..l)
            .filter(|&j| s.g().get(i, j).has_param_feedthrough())
            .collect();
        for j in 0..l {
            if let Some(v) = s.g().get(i, j).known_feedthrough() {
                g[(i, j)] = v;
            }
        }
        if unknown.is_empty() {
            continue;
        }
        let cols: Vec<usize> = (0..k)
            .filter(|&c| !s.r().get(i, c).has_param_feedthrough())
            .collect();
        if cols.len() < unknown.len() {
            return Err(Error::Singular);
        }
        // -sum_{j in P} g_ij T_jc = R_ic - sum_{j not in P} (I - G)_ij T_jc
        let a = DMatrix::from_fn(cols.len(), unknown.len(), |r, u| {
            -t_wr_inf[(unknown[u], cols[r])]
        });
        let b = DVector::from_fn(cols.len(), |r, _| {
            let c = cols[r];
            let rv = s.r().get(i, c).known_feedthrough().unwrap_or(0.0);
            let known: f64 = (0..l)
                .filter(|j| !unknown.contains(j))
                .map(|j| {
                    let img = if j == i { 1.0 } else { -g[(i, j)] };
                    img * t_wr_inf[(j, c)]
                })
                .sum();
            rv - known
        });
        let svd = a.svd(true, true);
        let x = svd.solve(&b, SPECTRAL_TOL).map_err(|_| Error::Singular)?;
        for (u, &j) in unknown.iter().enumerate() {
            g[(i, j)] = x[u];
        }
    }
    Ok(g)
}

/// Rank `p` of the spectrum and an ordering whose leading `p x p` block of
/// `Pi^T Lambda-tilde Pi` is nonsingular (greedy pivoting).
pub fn ordering_permutation(
    t_wr_inf: &DMatrix<f64>,
    phi: &NoiseFeedthrough,
    route: OrderingRoute<'_>,
) -> Result<Ordering> {
    let l = phi.phi.nrows();
    let (lambda_tilde, g_inf) = match route {
        OrderingRoute::StrictlyProper => (phi.phi.clone(), DMatrix::zeros(l, l)),
        OrderingRoute::NoAlgebraicLoops { order } => {
            let (u, d) = ldl_recover_lambda(&phi.phi, order)?;
            let lam = unpermute_sym(&DMatrix::from_diagonal(&d), order);
            // U = Pi^T (I - G^inf)^{-1} Pi
            let inv = u.try_inverse().ok_or(Error::Singular)?;
            let img = unpermute_sym(&inv, order);
            let g = DMatrix::<f64>::identity(l, l) - img;
            (lam, g)
        }
        OrderingRoute::Feedthrough { structure } => {
            let g = recover_g_inf(structure, t_wr_inf)?;
            let img = DMatrix::<f64>::identity(l, l) - &g;
            (symmetrize(&(&img * &phi.phi * img.transpose())), g)
        }
    };
    let p = phi.p;
    let order = greedy_pivot_order(&lambda_tilde, p)?;
    Ok(Ordering {
        p,
        order,
        lambda_tilde,
        g_inf,
    })
}

/// Diagonal-pivoted Cholesky selection of `p` indices; the rest follow in
/// ascending order.
fn greedy_pivot_order(a: &DMatrix<f64>, p: usize) -> Result<Vec<usize>> {
    let n = a.nrows();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let mut s = a.clone();
    let mut chosen = Vec::with_capacity(p);
    for _ in 0..p {
        let best = (0..n)
            .filter(|i| !chosen.contains(i))
            .fold(None, |acc: Option<usize>, i| match acc {
                Some(b) if s[(b, b)] >= s[(i, i)] => Some(b),
                _ => Some(i),
            })
            .ok_or_else(|| Error::InvalidArgument("rank exceeds dimension".into()))?;
        let piv = s[(best, best)];
        if piv <= SPECTRAL_TOL * scale {
            return Err(Error::InvalidArgument(format!(
                "no nonsingular leading block of size {p} (pivot {piv:e})"
            )));
        }
        let col = s.column(best).into_owned();
        s -= &col * col.transpose() / piv;
        chosen.push(best);
    }
    let mut order = chosen.clone();
    order.extend((0..n).filter(|i| !chosen.contains(i)));
    Ok(order)
}
