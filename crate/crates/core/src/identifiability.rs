//! Identifiability decision procedures: the precondition routes, the
//! diagonalization test on `U` and the per-row rank tests on `T`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{feedthrough_order, transfer_pattern};
use crate::matching::{bipartite_matching, structural_rank};
use crate::model::{
    extract_theta, feedthrough_matrices, instantiate_unchecked, network_transfer, random_theta,
    validate_model, Block, ModelSetStructure, NetworkModel, Position, ValidationReport,
};
use crate::numeric::{
    complex_singular_values, normal_rank, rank_with_reference, sample_point, singular_values,
    RankOptions,
};
use crate::poly::{Poly, Scalar};
use crate::rat::Rat;
use crate::rmat::RMat;

/// Redraws allowed when a random instance is singular or hits a pole.
const RESAMPLE_BUDGET: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    IdentifiableAtModel,
    GenericallyIdentifiable,
    NotIdentifiable,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::IdentifiableAtModel => "IDENTIFIABLE_AT_MODEL",
            Verdict::GenericallyIdentifiable => "GENERICALLY_IDENTIFIABLE",
            Verdict::NotIdentifiable => "NOT_IDENTIFIABLE",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verdict of a single row test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowVerdict {
    Pass,
    Fail,
    Inconclusive,
}

impl RowVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            RowVerdict::Pass => "PASS",
            RowVerdict::Fail => "FAIL",
            RowVerdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalysisOptions {
    pub rank: RankOptions,
}

impl AnalysisOptions {
    pub fn with_seed(seed: u64) -> Self {
        AnalysisOptions {
            rank: RankOptions::default().with_seed(seed),
        }
    }
}

/// Whether the analysis targets one model or the whole model set.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    AtModel(&'a NetworkModel),
    Generic,
}

/// Column orderings for row `i`. `p_order[k]` is the original column at
/// position `k`: parameterized `G` columns first; `q_order` lists the
/// non-parameterized `U` (or `R`) columns first and the parameterized last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowPermutations {
    pub row: usize,
    pub p_order: Vec<usize>,
    pub q_order: Vec<usize>,
    pub alpha: usize,
    pub beta: usize,
}

impl RowPermutations {
    /// Rows of `T` entering the reduced matrix.
    pub fn ti_rows(&self) -> &[usize] {
        &self.p_order[..self.alpha]
    }

    /// Columns of `T` entering the reduced matrix.
    pub fn ti_cols(&self) -> &[usize] {
        &self.q_order[..self.q_order.len() - self.beta]
    }

    pub fn count_ok(&self) -> bool {
        self.alpha + self.beta <= self.q_order.len()
    }

    /// `P_i` as a 0/1 matrix with `(I - G) P_i` gathering the parameters left.
    pub fn p_matrix(&self) -> DMatrix<f64> {
        order_matrix(&self.p_order)
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        order_matrix(&self.q_order)
    }
}

fn order_matrix(order: &[usize]) -> DMatrix<f64> {
    let n = order.len();
    let mut m = DMatrix::zeros(n, n);
    for (k, &orig) in order.iter().enumerate() {
        m[(orig, k)] = 1.0;
    }
    m
}

/// Splits `0..n` into (flagged ascending, rest ascending).
fn split_order(n: usize, flagged: impl Fn(usize) -> bool) -> (Vec<usize>, Vec<usize>) {
    (0..n).partition(|&c| flagged(c))
}

pub fn build_row_permutations(s: &ModelSetStructure, i: usize) -> RowPermutations {
    let (g_param, g_rest) = split_order(s.l(), |c| s.g().get(i, c).is_param());
    let (u_param, u_rest) = split_order(s.u_cols(), |c| s.u(i, c).is_param());
    RowPermutations {
        row: i,
        alpha: g_param.len(),
        beta: u_param.len(),
        p_order: g_param.into_iter().chain(g_rest).collect(),
        q_order: u_rest.into_iter().chain(u_param).collect(),
    }
}

/// Feedthrough variant: only parameterized feedthroughs count, and `Q_i`
/// acts on the `K` columns of `R`.
pub fn build_feedthrough_permutations(s: &ModelSetStructure, i: usize) -> RowPermutations {
    let (g_param, g_rest) = split_order(s.l(), |c| s.g().get(i, c).has_param_feedthrough());
    let (r_param, r_rest) = split_order(s.k(), |c| s.r().get(i, c).has_param_feedthrough());
    RowPermutations {
        row: i,
        alpha: g_param.len(),
        beta: r_param.len(),
        p_order: g_param.into_iter().chain(g_rest).collect(),
        q_order: r_rest.into_iter().chain(r_param).collect(),
    }
}

/// Reduced matrix `T-check_i` of a network transfer matrix.
pub fn extract_ti(perm: &RowPermutations, t: &RMat) -> RMat {
    t.select(perm.ti_rows(), perm.ti_cols())
}

/// Reduced feedthrough matrix from `T_wr^inf`.
pub fn extract_ti_inf(perm: &RowPermutations, t_wr_inf: &DMatrix<f64>) -> DMatrix<f64> {
    t_wr_inf
        .select_rows(perm.ti_rows())
        .select_columns(perm.ti_cols())
}

pub fn check_strictly_proper(s: &ModelSetStructure) -> bool {
    s.g()
        .iter()
        .all(|(_, _, c)| !c.may_have_feedthrough() && !c.has_param_feedthrough())
}

/// Ordering `Pi` with `Pi^T G^inf Pi` upper triangular, or the nodes of an
/// algebraic loop.
pub fn check_no_algebraic_loops(
    s: &ModelSetStructure,
) -> std::result::Result<Vec<usize>, Vec<usize>> {
    feedthrough_order(s)
}

/// `Phi_v^inf = H^inf Lambda H^inf^T` is diagonal for every member: declared
/// by the structure, or implied when there is at most one noise channel
/// and the rows below the monic block have no feedthrough.
pub fn noise_feedthrough_is_diagonal(s: &ModelSetStructure) -> bool {
    if s.lambda_diagonal_feedthrough() || s.p() == 0 {
        return true;
    }
    let lower_zero = (s.p()..s.l())
        .all(|i| (0..s.p()).all(|j| s.h().get(i, j).known_feedthrough() == Some(0.0)));
    let upper_diag = (0..s.p())
        .all(|i| (0..s.p()).all(|j| i == j || s.h().get(i, j).known_feedthrough() == Some(0.0)));
    let lambda_diag = match s.fixed_lambda() {
        Some(l) => (0..s.p()).all(|i| (0..s.p()).all(|j| i == j || l[(i, j)] == 0.0)),
        None => s.p() == 1,
    };
    lower_zero && upper_diag && lambda_diag
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedthroughRow {
    pub row: usize,
    pub alpha: usize,
    pub beta: usize,
    pub count_ok: bool,
    /// Smallest rank of the reduced feedthrough matrix seen.
    pub rank: usize,
    pub required: usize,
    pub ok: bool,
}

/// Parameterized-feedthrough conditions per row, at a model or over random
/// instances of the structure.
pub fn check_feedthrough_conditions(
    s: &ModelSetStructure,
    mode: Mode<'_>,
    opts: &AnalysisOptions,
) -> Result<Vec<FeedthroughRow>> {
    let perms: Vec<RowPermutations> = (0..s.l())
        .map(|i| build_feedthrough_permutations(s, i))
        .collect();
    let samples: Vec<DMatrix<f64>> = match mode {
        Mode::AtModel(m) => {
            check_fits(s, m)?;
            vec![feedthrough_matrices(m)?.t_wr]
        }
        Mode::Generic => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.rank.seed);
            let mut out = Vec::with_capacity(opts.rank.trials);
            for _ in 0..opts.rank.trials {
                out.push(random_feedthrough_sample(s, &mut rng)?);
            }
            out
        }
    };
    Ok(perms
        .iter()
        .map(|perm| {
            let rank = samples
                .iter()
                .map(|t| {
                    let sv = singular_values(&extract_ti_inf(perm, t));
                    rank_with_reference(&sv, opts.rank.tol, t.amax())
                })
                .min()
                .unwrap_or(0);
            let count_ok = perm.count_ok();
            FeedthroughRow {
                row: perm.row,
                alpha: perm.alpha,
                beta: perm.beta,
                count_ok,
                rank,
                required: perm.alpha,
                ok: count_ok && rank == perm.alpha,
            }
        })
        .collect())
}

fn random_feedthrough_sample(s: &ModelSetStructure, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    for _ in 0..RESAMPLE_BUDGET {
        let m = instantiate_unchecked(s, &random_theta(s, rng))?;
        let l = s.l();
        let img = DMatrix::<f64>::identity(l, l) - m.g.feedthrough()?;
        if let Some(t) = img.lu().solve(&m.r.feedthrough()?) {
            return Ok(t);
        }
    }
    Err(Error::PoleBudgetExhausted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    /// All modules strictly proper.
    StrictlyProper,
    /// No algebraic loops and diagonal noise feedthrough spectrum.
    NoAlgebraicLoops,
    /// Feedthrough recoverable from `T_wr^inf`.
    Feedthrough,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::StrictlyProper => "strictly-proper",
            Route::NoAlgebraicLoops => "no-algebraic-loops",
            Route::Feedthrough => "feedthrough",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteReport {
    pub route: Option<Route>,
    pub strictly_proper: bool,
    /// Feedthrough ordering, or the nodes of an algebraic loop.
    pub loop_check: std::result::Result<Vec<usize>, Vec<usize>>,
    pub diagonal_noise_feedthrough: bool,
    /// Present when the first two routes do not apply.
    pub feedthrough_rows: Option<Vec<FeedthroughRow>>,
}

/// First applicable precondition route.
pub fn precondition_route(
    s: &ModelSetStructure,
    m: Option<&NetworkModel>,
    opts: &AnalysisOptions,
) -> Result<RouteReport> {
    let strictly_proper = check_strictly_proper(s);
    let loop_check = check_no_algebraic_loops(s);
    let diagonal = noise_feedthrough_is_diagonal(s);
    let mut rep = RouteReport {
        route: None,
        strictly_proper,
        loop_check,
        diagonal_noise_feedthrough: diagonal,
        feedthrough_rows: None,
    };
    if strictly_proper {
        rep.route = Some(Route::StrictlyProper);
    } else if rep.loop_check.is_ok() && diagonal {
        rep.route = Some(Route::NoAlgebraicLoops);
    } else {
        let mode = m.map_or(Mode::Generic, Mode::AtModel);
        let rows = check_feedthrough_conditions(s, mode, opts)?;
        if rows.iter().all(|r| r.ok) {
            rep.route = Some(Route::Feedthrough);
        }
        rep.feedthrough_rows = Some(rows);
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theorem1Report {
    pub passed: bool,
    /// Column of `U` assigned to each row, when the matching is perfect.
    pub assignment: Option<Vec<usize>>,
    pub reason: Option<String>,
}

/// Diagonalization test restricted to column permutations: each row needs a
/// distinct column of `U` that is nonzero in that row only.
pub fn check_theorem1(s: &ModelSetStructure) -> Theorem1Report {
    let l = s.l();
    let kp = s.u_cols();
    let exclusive = |i: usize, c: usize| {
        s.u(i, c).is_structurally_nonzero()
            && (0..l).all(|j| j == i || !s.u(j, c).is_structurally_nonzero())
    };
    let matched = bipartite_matching(l, kp, exclusive);
    let unmatched: Vec<usize> = (0..l).filter(|&i| matched[i].is_none()).collect();
    if unmatched.is_empty() {
        return Theorem1Report {
            passed: true,
            assignment: Some(matched.into_iter().flatten().collect()),
            reason: None,
        };
    }
    let no_column: Vec<usize> = unmatched
        .iter()
        .copied()
        .filter(|&i| !(0..kp).any(|c| exclusive(i, c)))
        .collect();
    let names = |v: &[usize]| {
        v.iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let reason = if !no_column.is_empty() {
        format!(
            "no column of U is nonzero only in row(s) {}",
            names(&no_column)
        )
    } else {
        format!(
            "exclusive columns cannot be assigned to row(s) {}",
            names(&unmatched)
        )
    };
    Theorem1Report {
        passed: false,
        assignment: None,
        reason: Some(reason),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowReport {
    pub row: usize,
    pub alpha: usize,
    pub beta: usize,
    pub count_ok: bool,
    /// Numerical rank of the reduced matrix (maximum over trials at a model,
    /// minimum over random instances in generic mode).
    pub rank: Option<usize>,
    pub required: usize,
    /// Rank of the generic sparsity pattern.
    pub structural_rank: usize,
    /// Worst `sigma_min / sigma_max` over the trials.
    pub sigma_ratio: Option<f64>,
    pub verdict: RowVerdict,
}

/// A concrete model distinct from the analyzed one with the same `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternativeModel {
    pub model: NetworkModel,
    pub validation: ValidationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub row: usize,
    pub reason: String,
    /// The rank-deficient reduced matrix, when computed exactly.
    pub ti: Option<RMat>,
    pub rank: Option<usize>,
    pub required: usize,
    pub sigma_ratio: Option<f64>,
    pub alternative: Option<AlternativeModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Report {
    pub rows: Vec<RowReport>,
    pub witnesses: Vec<Witness>,
}

fn check_fits(s: &ModelSetStructure, m: &NetworkModel) -> Result<()> {
    extract_theta(s, m).map(|_| ())
}

fn pattern_rank(pattern: &[Vec<bool>], perm: &RowPermutations) -> usize {
    let rows = perm.ti_rows();
    let cols = perm.ti_cols();
    structural_rank(rows.len(), cols.len(), |a, b| pattern[rows[a]][cols[b]])
}

/// Per-row rank tests, at a model or over random instances.
pub fn check_theorem2(
    s: &ModelSetStructure,
    mode: Mode<'_>,
    opts: &AnalysisOptions,
) -> Result<Theorem2Report> {
    match mode {
        Mode::AtModel(m) => theorem2_at_model(s, m, opts),
        Mode::Generic => theorem2_generic(s, opts),
    }
}

fn count_witness(perm: &RowPermutations, kp: usize) -> Witness {
    Witness {
        row: perm.row,
        reason: format!(
            "row {} has {} + {} parameterized entries, more than K + p = {kp}",
            perm.row + 1,
            perm.alpha,
            perm.beta
        ),
        ti: None,
        rank: None,
        required: perm.alpha,
        sigma_ratio: None,
        alternative: None,
    }
}

fn theorem2_at_model(
    s: &ModelSetStructure,
    m: &NetworkModel,
    opts: &AnalysisOptions,
) -> Result<Theorem2Report> {
    check_fits(s, m)?;
    let t = network_transfer(m)?;
    let pattern = transfer_pattern(s);
    let mut rows = Vec::new();
    let mut witnesses = Vec::new();
    for i in 0..s.l() {
        let perm = build_row_permutations(s, i);
        let structural = pattern_rank(&pattern, &perm);
        let mut rep = RowReport {
            row: i,
            alpha: perm.alpha,
            beta: perm.beta,
            count_ok: perm.count_ok(),
            rank: None,
            required: perm.alpha,
            structural_rank: structural,
            sigma_ratio: None,
            verdict: RowVerdict::Pass,
        };
        if !rep.count_ok {
            rep.verdict = RowVerdict::Fail;
            witnesses.push(count_witness(&perm, s.u_cols()));
            rows.push(rep);
            continue;
        }
        if perm.alpha == 0 {
            rep.rank = Some(0);
            rows.push(rep);
            continue;
        }
        let ti = extract_ti(&perm, &t);
        let est = normal_rank(&ti, &opts.rank)?;
        let exact = ti.rank_exact();
        rep.rank = Some(est.rank);
        rep.sigma_ratio = Some(est.sigma_ratio);
        if exact < perm.alpha {
            rep.verdict = RowVerdict::Fail;
            let alternative = row_witness_model(s, m, &t, &perm);
            witnesses.push(Witness {
                row: i,
                reason: format!(
                    "reduced matrix of row {} has rank {exact} < {}",
                    i + 1,
                    perm.alpha
                ),
                ti: Some(ti),
                rank: Some(est.rank),
                required: perm.alpha,
                sigma_ratio: Some(est.sigma_ratio),
                alternative,
            });
        }
        rows.push(rep);
    }
    Ok(Theorem2Report { rows, witnesses })
}

/// Numerical `T(z)` of one random instance at one random point.
fn sample_transfer(
    s: &ModelSetStructure,
    rng: &mut ChaCha8Rng,
    radius: f64,
) -> Result<DMatrix<Complex64>> {
    let l = s.l();
    for _ in 0..RESAMPLE_BUDGET {
        let m = instantiate_unchecked(s, &random_theta(s, rng))?;
        let z = sample_point(rng, radius);
        let (Some(g), Some(u)) = (m.g.eval(z), m.u().eval(z)) else {
            continue;
        };
        let img = DMatrix::<Complex64>::identity(l, l) - g;
        if let Some(t) = img.lu().solve(&u) {
            if t.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                return Ok(t);
            }
        }
    }
    Err(Error::PoleBudgetExhausted)
}

fn theorem2_generic(s: &ModelSetStructure, opts: &AnalysisOptions) -> Result<Theorem2Report> {
    if opts.rank.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let l = s.l();
    let perms: Vec<RowPermutations> = (0..l).map(|i| build_row_permutations(s, i)).collect();
    let pattern = transfer_pattern(s);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rank.seed);
    let mut ranks: Vec<Vec<usize>> = vec![Vec::new(); l];
    let mut ratios = vec![f64::INFINITY; l];
    for _ in 0..opts.rank.trials {
        let t = sample_transfer(s, &mut rng, opts.rank.radius)?;
        let scale = t.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for perm in perms.iter().filter(|p| p.count_ok() && p.alpha > 0) {
            let sub = t.select_rows(perm.ti_rows()).select_columns(perm.ti_cols());
            let sv = complex_singular_values(&sub);
            ranks[perm.row].push(rank_with_reference(&sv, opts.rank.tol, scale));
            let ratio = match (sv.first(), sv.get(perm.alpha - 1)) {
                (Some(&first), Some(&last)) if first > 0.0 => last / first,
                _ => 0.0,
            };
            ratios[perm.row] = ratios[perm.row].min(ratio);
        }
    }

    let mut rows = Vec::new();
    let mut witnesses = Vec::new();
    let mut exact_rng =
        ChaCha8Rng::seed_from_u64(opts.rank.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut instance: Option<Option<(NetworkModel, RMat)>> = None;
    for perm in &perms {
        let i = perm.row;
        let structural = pattern_rank(&pattern, perm);
        let mut rep = RowReport {
            row: i,
            alpha: perm.alpha,
            beta: perm.beta,
            count_ok: perm.count_ok(),
            rank: None,
            required: perm.alpha,
            structural_rank: structural,
            sigma_ratio: None,
            verdict: RowVerdict::Pass,
        };
        if !rep.count_ok {
            rep.verdict = RowVerdict::Fail;
            witnesses.push(count_witness(perm, s.u_cols()));
            rows.push(rep);
            continue;
        }
        if perm.alpha == 0 {
            rep.rank = Some(0);
            rows.push(rep);
            continue;
        }
        let trial = &ranks[i];
        rep.rank = trial.iter().copied().min();
        rep.sigma_ratio = Some(ratios[i]);
        let all_full = trial.iter().all(|&r| r == perm.alpha);
        let all_deficient = trial.iter().all(|&r| r < perm.alpha);
        if all_full {
            rows.push(rep);
            continue;
        }
        rep.verdict = RowVerdict::Inconclusive;
        if all_deficient {
            let exact = instance.get_or_insert_with(|| exact_instance(s, &mut exact_rng));
            // the alternative model is costly; only build it when it is the evidence
            let instance = exact
                .as_ref()
                .map(|(m, t)| exact_instance_witness(s, perm, m, t, structural >= perm.alpha));
            let exact_deficient = instance
                .as_ref()
                .is_some_and(|w| w.rank.is_some_and(|r| r < perm.alpha));
            if structural < perm.alpha || exact_deficient {
                rep.verdict = RowVerdict::Fail;
                let reason = if structural < perm.alpha {
                    format!(
                        "reduced matrix of row {} has structural rank {structural} < {}",
                        i + 1,
                        perm.alpha
                    )
                } else {
                    format!(
                        "reduced matrix of row {} is rank deficient on a random instance",
                        i + 1
                    )
                };
                let mut w = instance.unwrap_or(Witness {
                    row: i,
                    reason: String::new(),
                    ti: None,
                    rank: None,
                    required: perm.alpha,
                    sigma_ratio: None,
                    alternative: None,
                });
                w.reason = reason;
                witnesses.push(w);
            }
        }
        rows.push(rep);
    }
    Ok(Theorem2Report { rows, witnesses })
}

/// One random exact instance and its transfer matrix.
fn exact_instance(s: &ModelSetStructure, rng: &mut ChaCha8Rng) -> Option<(NetworkModel, RMat)> {
    for _ in 0..RESAMPLE_BUDGET {
        let m = instantiate_unchecked(s, &random_theta(s, rng)).ok()?;
        if let Ok(t) = network_transfer(&m) {
            return Some((m, t));
        }
    }
    None
}

/// Exact reduced matrix of one row on an instance, with an alternative model
/// when it is rank deficient and `build` is set.
fn exact_instance_witness(
    s: &ModelSetStructure,
    perm: &RowPermutations,
    m: &NetworkModel,
    t: &RMat,
    build: bool,
) -> Witness {
    let ti = extract_ti(perm, t);
    let rank = ti.rank_exact();
    let est = normal_rank(&ti, &RankOptions::default()).ok();
    let alternative = (build && rank < perm.alpha)
        .then(|| row_witness_model(s, m, t, perm))
        .flatten();
    Witness {
        row: perm.row,
        reason: String::new(),
        ti: Some(ti),
        rank: Some(rank),
        required: perm.alpha,
        sigma_ratio: est.map(|e| e.sigma_ratio),
        alternative,
    }
}

/// Builds a different model in the same set with the same `T` from a left
/// null vector `x` of the reduced matrix of one row: the parameterized
/// entries of `G` in that row move by a strictly proper multiple of `x`, and
/// the parameterized entries of `U` absorb the change.
pub fn row_witness_model(
    s: &ModelSetStructure,
    m: &NetworkModel,
    t: &RMat,
    perm: &RowPermutations,
) -> Option<AlternativeModel> {
    let ti = extract_ti(perm, t);
    let x = ti.left_null_vector()?;
    let degree = x.iter().map(Rat::degree).max().unwrap_or(0);
    let max_coeff = x
        .iter()
        .flat_map(|e| e.num().coeffs().iter().map(Signed::abs))
        .fold(Scalar::zero(), |a, b| if b > a { b } else { a });
    if max_coeff.is_zero() {
        return None;
    }
    let scale = Rat::new(
        Poly::constant((max_coeff * Scalar::from_integer(10.into())).recip()),
        Poly::monomial(Scalar::from_integer(1.into()), degree + 1),
    )
    .ok()?;
    let delta: Vec<Rat> = x.iter().map(|e| e * &scale).collect();

    let i = perm.row;
    let mut alt = m.clone();
    for (k, &col) in perm.ti_rows().iter().enumerate() {
        let pos = Position::new(Block::G, i, col);
        let v = &alt.g[(i, col)] - &delta[k];
        *alt.entry_mut(pos) = v;
    }
    // U' row = ((I - G') T) row
    for c in 0..s.u_cols() {
        if !s.u(i, c).is_param() {
            continue;
        }
        let mut acc = t[(i, c)].clone();
        for j in 0..s.l() {
            if j != i && !alt.g[(i, j)].is_zero() {
                acc = &acc - &(&alt.g[(i, j)] * &t[(j, c)]);
            }
        }
        let pos = s.u_position(i, c);
        *alt.entry_mut(pos) = acc;
    }
    if alt == *m {
        return None;
    }
    let validation = validate_model(&alt).ok()?;
    Some(AlternativeModel {
        model: alt,
        validation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityReport {
    pub at_model: bool,
    pub route: RouteReport,
    pub theorem1: Theorem1Report,
    pub theorem2: Vec<RowReport>,
    pub overall: Verdict,
    pub witnesses: Vec<Witness>,
    pub notes: Vec<String>,
}

/// Full pipeline: precondition route, diagonalization test, row tests.
pub fn analyze(
    s: &ModelSetStructure,
    m: Option<&NetworkModel>,
    opts: &AnalysisOptions,
) -> Result<IdentifiabilityReport> {
    if let Some(m) = m {
        check_fits(s, m)?;
    }
    let route = precondition_route(s, m, opts)?;
    let theorem1 = check_theorem1(s);
    let mode = m.map_or(Mode::Generic, Mode::AtModel);
    let t2 = check_theorem2(s, mode, opts)?;
    let mut notes = vec![
        "row rank tests assume independently parameterized entries ranging over their declared properness class"
            .to_string(),
    ];
    if m.is_none() {
        notes.push(format!(
            "generic verdicts hold on {} random instances and the structural pattern, not for every parameter value",
            opts.rank.trials
        ));
    }

    let any_fail = t2.rows.iter().any(|r| r.verdict == RowVerdict::Fail);
    let all_pass = t2.rows.iter().all(|r| r.verdict == RowVerdict::Pass);
    let overall = if route.route.is_none() {
        notes.push("no precondition route applies; identifiability is not decided".into());
        Verdict::Inconclusive
    } else if any_fail {
        if theorem1.passed {
            notes.push("the row rank tests contradict the diagonalization test; the rank tests take precedence".into());
        }
        Verdict::NotIdentifiable
    } else if all_pass || theorem1.passed {
        if m.is_some() {
            Verdict::IdentifiableAtModel
        } else {
            Verdict::GenericallyIdentifiable
        }
    } else {
        Verdict::Inconclusive
    };
    Ok(IdentifiabilityReport {
        at_model: m.is_some(),
        route,
        theorem1,
        theorem2: t2.rows,
        overall,
        witnesses: t2.witnesses,
        notes,
    })
}

/// Label of column `c` of `U = [R H]`: `r1..rK`, then `e1..ep`.
pub fn u_column_label(s: &ModelSetStructure, c: usize) -> String {
    if c < s.k() {
        format!("r{}", c + 1)
    } else {
        format!("e{}", c - s.k() + 1)
    }
}
