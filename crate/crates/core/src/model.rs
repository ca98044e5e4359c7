//! Network models `(G, R, H, Lambda)`, parameterized model-set structures and
//! the network transfer function.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{normal_rank, RankOptions};
use crate::poly::{frac, scalar_to_f64, Poly, Scalar};
use crate::rat::{Rat, STABILITY_MARGIN};
use crate::rmat::{scalar_determinant, scalars_to_dmatrix, RMat};

/// Largest node count for which all principal minors of `I - G^inf` are
/// enumerated during validation.
const MAX_PRINCIPAL_MINOR_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Properness {
    Strict,
    Proper,
}

/// One cell of a model-set structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntryPattern {
    Zero,
    Fixed(Rat),
    Param(Properness),
}

impl EntryPattern {
    pub fn is_param(&self) -> bool {
        matches!(self, EntryPattern::Param(_))
    }

    /// Nonzero for generic parameter values.
    pub fn is_structurally_nonzero(&self) -> bool {
        match self {
            EntryPattern::Zero => false,
            EntryPattern::Fixed(r) => !r.is_zero(),
            EntryPattern::Param(_) => true,
        }
    }

    /// The feedthrough is an unknown (parameterized proper entry).
    pub fn has_param_feedthrough(&self) -> bool {
        matches!(self, EntryPattern::Param(Properness::Proper))
    }

    /// The feedthrough can be nonzero for some parameter value.
    pub fn may_have_feedthrough(&self) -> bool {
        match self {
            EntryPattern::Zero | EntryPattern::Param(Properness::Strict) => false,
            EntryPattern::Param(Properness::Proper) => true,
            EntryPattern::Fixed(r) => r.feedthrough().is_ok_and(|f| !f.is_zero()),
        }
    }

    /// Known feedthrough value, `None` when it is a parameter.
    pub fn known_feedthrough(&self) -> Option<f64> {
        match self {
            EntryPattern::Zero | EntryPattern::Param(Properness::Strict) => Some(0.0),
            EntryPattern::Param(Properness::Proper) => None,
            EntryPattern::Fixed(r) => r.feedthrough_f64().ok(),
        }
    }
}

/// Row-major grid of entry patterns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternGrid {
    rows: usize,
    cols: usize,
    cells: Vec<EntryPattern>,
}

impl PatternGrid {
    pub fn filled(rows: usize, cols: usize, cell: EntryPattern) -> Self {
        PatternGrid {
            rows,
            cols,
            cells: vec![cell; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, EntryPattern::Zero)
    }

    pub fn from_rows(rows: Vec<Vec<EntryPattern>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged pattern grid".into()));
        }
        Ok(PatternGrid {
            rows: r,
            cols: c,
            cells: rows.into_iter().flatten().collect(),
        })
    }

    /// Fixed pattern holding the entries of a concrete matrix.
    pub fn from_matrix(m: &RMat) -> Self {
        let cells = m
            .entries()
            .iter()
            .map(|e| {
                if e.is_zero() {
                    EntryPattern::Zero
                } else {
                    EntryPattern::Fixed(e.clone())
                }
            })
            .collect();
        PatternGrid {
            rows: m.rows(),
            cols: m.cols(),
            cells,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &EntryPattern {
        &self.cells[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, cell: EntryPattern) {
        self.cells[i * self.cols + j] = cell;
    }

    pub fn row(&self, i: usize) -> &[EntryPattern] {
        &self.cells[i * self.cols..(i + 1) * self.cols]
    }

    /// Row-major iterator of `(row, col, cell)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &EntryPattern)> {
        self.cells
            .iter()
            .enumerate()
            .map(|(k, c)| (k / self.cols.max(1), k % self.cols.max(1), c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    G,
    R,
    H,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Block::G => "G",
            Block::R => "R",
            Block::H => "H",
        })
    }
}

/// Zero-based position of an entry in `G`, `R` or `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub block: Block,
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub fn new(block: Block, row: usize, col: usize) -> Self {
        Position { block, row, col }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}][{}]", self.block, self.row + 1, self.col + 1)
    }
}

/// A parameterized network model set: which entries are zero, fixed or free.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSetStructure {
    l: usize,
    k: usize,
    p: usize,
    g: PatternGrid,
    r: PatternGrid,
    h: PatternGrid,
    /// `Some` when the noise covariance is fixed, `None` when parameterized.
    lambda: Option<DMatrix<f64>>,
    lambda_diagonal_feedthrough: bool,
}

impl ModelSetStructure {
    /// Builds and validates a structure. The noise covariance is a parameter
    /// unless `lambda` is given.
    pub fn new(
        g: PatternGrid,
        r: PatternGrid,
        h: PatternGrid,
        lambda: Option<DMatrix<f64>>,
        lambda_diagonal_feedthrough: bool,
    ) -> Result<Self> {
        let l = g.rows();
        let k = r.cols();
        let p = h.cols();
        let s = ModelSetStructure {
            l,
            k,
            p,
            g,
            r,
            h,
            lambda,
            lambda_diagonal_feedthrough,
        };
        let problems = s.violations();
        if problems.is_empty() {
            Ok(s)
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let (l, p) = (self.l, self.p);
        if self.g.cols() != l {
            out.push(format!("G must be {l}x{l}, got {}x{}", l, self.g.cols()));
            return out;
        }
        if self.r.rows() != l {
            out.push(format!("R must have {l} rows, got {}", self.r.rows()));
        }
        if self.h.rows() != l && !(p == 0 && self.h.rows() == 0) {
            out.push(format!("H must be {l}x{p}, got {}x{}", self.h.rows(), p));
        }
        if p > l {
            out.push(format!("noise rank p = {p} exceeds node count L = {l}"));
        }
        if !out.is_empty() {
            return out;
        }
        for i in 0..l {
            if *self.g.get(i, i) != EntryPattern::Zero {
                out.push(format!("G[{}][{}]: diagonal must be zero", i + 1, i + 1));
            }
        }
        for (block, grid) in [
            (Block::G, &self.g),
            (Block::R, &self.r),
            (Block::H, &self.h),
        ] {
            for (i, j, cell) in grid.iter() {
                if let EntryPattern::Fixed(r) = cell {
                    if !r.is_proper() {
                        out.push(format!(
                            "{}: fixed entry {r} is improper",
                            Position::new(block, i, j)
                        ));
                    }
                }
            }
        }
        for i in 0..p {
            for j in 0..p {
                let pos = Position::new(Block::H, i, j);
                match (i == j, self.h.get(i, j)) {
                    (true, EntryPattern::Zero) => {
                        out.push(format!("{pos}: monic noise block needs a nonzero diagonal"))
                    }
                    (true, EntryPattern::Fixed(r))
                        if r.feedthrough().ok() != Some(Scalar::one()) =>
                    {
                        out.push(format!(
                            "{pos}: diagonal of the monic noise block must have feedthrough 1"
                        ))
                    }
                    (false, EntryPattern::Fixed(r)) if !r.is_strictly_proper() => {
                        out.push(format!(
                            "{pos}: off-diagonal of the monic noise block must be strictly proper"
                        ))
                    }
                    _ => {}
                }
            }
        }
        if let Some(lam) = &self.lambda {
            if lam.nrows() != p || lam.ncols() != p {
                out.push(format!(
                    "Lambda must be {p}x{p}, got {}x{}",
                    lam.nrows(),
                    lam.ncols()
                ));
            } else if let Some(v) = lambda_violation(lam) {
                out.push(v);
            }
        }
        out
    }

    pub fn l(&self) -> usize {
        self.l
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn g(&self) -> &PatternGrid {
        &self.g
    }
    pub fn r(&self) -> &PatternGrid {
        &self.r
    }
    pub fn h(&self) -> &PatternGrid {
        &self.h
    }
    pub fn fixed_lambda(&self) -> Option<&DMatrix<f64>> {
        self.lambda.as_ref()
    }

    /// Declared flag that `H^inf Lambda H^inf^T` is diagonal for every member.
    pub fn lambda_diagonal_feedthrough(&self) -> bool {
        self.lambda_diagonal_feedthrough
    }

    /// Number of columns of `U = [R H]`.
    pub fn u_cols(&self) -> usize {
        self.k + self.p
    }

    /// Pattern of `U = [R H]` at `(i, c)`.
    pub fn u(&self, i: usize, c: usize) -> &EntryPattern {
        if c < self.k {
            self.r.get(i, c)
        } else {
            self.h.get(i, c - self.k)
        }
    }

    /// Position in `R` or `H` of column `c` of `U`.
    pub fn u_position(&self, i: usize, c: usize) -> Position {
        if c < self.k {
            Position::new(Block::R, i, c)
        } else {
            Position::new(Block::H, i, c - self.k)
        }
    }

    pub fn grid(&self, block: Block) -> &PatternGrid {
        match block {
            Block::G => &self.g,
            Block::R => &self.r,
            Block::H => &self.h,
        }
    }

    /// All parameterized positions in block order, row-major.
    pub fn param_positions(&self) -> Vec<Position> {
        [Block::G, Block::R, Block::H]
            .into_iter()
            .flat_map(|b| {
                self.grid(b)
                    .iter()
                    .filter(|(_, _, c)| c.is_param())
                    .map(move |(i, j, _)| Position::new(b, i, j))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Whether the entry at `pos` is in the monic upper block of `H`.
    pub fn in_monic_block(&self, pos: Position) -> bool {
        pos.block == Block::H && pos.row < self.p
    }

    /// Same structure with one `G` entry replaced.
    pub fn with_g(&self, i: usize, j: usize, cell: EntryPattern) -> Result<Self> {
        let mut g = self.g.clone();
        g.set(i, j, cell);
        ModelSetStructure::new(
            g,
            self.r.clone(),
            self.h.clone(),
            self.lambda.clone(),
            self.lambda_diagonal_feedthrough,
        )
    }

    /// Same structure with extra `R` columns appended.
    pub fn with_extra_r_columns(&self, cols: &[Vec<EntryPattern>]) -> Result<Self> {
        let mut rows: Vec<Vec<EntryPattern>> =
            (0..self.l).map(|i| self.r.row(i).to_vec()).collect();
        for col in cols {
            if col.len() != self.l {
                return Err(Error::Dimension("excitation column length".into()));
            }
            for (i, cell) in col.iter().enumerate() {
                rows[i].push(cell.clone());
            }
        }
        let r = if self.l == 0 {
            PatternGrid::zeros(0, self.k + cols.len())
        } else {
            PatternGrid::from_rows(rows)?
        };
        ModelSetStructure::new(
            self.g.clone(),
            r,
            self.h.clone(),
            self.lambda.clone(),
            self.lambda_diagonal_feedthrough,
        )
    }
}

fn lambda_violation(lam: &DMatrix<f64>) -> Option<String> {
    let scale = lam.amax().max(1.0);
    if (lam - lam.transpose()).amax() > 1e-12 * scale {
        return Some("Lambda is not symmetric".into());
    }
    if lam.nrows() > 0 && nalgebra::Cholesky::new(lam.clone()).is_none() {
        return Some("Lambda is not positive definite".into());
    }
    None
}

/// One concrete network model `(G, R, H, Lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub g: RMat,
    pub r: RMat,
    pub h: RMat,
    pub lambda: DMatrix<f64>,
}

impl NetworkModel {
    pub fn new(g: RMat, r: RMat, h: RMat, lambda: DMatrix<f64>) -> Result<Self> {
        let m = NetworkModel { g, r, h, lambda };
        m.check_dimensions()?;
        Ok(m)
    }

    /// A model without noise (`p = 0`).
    pub fn noise_free(g: RMat, r: RMat) -> Result<Self> {
        let l = g.rows();
        Self::new(g, r, RMat::zeros(l, 0), DMatrix::zeros(0, 0))
    }

    pub fn l(&self) -> usize {
        self.g.rows()
    }
    pub fn k(&self) -> usize {
        self.r.cols()
    }
    pub fn p(&self) -> usize {
        self.h.cols()
    }

    fn check_dimensions(&self) -> Result<()> {
        let l = self.g.rows();
        let p = self.h.cols();
        let ok = self.g.cols() == l
            && self.r.rows() == l
            && self.h.rows() == l
            && self.lambda.nrows() == p
            && self.lambda.ncols() == p;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "G {}x{}, R {}x{}, H {}x{}, Lambda {}x{}",
                self.g.rows(),
                self.g.cols(),
                self.r.rows(),
                self.r.cols(),
                self.h.rows(),
                self.h.cols(),
                self.lambda.nrows(),
                self.lambda.ncols()
            )))
        }
    }

    /// `U = [R H]`
    pub fn u(&self) -> RMat {
        self.r.hstack(&self.h).expect("dimensions checked")
    }

    pub fn i_minus_g(&self) -> RMat {
        RMat::identity(self.l()).sub(&self.g).expect("square")
    }

    pub fn entry(&self, pos: Position) -> &Rat {
        match pos.block {
            Block::G => &self.g[(pos.row, pos.col)],
            Block::R => &self.r[(pos.row, pos.col)],
            Block::H => &self.h[(pos.row, pos.col)],
        }
    }

    pub fn entry_mut(&mut self, pos: Position) -> &mut Rat {
        match pos.block {
            Block::G => &mut self.g[(pos.row, pos.col)],
            Block::R => &mut self.r[(pos.row, pos.col)],
            Block::H => &mut self.h[(pos.row, pos.col)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    NonzeroDiagonal,
    Improper,
    Unstable,
    NoiseNotMonic,
    NoiseRankDeficient,
    NoiseNotMinimumPhase,
    LambdaNotPositiveDefinite,
    SingularIMinusG,
    InverseNotProper,
    InverseUnstable,
    PrincipalMinorZero,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.detail)
    }
}

/// Outcome of [`validate_model`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Conditions that were not verified.
    pub unchecked: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, detail: String) {
        self.violations.push(Violation { kind, detail });
    }
}

/// Checks every network-model invariant. Only a dimension mismatch is an
/// error; everything else is reported as a violation.
pub fn validate_model(m: &NetworkModel) -> Result<ValidationReport> {
    m.check_dimensions()?;
    let mut rep = ValidationReport::default();
    let (l, p) = (m.l(), m.p());

    for i in 0..l {
        if !m.g[(i, i)].is_zero() {
            rep.push(
                ViolationKind::NonzeroDiagonal,
                format!(
                    "nonzero diagonal: G[{}][{}] = {}",
                    i + 1,
                    i + 1,
                    m.g[(i, i)]
                ),
            );
        }
    }
    for (block, mat, need_stable) in [
        (Block::G, &m.g, true),
        (Block::R, &m.r, false),
        (Block::H, &m.h, true),
    ] {
        for i in 0..mat.rows() {
            for j in 0..mat.cols() {
                let e = &mat[(i, j)];
                let pos = Position::new(block, i, j);
                if !e.is_proper() {
                    rep.push(
                        ViolationKind::Improper,
                        format!("improper entry {pos} = {e}"),
                    );
                } else if need_stable && !e.is_stable() {
                    rep.push(
                        ViolationKind::Unstable,
                        format!("unstable entry {pos} = {e}"),
                    );
                }
            }
        }
    }
    if !rep.is_valid() {
        // feedthrough-based checks below assume properness
        return Ok(rep);
    }

    if p > 0 {
        check_noise(m, &mut rep);
    }
    if let Some(v) = lambda_violation(&m.lambda) {
        rep.push(ViolationKind::LambdaNotPositiveDefinite, v);
    }
    check_well_posed(m, &mut rep);
    Ok(rep)
}

fn check_noise(m: &NetworkModel, rep: &mut ValidationReport) {
    let (l, p) = (m.l(), m.p());
    let h_inf = m.h.feedthrough().expect("proper");
    for i in 0..p {
        for j in 0..p {
            let want = if i == j { 1.0 } else { 0.0 };
            if (h_inf[(i, j)] - want).abs() > 1e-12 {
                rep.push(
                    ViolationKind::NoiseNotMonic,
                    format!(
                        "noise block not monic: H^inf[{}][{}] = {}",
                        i + 1,
                        j + 1,
                        h_inf[(i, j)]
                    ),
                );
            }
        }
    }
    match normal_rank(&m.h, &RankOptions::default()) {
        Ok(est) if est.rank == p => {}
        Ok(est) => rep.push(
            ViolationKind::NoiseRankDeficient,
            format!("H has normal rank {} < p = {p}", est.rank),
        ),
        Err(e) => rep.push(ViolationKind::NoiseRankDeficient, format!("rank of H: {e}")),
    }
    let rows: Vec<usize> = (0..p).collect();
    let h_a = m.h.select(&rows, &rows);
    match h_a.determinant() {
        Ok(det) if det.is_zero() => rep.push(
            ViolationKind::NoiseRankDeficient,
            "det(H_a) is identically zero".into(),
        ),
        Ok(det) => {
            let radius = det.num().root_radius();
            if radius >= 1.0 - STABILITY_MARGIN {
                rep.push(
                    ViolationKind::NoiseNotMinimumPhase,
                    format!("det(H_a) has a zero of modulus {radius:.6}"),
                );
            }
        }
        Err(e) => rep.push(ViolationKind::NoiseRankDeficient, format!("det(H_a): {e}")),
    }
    if p < l {
        rep.unchecked
            .push("stable left inverse of the rectangular noise model".into());
    }
}

fn check_well_posed(m: &NetworkModel, rep: &mut ValidationReport) {
    let l = m.l();
    let img = m.i_minus_g();
    match img.invert() {
        Err(Error::Singular) => {
            rep.push(ViolationKind::SingularIMinusG, "I - G is singular".into());
            return;
        }
        Err(e) => {
            rep.push(
                ViolationKind::SingularIMinusG,
                format!("inverting I - G: {e}"),
            );
            return;
        }
        Ok(inv) => {
            for i in 0..l {
                for j in 0..l {
                    let e = &inv[(i, j)];
                    if !e.is_proper() {
                        rep.push(
                            ViolationKind::InverseNotProper,
                            format!("(I - G)^-1[{}][{}] = {e} is improper", i + 1, j + 1),
                        );
                    } else if !e.is_stable() {
                        rep.push(
                            ViolationKind::InverseUnstable,
                            format!("(I - G)^-1[{}][{}] = {e} is unstable", i + 1, j + 1),
                        );
                    }
                }
            }
        }
    }
    if l > MAX_PRINCIPAL_MINOR_NODES {
        rep.unchecked.push(format!(
            "principal minors of I - G^inf (L > {MAX_PRINCIPAL_MINOR_NODES})"
        ));
        return;
    }
    let Ok(ginf) = img.feedthrough_exact() else {
        return;
    };
    for mask in 1u32..(1u32 << l) {
        let idx: Vec<usize> = (0..l).filter(|b| mask & (1 << b) != 0).collect();
        if idx.len() == 1 {
            continue;
        }
        let sub: Vec<Scalar> = idx
            .iter()
            .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| ginf[i * l + j].clone())
            .collect();
        if scalar_determinant(idx.len(), &sub).is_zero() {
            let names: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
            rep.push(
                ViolationKind::PrincipalMinorZero,
                format!(
                    "principal minor of I - G^inf on nodes {{{}}} is zero",
                    names.join(",")
                ),
            );
        }
    }
}

/// Concrete values for every parameterized entry of a structure.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThetaAssignment {
    pub entries: BTreeMap<Position, Rat>,
    pub lambda: Option<DMatrix<f64>>,
}

impl ThetaAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, pos: Position, value: Rat) -> Self {
        self.entries.insert(pos, value);
        self
    }

    pub fn with_lambda(mut self, lambda: DMatrix<f64>) -> Self {
        self.lambda = Some(lambda);
        self
    }
}

fn check_assignment_class(
    s: &ModelSetStructure,
    pos: Position,
    flag: Properness,
    v: &Rat,
) -> Result<()> {
    if !v.is_proper() {
        return Err(Error::Theta(format!("{pos} = {v} is improper")));
    }
    if s.in_monic_block(pos) {
        let ft = v.feedthrough()?;
        let want = if pos.row == pos.col {
            Scalar::one()
        } else {
            Scalar::zero()
        };
        if ft != want {
            return Err(Error::Theta(format!(
                "{pos} = {v} breaks monicity of the noise block"
            )));
        }
        return Ok(());
    }
    if flag == Properness::Strict && !v.is_strictly_proper() {
        return Err(Error::Theta(format!("{pos} = {v} must be strictly proper")));
    }
    Ok(())
}

/// Builds the concrete model without running [`validate_model`].
pub fn instantiate_unchecked(
    s: &ModelSetStructure,
    theta: &ThetaAssignment,
) -> Result<NetworkModel> {
    let params = s.param_positions();
    for pos in theta.entries.keys() {
        if !params.contains(pos) {
            return Err(Error::Theta(format!("{pos} is not a parameterized entry")));
        }
    }
    let build = |block: Block| -> Result<RMat> {
        let grid = s.grid(block);
        let mut out = RMat::zeros(grid.rows(), grid.cols());
        for (i, j, cell) in grid.iter() {
            out[(i, j)] = match cell {
                EntryPattern::Zero => Rat::zero(),
                EntryPattern::Fixed(r) => r.clone(),
                EntryPattern::Param(flag) => {
                    let pos = Position::new(block, i, j);
                    let v = theta
                        .entries
                        .get(&pos)
                        .ok_or_else(|| Error::Theta(format!("missing value for {pos}")))?;
                    check_assignment_class(s, pos, *flag, v)?;
                    v.clone()
                }
            };
        }
        Ok(out)
    };
    let g = build(Block::G)?;
    let r = build(Block::R)?;
    let h = if s.p() == 0 {
        RMat::zeros(s.l(), 0)
    } else {
        build(Block::H)?
    };
    let lambda = match (s.fixed_lambda(), &theta.lambda) {
        (Some(_), Some(_)) => return Err(Error::Theta("Lambda is fixed by the structure".into())),
        (Some(fixed), None) => fixed.clone(),
        (None, Some(v)) => v.clone(),
        (None, None) if s.p() == 0 => DMatrix::zeros(0, 0),
        (None, None) => return Err(Error::Theta("missing value for Lambda".into())),
    };
    NetworkModel::new(g, r, h, lambda)
}

/// Builds the model `M(theta)` and validates it.
pub fn instantiate(s: &ModelSetStructure, theta: &ThetaAssignment) -> Result<NetworkModel> {
    let m = instantiate_unchecked(s, theta)?;
    let rep = validate_model(&m)?;
    if !rep.is_valid() {
        let msgs: Vec<String> = rep.violations.iter().map(ToString::to_string).collect();
        return Err(Error::Validation(msgs.join("; ")));
    }
    Ok(m)
}

/// Reads the parameter values of a concrete model; fails when the model does
/// not match the structure's zero/fixed entries.
pub fn extract_theta(s: &ModelSetStructure, m: &NetworkModel) -> Result<ThetaAssignment> {
    if m.l() != s.l() || m.k() != s.k() || m.p() != s.p() {
        return Err(Error::Dimension(
            "model does not match the structure".into(),
        ));
    }
    let mut theta = ThetaAssignment::new();
    for block in [Block::G, Block::R, Block::H] {
        for (i, j, cell) in s.grid(block).iter() {
            let pos = Position::new(block, i, j);
            let v = m.entry(pos);
            match cell {
                EntryPattern::Zero if !v.is_zero() => {
                    return Err(Error::Theta(format!("{pos} should be zero, is {v}")))
                }
                EntryPattern::Fixed(f) if f != v => {
                    return Err(Error::Theta(format!("{pos} should be {f}, is {v}")))
                }
                EntryPattern::Param(_) => {
                    theta.entries.insert(pos, v.clone());
                }
                _ => {}
            }
        }
    }
    if s.fixed_lambda().is_none() && s.p() > 0 {
        theta.lambda = Some(m.lambda.clone());
    }
    Ok(theta)
}

/// `T = (I - G)^{-1} [R H]`; the first `K` columns are `T_wr`, the rest `T_we`.
pub fn network_transfer(m: &NetworkModel) -> Result<RMat> {
    let inv = m.i_minus_g().invert()?;
    inv.mul(&m.u())
}

/// Feedthrough terms of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedthroughMatrices {
    pub g: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// `(I - G^inf)^{-1} R^inf`
    pub t_wr: DMatrix<f64>,
}

/// Feedthrough matrices; `T_wr^inf` is computed from `G^inf, R^inf` and
/// cross-checked against the entrywise limit of `T_wr`.
pub fn feedthrough_matrices(m: &NetworkModel) -> Result<FeedthroughMatrices> {
    let g = m.g.feedthrough()?;
    let r = m.r.feedthrough()?;
    let h = m.h.feedthrough()?;
    let l = m.l();
    let img = DMatrix::<f64>::identity(l, l) - &g;
    let t_wr = img.clone().lu().solve(&r).ok_or(Error::Singular)?;
    let t = network_transfer(m)?;
    let cols: Vec<usize> = (0..m.k()).collect();
    let rows: Vec<usize> = (0..l).collect();
    let direct = t.select(&rows, &cols).feedthrough()?;
    let scale = direct.amax().max(1.0);
    if (&direct - &t_wr).amax() > 1e-9 * scale {
        return Err(Error::Validation(
            "feedthrough of T_wr disagrees with (I - G^inf)^-1 R^inf".into(),
        ));
    }
    Ok(FeedthroughMatrices { g, r, h, t_wr })
}

/// Exact feedthrough of `I - G`, as `f64`.
pub fn i_minus_g_inf(m: &NetworkModel) -> Result<DMatrix<f64>> {
    let l = m.l();
    let v = m.i_minus_g().feedthrough_exact()?;
    Ok(scalars_to_dmatrix(l, l, &v))
}

/// Grid resolution of random coefficients (keeps exact arithmetic cheap).
const SAMPLE_GRID: i64 = 1024;

fn grid_value(rng: &mut impl Rng, lo: f64, hi: f64) -> Scalar {
    let x: f64 = rng.random_range(lo..hi);
    frac((x * SAMPLE_GRID as f64).round() as i64, SAMPLE_GRID)
}

/// Random stable first-order value `c / (z - a)`, with `|c|` in `[0.5, 2]`
/// and `a` in `(-0.9, 0.9)`; `feedthrough` is added as a constant.
pub fn random_module(rng: &mut impl Rng, feedthrough: Option<Scalar>) -> Rat {
    let mut c = grid_value(rng, 0.5, 2.0);
    if rng.random::<bool>() {
        c = -c;
    }
    let a = grid_value(rng, -0.9, 0.9);
    let base = Rat::first_order(c, a);
    match feedthrough {
        Some(d) => &base + &Rat::constant(d),
        None => base,
    }
}

/// Random assignment for every parameter of `s`: strictly proper first-order
/// modules, plus a random feedthrough in `[0.5, 2]` for proper entries and
/// `1` on the diagonal of the monic noise block.
pub fn random_theta(s: &ModelSetStructure, rng: &mut impl Rng) -> ThetaAssignment {
    let mut theta = ThetaAssignment::new();
    for pos in s.param_positions() {
        let flag = match s.grid(pos.block).get(pos.row, pos.col) {
            EntryPattern::Param(f) => *f,
            _ => unreachable!(),
        };
        let ft = if s.in_monic_block(pos) {
            (pos.row == pos.col).then(Scalar::one)
        } else if flag == Properness::Proper {
            Some(grid_value(rng, 0.5, 2.0))
        } else {
            None
        };
        theta.entries.insert(pos, random_module(rng, ft));
    }
    if s.fixed_lambda().is_none() && s.p() > 0 {
        let p = s.p();
        let lam = if s.lambda_diagonal_feedthrough() {
            DMatrix::from_fn(p, p, |i, j| {
                if i == j {
                    rng.random_range(0.5..2.0)
                } else {
                    0.0
                }
            })
        } else {
            let b = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            &b * b.transpose() + DMatrix::identity(p, p) * 0.5
        };
        theta.lambda = Some(lam);
    }
    theta
}

/// Polynomial `z - a` helper for fixtures.
pub fn z_minus(a: Scalar) -> Poly {
    Poly::new(vec![-a, Scalar::one()])
}

/// Feedthrough of each pattern cell, `None` for parameters.
pub fn known_feedthrough_grid(grid: &PatternGrid) -> Vec<Option<f64>> {
    grid.iter().map(|(_, _, c)| c.known_feedthrough()).collect()
}

/// `f64` value of an exact scalar (re-exported for convenience).
pub fn to_f64(q: &Scalar) -> f64 {
    scalar_to_f64(q)
}
