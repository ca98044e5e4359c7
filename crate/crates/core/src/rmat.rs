//! Matrices of rational functions.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::poly::{scalar_to_f64, Poly, Scalar};
use crate::rat::Rat;

/// Default cap on polynomial degree reached during elimination.
pub const DEFAULT_DEGREE_CAP: usize = 64;

/// Row-major `rows x cols` matrix of rational functions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RMat {
    rows: usize,
    cols: usize,
    entries: Vec<Rat>,
}

impl RMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RMat {
            rows,
            cols,
            entries: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = RMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rat::one();
        }
        m
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<Rat>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(RMat {
            rows,
            cols,
            entries,
        })
    }

    /// Panics on ragged input.
    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        RMat {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_scalars(m: &DMatrix<f64>) -> Self {
        let mut out = RMat::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let q = crate::poly::scalar_from_f64(m[(i, j)]).expect("finite entry");
                out[(i, j)] = Rat::constant(q);
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Rat] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Rat::is_zero)
    }

    pub fn transpose(&self) -> RMat {
        let mut out = RMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }

    /// Selects the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> RMat {
        let mut out = RMat::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn hstack(&self, rhs: &RMat) -> Result<RMat> {
        if self.rows != rhs.rows {
            return Err(Error::Dimension(format!(
                "hstack of {} and {} rows",
                self.rows, rhs.rows
            )));
        }
        let mut out = RMat::zeros(self.rows, self.cols + rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)].clone();
            }
            for j in 0..rhs.cols {
                out[(i, self.cols + j)] = rhs[(i, j)].clone();
            }
        }
        Ok(out)
    }

    pub fn mul(&self, rhs: &RMat) -> Result<RMat> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "product of {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = RMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = Rat::zero();
                for k in 0..self.cols {
                    let (a, b) = (&self[(i, k)], &rhs[(k, j)]);
                    if !a.is_zero() && !b.is_zero() {
                        acc = &acc + &(a * b);
                    }
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }

    fn zip(&self, rhs: &RMat, f: impl Fn(&Rat, &Rat) -> Rat) -> Result<RMat> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension(format!(
                "elementwise op on {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(RMat {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, rhs: &RMat) -> Result<RMat> {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &RMat) -> Result<RMat> {
        self.zip(rhs, |a, b| a - b)
    }

    /// Entrywise limit `z -> infinity`; fails on any improper entry.
    pub fn feedthrough(&self) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)].feedthrough_f64()?;
            }
        }
        Ok(out)
    }

    /// Exact entrywise feedthrough, row-major.
    pub fn feedthrough_exact(&self) -> Result<Vec<Scalar>> {
        self.entries.iter().map(Rat::feedthrough).collect()
    }

    pub fn is_proper(&self) -> bool {
        self.entries.iter().all(Rat::is_proper)
    }

    /// Evaluates every entry at `z`; `None` if `z` is a pole of any entry.
    pub fn eval(&self, z: Complex64) -> Option<DMatrix<Complex64>> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let e = &self[(i, j)];
                if !e.is_zero() {
                    out[(i, j)] = e.eval(z)?;
                }
            }
        }
        Some(out)
    }

    /// Exact inverse by fraction-free Gauss-Jordan elimination.
    pub fn invert(&self) -> Result<RMat> {
        self.invert_with_cap(DEFAULT_DEGREE_CAP)
    }

    pub fn invert_with_cap(&self, cap: usize) -> Result<RMat> {
        if !self.is_square() {
            return Err(Error::Dimension(format!(
                "cannot invert a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let (polys, row_den) = self.clear_row_denominators();
        let mut aug: Vec<Vec<Poly>> = polys
            .into_iter()
            .enumerate()
            .map(|(i, mut row)| {
                row.extend((0..n).map(|j| if i == j { Poly::one() } else { Poly::zero() }));
                row
            })
            .collect();
        let (_, _) = gauss_jordan(&mut aug, n, cap)?;
        // left block is now c * I; right block is c * P^{-1}
        let mut out = RMat::zeros(n, n);
        for i in 0..n {
            let diag = aug[i][i].clone();
            for j in 0..n {
                let num = &aug[i][n + j] * &row_den[j];
                out[(i, j)] = Rat::new(num, diag.clone())?;
            }
        }
        Ok(out)
    }

    /// Exact determinant (square matrices).
    pub fn determinant(&self) -> Result<Rat> {
        if !self.is_square() {
            return Err(Error::Dimension("determinant of non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(Rat::one());
        }
        let (mut polys, row_den) = self.clear_row_denominators();
        let den = row_den.iter().fold(Poly::one(), |acc, d| &acc * d);
        match gauss_jordan(&mut polys, n, usize::MAX) {
            Ok((sign, last)) => {
                let last = if sign < 0 { -&last } else { last };
                Rat::new(last, den)
            }
            Err(Error::Singular) => Ok(Rat::zero()),
            Err(e) => Err(e),
        }
    }

    /// Multiplies each row by the lcm of its denominators.
    fn clear_row_denominators(&self) -> (Vec<Vec<Poly>>, Vec<Poly>) {
        let mut rows = Vec::with_capacity(self.rows);
        let mut dens = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let row = self.row(i);
            let lcm = row.iter().fold(Poly::one(), |acc, r| {
                let g = Poly::gcd(&acc, r.den());
                (&acc * r.den()).exact_div(&g).unwrap()
            });
            let polys = row
                .iter()
                .map(|r| r.num() * &lcm.exact_div(r.den()).unwrap())
                .collect();
            rows.push(polys);
            dens.push(lcm);
        }
        (rows, dens)
    }

    /// Exact rank over the field of rational functions.
    pub fn rank_exact(&self) -> usize {
        let (echelon, _) = self.row_echelon();
        echelon
    }

    /// Gaussian elimination over Q(z); returns (rank, pivot columns).
    fn row_echelon(&self) -> (usize, Vec<usize>) {
        let mut m = self.clone();
        let mut rank = 0;
        let mut pivots = Vec::new();
        for c in 0..self.cols {
            let Some(p) = (rank..self.rows).find(|&r| !m[(r, c)].is_zero()) else {
                continue;
            };
            m.swap_rows(rank, p);
            let inv = m[(rank, c)].inv().unwrap();
            for r in rank + 1..self.rows {
                if m[(r, c)].is_zero() {
                    continue;
                }
                let f = &m[(r, c)] * &inv;
                for j in c..self.cols {
                    let t = &f * &m[(rank, j)];
                    m[(r, j)] = &m[(r, j)] - &t;
                }
            }
            pivots.push(c);
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        (rank, pivots)
    }

    /// A nonzero row vector `x` with `x * self = 0`, if the rows are dependent.
    ///
    /// The returned vector has polynomial entries (denominators cleared).
    pub fn left_null_vector(&self) -> Option<Vec<Rat>> {
        // null space of the transpose by reduced row echelon form over Q(z)
        let t = self.transpose();
        let (rows, cols) = (t.rows, t.cols);
        let mut m = t;
        let mut pivot_cols = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            let Some(p) = (r..rows).find(|&i| !m[(i, c)].is_zero()) else {
                continue;
            };
            m.swap_rows(r, p);
            let inv = m[(r, c)].inv().unwrap();
            for j in 0..cols {
                m[(r, j)] = &m[(r, j)] * &inv;
            }
            for i in 0..rows {
                if i == r || m[(i, c)].is_zero() {
                    continue;
                }
                let f = m[(i, c)].clone();
                for j in 0..cols {
                    let t = &f * &m[(r, j)];
                    m[(i, j)] = &m[(i, j)] - &t;
                }
            }
            pivot_cols.push(c);
            r += 1;
            if r == rows {
                break;
            }
        }
        let free = (0..cols).find(|c| !pivot_cols.contains(c))?;
        let mut x = vec![Rat::zero(); cols];
        x[free] = Rat::one();
        for (k, &pc) in pivot_cols.iter().enumerate() {
            x[pc] = -&m[(k, free)];
        }
        // clear denominators so the vector is polynomial
        let lcm = x.iter().fold(Poly::one(), |acc, e| {
            let g = Poly::gcd(&acc, e.den());
            (&acc * e.den()).exact_div(&g).unwrap()
        });
        let lcm = Rat::from_poly(lcm);
        Some(x.iter().map(|e| e * &lcm).collect())
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.entries.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Largest numerator/denominator degree over all entries.
    pub fn max_degree(&self) -> usize {
        self.entries.iter().map(Rat::degree).max().unwrap_or(0)
    }
}

/// Fraction-free Gauss-Jordan on the leading `n` columns of `a`.
///
/// On success the leading block is `c * I` (all diagonal entries equal) and
/// the remaining columns are scaled by the same `c`. Returns the row swap
/// parity and `c`, which equals `parity * det` of the leading block.
fn gauss_jordan(a: &mut [Vec<Poly>], n: usize, cap: usize) -> Result<(i32, Poly)> {
    let width = a.first().map_or(0, Vec::len);
    let mut prev = Poly::one();
    let mut sign = 1;
    for k in 0..n {
        // lowest-degree nonzero pivot keeps intermediate growth down
        let pivot = (k..n)
            .filter(|&r| !a[r][k].is_zero())
            .min_by_key(|&r| a[r][k].degree().unwrap())
            .ok_or(Error::Singular)?;
        if pivot != k {
            a.swap(pivot, k);
            sign = -sign;
        }
        let pk = a[k][k].clone();
        for i in 0..n {
            if i == k {
                continue;
            }
            let aik = a[i][k].clone();
            for j in 0..width {
                if j == k {
                    continue;
                }
                let t = &(&pk * &a[i][j]) - &(&aik * &a[k][j]);
                let q = t.exact_div(&prev).ok_or_else(|| {
                    Error::InvalidArgument("fraction-free elimination lost exactness".into())
                })?;
                if let Some(d) = q.degree() {
                    if d > cap {
                        return Err(Error::DegreeOverflow { degree: d, cap });
                    }
                }
                a[i][j] = q;
            }
            a[i][k] = Poly::zero();
        }
        prev = pk;
    }
    Ok((sign, prev))
}

impl Index<(usize, usize)> for RMat {
    type Output = Rat;
    fn index(&self, (i, j): (usize, usize)) -> &Rat {
        assert!(i < self.rows && j < self.cols, "index out of range");
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rat {
        assert!(i < self.rows && j < self.cols, "index out of range");
        &mut self.entries[i * self.cols + j]
    }
}

impl fmt::Display for RMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row(i).iter().map(ToString::to_string).collect();
            write!(f, "{}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for RMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RMat{}x{}{self}", self.rows, self.cols)
    }
}

/// Converts a real matrix of exact scalars to `f64`.
pub fn scalars_to_dmatrix(rows: usize, cols: usize, v: &[Scalar]) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| scalar_to_f64(&v[i * cols + j]))
}

/// Exact determinant of a small dense scalar matrix (row-major).
pub fn scalar_determinant(n: usize, v: &[Scalar]) -> Scalar {
    let mut m: Vec<Vec<Scalar>> = (0..n).map(|i| v[i * n..(i + 1) * n].to_vec()).collect();
    let mut det = Scalar::one();
    for k in 0..n {
        let Some(p) = (k..n).find(|&r| !m[r][k].is_zero()) else {
            return Scalar::zero();
        };
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        let pk = m[k][k].clone();
        det *= &pk;
        for r in k + 1..n {
            if m[r][k].is_zero() {
                continue;
            }
            let f = &m[r][k] / &pk;
            for j in k..n {
                let t = &f * &m[k][j];
                m[r][j] -= t;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{frac, int};

    fn a() -> Rat {
        Rat::delay(int(1), 1)
    }
    fn b() -> Rat {
        Rat::delay(int(2), 1)
    }

    #[test]
    fn identity_inverts_to_identity() {
        assert_eq!(RMat::identity(3).invert().unwrap(), RMat::identity(3));
    }

    #[test]
    fn example_one_inverse_is_lower_triangular() {
        // I - G1 with G21 = A, G32 = B
        let mut m = RMat::identity(3);
        m[(1, 0)] = -a();
        m[(2, 1)] = -b();
        let inv = m.invert().unwrap();
        assert_eq!(inv[(1, 0)], a());
        assert_eq!(inv[(2, 0)], Rat::delay(int(2), 2));
        assert_eq!(inv[(2, 1)], b());
        assert!(inv[(0, 1)].is_zero() && inv[(0, 2)].is_zero() && inv[(1, 2)].is_zero());
        assert_eq!(m.mul(&inv).unwrap(), RMat::identity(3));
    }

    #[test]
    fn two_by_two_closed_form() {
        let c = Rat::first_order(int(1), frac(1, 2));
        let d = Rat::constant(frac(3, 10));
        let m = RMat::from_rows(vec![vec![Rat::one(), -&c], vec![-&d, Rat::one()]]);
        let k = (&Rat::one() - &(&c * &d)).inv().unwrap();
        let want = RMat::from_rows(vec![vec![k.clone(), &k * &c], vec![&k * &d, k.clone()]]);
        assert_eq!(m.invert().unwrap(), want);
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = RMat::from_rows(vec![vec![a(), b()], vec![a(), b()]]);
        assert_eq!(m.invert(), Err(Error::Singular));
        assert!(m.determinant().unwrap().is_zero());
    }

    #[test]
    fn degree_cap_enforced() {
        let mut m = RMat::identity(3);
        m[(0, 1)] = Rat::first_order(int(1), frac(1, 3));
        m[(1, 2)] = Rat::first_order(int(1), frac(1, 5));
        m[(2, 0)] = Rat::first_order(int(1), frac(1, 7));
        assert!(matches!(
            m.invert_with_cap(1),
            Err(Error::DegreeOverflow { cap: 1, .. })
        ));
        assert!(m.invert().is_ok());
    }

    #[test]
    fn determinant_of_ti_from_s1() {
        // [[A, 1], [AB + 1, B]] has determinant AB - AB - 1 = -1
        let m = RMat::from_rows(vec![
            vec![a(), Rat::one()],
            vec![&(&a() * &b()) + &Rat::one(), b()],
        ]);
        assert_eq!(m.determinant().unwrap(), Rat::constant(int(-1)));
    }

    #[test]
    fn left_null_vector_annihilates() {
        let ap1 = &a() + &Rat::one();
        let m = RMat::from_rows(vec![vec![Rat::one(), Rat::zero()], vec![ap1, Rat::zero()]]);
        let x = m.left_null_vector().unwrap();
        let row = RMat::from_rows(vec![x]);
        assert!(row.mul(&m).unwrap().is_zero());
        assert!(!row.is_zero());
        assert_eq!(m.rank_exact(), 1);
        assert!(RMat::identity(2).left_null_vector().is_none());
    }

    #[test]
    fn scalar_determinant_matches() {
        let v = vec![int(2), int(1), int(1), int(3)];
        assert_eq!(scalar_determinant(2, &v), int(5));
    }
}
