//! Dense complex linear algebra.
//!
//! [`CMatrix`] is a small value-semantic row-major matrix. The heavy lifting
//! (Schur-based eigensolver, pivoted LU, SVD) is delegated to `faer`; this
//! module adds the conventions the rest of the crate depends on: biorthogonal
//! left eigenvectors, a pivot threshold for singularity, degeneracy flags and
//! `det` of the empty matrix being one.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use faer::prelude::Solve;
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative pivot threshold below which [`solve`] reports a singular matrix.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;
/// Relative eigenvalue gap below which a pair is flagged as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// Eigenvalue condition number above which an eigenvalue is flagged.
pub const CONDITION_LIMIT: f64 = 1e7;

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn scalar_identity(n: usize, s: C64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_row_major(nrows, ncols, rows.concat())
    }

    /// Convenience constructor from real rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[C64]) {
        assert_eq!(col.len(), self.rows);
        for (i, v) in col.iter().enumerate() {
            self[(i, j)] = *v;
        }
    }

    pub fn rows_to_vecs(&self) -> Vec<Vec<C64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Copies out the `nr x nc` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> CMatrix {
        assert!(
            r0 + nr <= self.rows && c0 + nc <= self.cols,
            "block out of range"
        );
        CMatrix::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &CMatrix) {
        assert!(
            r0 + b.rows <= self.rows && c0 + b.cols <= self.cols,
            "block out of range"
        );
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn add_block(&mut self, r0: usize, c0: usize, b: &CMatrix) {
        assert!(
            r0 + b.rows <= self.rows && c0 + b.cols <= self.cols,
            "block out of range"
        );
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] += b[(i, j)];
            }
        }
    }

    /// Assembles `[[a, b], [c, d]]` from four blocks.
    pub fn from_blocks(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> CMatrix {
        assert_eq!(a.rows, b.rows);
        assert_eq!(c.rows, d.rows);
        assert_eq!(a.cols, c.cols);
        assert_eq!(b.cols, d.cols);
        let mut m = CMatrix::zeros(a.rows + c.rows, a.cols + b.cols);
        m.set_block(0, 0, a);
        m.set_block(0, a.cols, b);
        m.set_block(a.rows, 0, c);
        m.set_block(a.rows, a.cols, d);
        m
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hstack(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, other.rows);
        let mut m = CMatrix::zeros(self.rows, self.cols + other.cols);
        m.set_block(0, 0, self);
        m.set_block(0, self.cols, other);
        m
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self^n` by binary exponentiation; fails if entries overflow.
    pub fn pow(&self, mut n: u32) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut result = CMatrix::identity(self.rows);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
            if !result.is_finite() || !base.is_finite() {
                return Err(Error::Overflow);
            }
        }
        Ok(result)
    }

    pub(crate) fn to_faer(&self) -> Mat<C64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }

    pub(crate) fn from_faer(m: faer::MatRef<'_, C64>) -> CMatrix {
        CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:>11.4e}{:+.4e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch in add"
        );
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch in sub"
        );
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "shape mismatch in mul");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

/// Eigenvalues with right eigenvectors and biorthogonal left eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    /// Columns are right eigenvectors.
    pub right_vectors: CMatrix,
    /// Columns are left eigenvectors, scaled so `left_i^* right_j = delta_ij`.
    pub left_vectors: CMatrix,
    /// Eigenvalue condition numbers `|left_i| |right_i|`.
    pub condition_numbers: Vec<f64>,
    /// Set for eigenvalues in a near-degenerate pair or with a huge condition number.
    pub condition_flags: Vec<bool>,
}

impl EigenDecomposition {
    pub fn any_flagged(&self) -> bool {
        self.condition_flags.iter().any(|&f| f)
    }
}

fn require_square(m: &CMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NonSquare {
            rows: m.rows,
            cols: m.cols,
        })
    }
}

/// Full eigendecomposition. Eigenvalues come back in backend order.
pub fn eigenpairs(m: &CMatrix) -> Result<EigenDecomposition> {
    require_square(m)?;
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = m.rows;
    if n == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            right_vectors: CMatrix::zeros(0, 0),
            left_vectors: CMatrix::zeros(0, 0),
            condition_numbers: vec![],
            condition_flags: vec![],
        });
    }
    let evd = m.to_faer().eigen().map_err(|_| Error::ConvergenceFailure)?;
    let s = evd.S().column_vector();
    let values: Vec<C64> = (0..n).map(|i| s[i]).collect();
    let right = CMatrix::from_faer(evd.U());
    if !right.is_finite()
        || values
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::ConvergenceFailure);
    }
    // Rows of right^{-1} are the conjugated left eigenvectors.
    let inv = CMatrix::from_faer(
        right
            .to_faer()
            .partial_piv_lu()
            .solve(Mat::<C64>::identity(n, n))
            .as_ref(),
    );
    let left = inv.adjoint();

    let max_abs = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let gap_tol = DEGENERACY_TOL * (1.0 + max_abs);
    let mut condition_numbers = Vec::with_capacity(n);
    let mut flags = vec![false; n];
    for i in 0..n {
        let rn: f64 = right
            .column(i)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        let ln: f64 = left
            .column(i)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        let kappa = if left.is_finite() {
            rn * ln
        } else {
            f64::INFINITY
        };
        condition_numbers.push(kappa);
        if kappa > CONDITION_LIMIT {
            flags[i] = true;
        }
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() < gap_tol {
                flags[i] = true;
                flags[j] = true;
            }
        }
    }
    Ok(EigenDecomposition {
        values,
        right_vectors: right,
        left_vectors: left,
        condition_numbers,
        condition_flags: flags,
    })
}

/// Eigenvalues only.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    require_square(m)?;
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    if m.rows == 0 {
        return Ok(vec![]);
    }
    m.to_faer()
        .eigenvalues()
        .map_err(|_| Error::ConvergenceFailure)
}

/// Determinant via pivoted LU; the empty matrix has determinant one.
pub fn determinant(m: &CMatrix) -> Result<C64> {
    require_square(m)?;
    Ok(match m.rows {
        0 => C64::new(1.0, 0.0),
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.to_faer().determinant(),
    })
}

/// Solves `m x = rhs`, rejecting matrices whose smallest LU pivot falls
/// below `1e-12 * |m|_inf`.
pub fn solve(m: &CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    require_square(m)?;
    if rhs.rows != m.rows {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} rows, matrix has {}",
            rhs.rows, m.rows
        )));
    }
    if m.rows == 0 {
        return Ok(rhs.clone());
    }
    let threshold = SINGULAR_PIVOT_TOL * m.norm_inf();
    let lu = m.to_faer().partial_piv_lu();
    let u = lu.U();
    let pivot = (0..m.rows)
        .map(|i| u[(i, i)].norm())
        .fold(f64::INFINITY, f64::min);
    if pivot.is_nan() || pivot <= threshold {
        return Err(Error::SingularMatrix { pivot, threshold });
    }
    Ok(CMatrix::from_faer(lu.solve(rhs.to_faer()).as_ref()))
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    solve(m, &CMatrix::identity(m.rows))
}

/// Singular values in non-increasing order.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    if m.rows == 0 || m.cols == 0 {
        return Ok(vec![]);
    }
    let mut s = m
        .to_faer()
        .singular_values()
        .map_err(|_| Error::ConvergenceFailure)?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > rel_tol * smax).count())
}

/// Picks `p` columns spanning the range of `m` by Gram-Schmidt with column
/// pivoting and returns them orthonormalized (`rows x p`).
pub fn range_basis(m: &CMatrix, p: usize) -> CMatrix {
    let n = m.rows;
    let mut work: Vec<Vec<C64>> = (0..m.cols).map(|j| m.column(j)).collect();
    let mut basis = CMatrix::zeros(n, p);
    let mut used = vec![false; m.cols];
    for k in 0..p {
        let (best, _) = work
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, c)| (j, c.iter().map(|z| z.norm_sqr()).sum::<f64>()))
            .fold(
                (usize::MAX, -1.0),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        if best == usize::MAX {
            break;
        }
        used[best] = true;
        let norm = work[best].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let q: Vec<C64> = work[best].iter().map(|z| z / norm).collect();
        for (j, col) in work.iter_mut().enumerate() {
            if used[j] {
                continue;
            }
            let dot: C64 = q.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
            for (c, qi) in col.iter_mut().zip(&q) {
                *c -= dot * qi;
            }
        }
        basis.set_column(k, &q);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sorted_by_im(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        v
    }

    #[test]
    fn rotation_eigenvalues() {
        let m = CMatrix::from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
        let e = eigenpairs(&m).unwrap();
        let v = sorted_by_im(e.values.clone());
        assert!((v[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((v[1] - c(0.0, 1.0)).norm() < 1e-14);
        assert!((determinant(&m).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn diagonal_eigenpairs_are_standard_basis() {
        let m = CMatrix::diag(&[c(3.0, 0.0), c(5.0, 0.0)]);
        let e = eigenpairs(&m).unwrap();
        for i in 0..2 {
            let k = if (e.values[i] - c(3.0, 0.0)).norm() < 1e-12 {
                0
            } else {
                1
            };
            let r = e.right_vectors.column(i);
            let l = e.left_vectors.column(i);
            assert!(r[1 - k].norm() < 1e-14 && r[k].norm() > 0.5);
            assert!(l[1 - k].norm() < 1e-14);
            assert!((l[k].conj() * r[k] - c(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn determinant_examples() {
        let m = CMatrix::from_real_rows(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]])
            .unwrap();
        assert!((determinant(&m).unwrap() - c(2.0, 0.0)).norm() < 1e-14);
        for n in [0, 1, 4, 7] {
            assert!((determinant(&CMatrix::identity(n)).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        }
        assert!(matches!(
            determinant(&CMatrix::zeros(2, 3)),
            Err(Error::NonSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn solve_examples() {
        let rhs = CMatrix::from_fn(3, 2, |i, j| c(i as f64, j as f64 + 1.0));
        assert_eq!(solve(&CMatrix::identity(3), &rhs).unwrap(), rhs);
        let two = CMatrix::scalar_identity(2, c(2.0, 0.0));
        let inv = solve(&two, &CMatrix::identity(2)).unwrap();
        assert_eq!(inv, CMatrix::scalar_identity(2, c(0.5, 0.0)));
        let sing = CMatrix::diag(&[c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            solve(&sing, &CMatrix::identity(2)),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let r = CMatrix::from_row_major(1, 1, vec![c(f64::NAN, 0.0)]);
        assert_eq!(r.unwrap_err(), Error::NonFinite);
        assert!(CMatrix::from_row_major(2, 2, vec![c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn degenerate_pair_is_flagged() {
        // Jordan block: eigenvalue 1 twice, one eigenvector.
        let m = CMatrix::from_real_rows(&[&[2.0, -1.0], &[1.0, 0.0]]).unwrap();
        let e = eigenpairs(&m).unwrap();
        assert!(e.condition_flags.iter().all(|&f| f));
    }

    #[test]
    fn power_and_rank() {
        let m = CMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        let p = m.pow(5).unwrap();
        assert_eq!(p[(0, 1)], c(5.0, 0.0));
        assert_eq!(numerical_rank(&m, 1e-10).unwrap(), 2);
        let r1 = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert_eq!(numerical_rank(&r1, 1e-10).unwrap(), 1);
        assert_eq!(numerical_rank(&CMatrix::zeros(3, 3), 1e-10).unwrap(), 0);
    }

    #[test]
    fn range_basis_spans_projection() {
        let p = CMatrix::diag(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let b = range_basis(&p, 1);
        assert_eq!(b.column(0), vec![c(1.0, 0.0), c(0.0, 0.0)]);
    }
}
