//! Block tridiagonal operators with corner perturbations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{self, CMatrix, C64};
use crate::parallel::{map_indexed, Parallelism};

/// Relative singular-value cutoff used for the rank of `A`.
pub const RANK_TOL: f64 = 1e-10;

/// Bulk blocks `(R, T, V)`: sub-diagonal, super-diagonal and diagonal.
#[derive(Debug, Clone)]
pub struct CoefficientTriple {
    r: CMatrix,
    t: CMatrix,
    v: CMatrix,
    t_inv: CMatrix,
    det_r: C64,
    det_t: C64,
}

impl CoefficientTriple {
    pub fn new(r: CMatrix, t: CMatrix, v: CMatrix) -> Result<Self> {
        let l = r.rows();
        for m in [&r, &t, &v] {
            if !m.is_square() {
                return Err(Error::NonSquare {
                    rows: m.rows(),
                    cols: m.cols(),
                });
            }
            if m.rows() != l {
                return Err(Error::DimensionMismatch(
                    "R, T, V must share the block size".into(),
                ));
            }
        }
        if l == 0 {
            return Err(Error::InvalidSize("block size L must be at least 1".into()));
        }
        numkernel::inverse(&r)?;
        let t_inv = numkernel::inverse(&t)?;
        let det_r = numkernel::determinant(&r)?;
        let det_t = numkernel::determinant(&t)?;
        Ok(Self {
            r,
            t,
            v,
            t_inv,
            det_r,
            det_t,
        })
    }

    /// Scalar model `R = r, T = t, V = v` with `L = 1`.
    pub fn scalar(r: C64, t: C64, v: C64) -> Result<Self> {
        Self::new(
            CMatrix::diag(&[r]),
            CMatrix::diag(&[t]),
            CMatrix::diag(&[v]),
        )
    }

    pub fn dim(&self) -> usize {
        self.r.rows()
    }

    pub fn r(&self) -> &CMatrix {
        &self.r
    }

    pub fn t(&self) -> &CMatrix {
        &self.t
    }

    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    pub fn t_inv(&self) -> &CMatrix {
        &self.t_inv
    }

    pub fn det_r(&self) -> C64 {
        self.det_r
    }

    pub fn det_t(&self) -> C64 {
        self.det_t
    }

    /// The reversed symbol `T/z + V + R z`, i.e. `R` and `T` swapped.
    pub fn reversed(&self) -> Result<Self> {
        Self::new(self.t.clone(), self.r.clone(), self.v.clone())
    }

    /// Whether `H_N(R, T, V)` commutes with its adjoint for large `N`.
    pub fn is_normal_symbol(&self) -> bool {
        let tol = 1e-12 * (1.0 + self.r.norm_fro() + self.t.norm_fro() + self.v.norm_fro());
        let r_star = self.r.adjoint();
        (&self.t - &r_star).norm_fro() < tol && (&self.v - &self.v.adjoint()).norm_fro() < tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCase {
    Circulant,
    Open,
    Boundary,
    Perturbed,
    Custom,
}

/// Corner blocks `(A, B, C)`: top-right, bottom-left, top-left.
#[derive(Debug, Clone)]
pub struct BoundaryTriple {
    a: CMatrix,
    b: CMatrix,
    c: CMatrix,
    rank_a: usize,
    b_inv: Option<CMatrix>,
    det_b: C64,
    case: BoundaryCase,
}

impl BoundaryTriple {
    /// General corner data. `B` may be singular, in which case the
    /// perturbed-case formulas refuse to run.
    pub fn new(a: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        let l = a.rows();
        for m in [&a, &b, &c] {
            if !m.is_square() {
                return Err(Error::NonSquare {
                    rows: m.rows(),
                    cols: m.cols(),
                });
            }
            if m.rows() != l {
                return Err(Error::DimensionMismatch(
                    "A, B, C must share the block size".into(),
                ));
            }
        }
        let rank_a = numkernel::numerical_rank(&a, RANK_TOL)?;
        let b_inv = numkernel::inverse(&b).ok();
        let det_b = numkernel::determinant(&b)?;
        Ok(Self {
            a,
            b,
            c,
            rank_a,
            b_inv,
            det_b,
            case: BoundaryCase::Custom,
        })
    }

    /// `(A, B, C) = (R, T, V)`: periodic boundary conditions.
    pub fn circulant(coeffs: &CoefficientTriple) -> Self {
        let mut bt = Self::new(coeffs.r.clone(), coeffs.t.clone(), coeffs.v.clone())
            .expect("bulk blocks are valid corner blocks");
        bt.case = BoundaryCase::Circulant;
        bt
    }

    /// `A = B = 0, C = V`.
    pub fn open(coeffs: &CoefficientTriple) -> Self {
        let mut bt = Self::boundary(coeffs.v.clone());
        bt.case = BoundaryCase::Open;
        bt
    }

    /// `A = B = 0` with a boundary block `C`.
    pub fn boundary(c: CMatrix) -> Self {
        let l = c.rows();
        let mut bt = Self::new(CMatrix::zeros(l, l), CMatrix::zeros(l, l), c)
            .expect("zero corners are valid");
        bt.case = BoundaryCase::Boundary;
        bt
    }

    /// Invertible `B`, arbitrary `A` and `C`.
    pub fn perturbed(a: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        let mut bt = Self::new(a, b, c)?;
        if bt.b_inv.is_none() {
            numkernel::inverse(&bt.b)?;
        }
        bt.case = BoundaryCase::Perturbed;
        Ok(bt)
    }

    /// Replaces the computed rank of `A` with a caller-supplied value.
    pub fn with_rank_override(mut self, rank: usize) -> Result<Self> {
        if rank > self.a.rows() {
            return Err(Error::InvalidSize(format!(
                "rank {rank} exceeds block size"
            )));
        }
        self.rank_a = rank;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    pub fn c(&self) -> &CMatrix {
        &self.c
    }

    pub fn rank_a(&self) -> usize {
        self.rank_a
    }

    pub fn det_b(&self) -> C64 {
        self.det_b
    }

    pub fn case(&self) -> BoundaryCase {
        self.case
    }

    pub fn b_inv(&self) -> Result<&CMatrix> {
        match &self.b_inv {
            Some(m) => Ok(m),
            None => Err(Error::SingularMatrix {
                pivot: 0.0,
                threshold: 0.0,
            }),
        }
    }

    pub fn corners_vanish(&self) -> bool {
        self.a.max_abs() == 0.0 && self.b.max_abs() == 0.0
    }

    /// Whether the entries are consistent with `tag`.
    pub fn consistent_with(&self, coeffs: &CoefficientTriple, tag: BoundaryCase) -> bool {
        let same = |x: &CMatrix, y: &CMatrix| (x - y).max_abs() <= 1e-14 * (1.0 + y.max_abs());
        match tag {
            BoundaryCase::Circulant => {
                same(&self.a, &coeffs.r) && same(&self.b, &coeffs.t) && same(&self.c, &coeffs.v)
            }
            BoundaryCase::Open => self.corners_vanish() && same(&self.c, &coeffs.v),
            BoundaryCase::Boundary => self.corners_vanish(),
            BoundaryCase::Perturbed => self.b_inv.is_some(),
            BoundaryCase::Custom => true,
        }
    }
}

/// Eigenvalues of a finite operator, with multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMultiset {
    pub eigenvalues: Vec<C64>,
}

impl SpectrumMultiset {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Matching distance to another multiset; `None` if sizes differ.
    pub fn distance(&self, other: &SpectrumMultiset) -> Option<f64> {
        crate::matching::multiset_distance(&self.eigenvalues, &other.eigenvalues)
    }
}

/// `H(z) = R/z + V + T z`.
pub fn eval_symbol(coeffs: &CoefficientTriple, z: C64) -> Result<CMatrix> {
    if z.norm() == 0.0 {
        return Err(Error::ZeroArgument);
    }
    let inv = z.inv();
    let l = coeffs.dim();
    Ok(CMatrix::from_fn(l, l, |i, j| {
        coeffs.r[(i, j)] * inv + coeffs.v[(i, j)] + coeffs.t[(i, j)] * z
    }))
}

/// Assembles `H_N(A, B, C)` as an `NL x NL` dense matrix.
///
/// `N = 2` is accepted only when the corners vanish, since otherwise the
/// corner blocks would overlap the band.
pub fn assemble_operator(
    coeffs: &CoefficientTriple,
    boundary: &BoundaryTriple,
    n: usize,
) -> Result<CMatrix> {
    let l = coeffs.dim();
    if boundary.dim() != l {
        return Err(Error::DimensionMismatch(
            "boundary and bulk block sizes differ".into(),
        ));
    }
    if n < 2 || (n == 2 && !boundary.corners_vanish()) {
        return Err(Error::InvalidSize(format!(
            "N = {n} is too small for this boundary"
        )));
    }
    let mut h = CMatrix::zeros(n * l, n * l);
    for k in 0..n {
        let d = if k == 0 { &boundary.c } else { &coeffs.v };
        h.set_block(k * l, k * l, d);
        if k + 1 < n {
            h.set_block(k * l, (k + 1) * l, &coeffs.t);
            h.set_block((k + 1) * l, k * l, &coeffs.r);
        }
    }
    h.add_block(0, (n - 1) * l, &boundary.a);
    h.add_block((n - 1) * l, 0, &boundary.b);
    Ok(h)
}

/// Dense eigenvalues of an assembled operator.
pub fn finite_spectrum(m: &CMatrix) -> Result<SpectrumMultiset> {
    Ok(SpectrumMultiset {
        eigenvalues: numkernel::eigenvalues(m)?,
    })
}

/// Spectrum of the circulant `H_N(R, T, V)` as the union of the spectra of
/// `H(e^{2 pi i n / N})`, `n = 1..N`.
pub fn circulant_spectrum_fft(
    coeffs: &CoefficientTriple,
    n: usize,
    mode: Parallelism,
) -> Result<SpectrumMultiset> {
    if n == 0 {
        return Err(Error::InvalidSize("N must be positive".into()));
    }
    let blocks = map_indexed(n, mode, |k| {
        let z = C64::from_polar(1.0, 2.0 * PI * (k + 1) as f64 / n as f64);
        eval_symbol(coeffs, z).and_then(|h| numkernel::eigenvalues(&h))
    });
    let mut eigenvalues = Vec::with_capacity(n * coeffs.dim());
    for b in blocks {
        eigenvalues.extend(b?);
    }
    Ok(SpectrumMultiset { eigenvalues })
}

/// `det(H(e^{i theta}) - E)`.
pub fn symbol_determinant(coeffs: &CoefficientTriple, theta: f64, e: C64) -> C64 {
    let z = C64::from_polar(1.0, theta);
    let mut h = eval_symbol(coeffs, z).expect("unit-circle argument is nonzero");
    for i in 0..coeffs.dim() {
        h[(i, i)] -= e;
    }
    numkernel::determinant(&h).expect("square")
}

const WINDING_START: usize = 512;
const WINDING_CAP: usize = 1 << 16;

fn winding_pass(coeffs: &CoefficientTriple, e: C64, samples: usize) -> (f64, f64, f64, f64) {
    let vals: Vec<C64> = (0..=samples)
        .map(|k| symbol_determinant(coeffs, 2.0 * PI * k as f64 / samples as f64, e))
        .collect();
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for w in vals.windows(2) {
        let step = (w[1] / w[0]).arg();
        max_step = max_step.max(step.abs());
        total += step;
    }
    let max_abs = vals.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let min_abs = vals.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    (total / (2.0 * PI), max_step, min_abs, max_abs)
}

/// Winding number of `theta -> det(H(e^{i theta}) - E)` around zero.
///
/// The sample count is doubled (starting from `max(samples, 512)`, capped at
/// 2^16) until the rounded winding is stable and every phase increment is
/// small.
pub fn winding_number(coeffs: &CoefficientTriple, e: C64, samples: usize) -> Result<i64> {
    let on_curve = Error::OnCurve { re: e.re, im: e.im };
    if samples < 256 {
        return Err(Error::InvalidSize(
            "winding needs at least 256 samples".into(),
        ));
    }
    let mut n = samples.max(WINDING_START);
    let mut previous: Option<i64> = None;
    while n <= WINDING_CAP {
        let (w, max_step, min_abs, max_abs) = winding_pass(coeffs, e, n);
        if min_abs.is_nan() || min_abs <= 1e-10 * max_abs {
            return Err(on_curve);
        }
        let rounded = w.round();
        let clean = (w - rounded).abs() < 0.1 && max_step < PI / 2.0;
        if clean {
            let k = rounded as i64;
            if previous == Some(k) {
                return Ok(k);
            }
            previous = Some(k);
        } else {
            previous = None;
        }
        n *= 2;
    }
    Err(on_curve)
}

/// `det(H_N - E)` by dense determinant.
pub fn charpoly_direct(
    coeffs: &CoefficientTriple,
    boundary: &BoundaryTriple,
    n: usize,
    e: C64,
) -> Result<C64> {
    let mut h = assemble_operator(coeffs, boundary, n)?;
    for i in 0..h.rows() {
        h[(i, i)] -= e;
    }
    numkernel::determinant(&h)
}

/// Residual of the transfer-matrix form of `H_N phi = E phi`:
/// `(B phi_1, phi_N) = T^{N-1} [[E - C, -A], [1, 0]] (phi_1, phi_N)`,
/// together with the site-by-site recursion. Returns the larger of the two
/// residual norms.
pub fn transfer_recursion_residual(
    coeffs: &CoefficientTriple,
    boundary: &BoundaryTriple,
    e: C64,
    phi: &[C64],
) -> Result<f64> {
    let l = coeffs.dim();
    if !phi.len().is_multiple_of(l) || phi.len() < 2 * l {
        return Err(Error::DimensionMismatch(
            "eigenvector length must be N*L with N >= 2".into(),
        ));
    }
    let n = phi.len() / l;
    let site = |k: usize| phi[k * l..(k + 1) * l].to_vec();
    let stack = |x: Vec<C64>, y: Vec<C64>| [x, y].concat();
    let tm = crate::transfer::transfer_matrix(coeffs, e)?;

    let mut edge = CMatrix::zeros(2 * l, 2 * l);
    let mut e_minus_c = -&boundary.c;
    for i in 0..l {
        e_minus_c[(i, i)] += e;
    }
    edge.set_block(0, 0, &e_minus_c);
    edge.set_block(0, l, &-&boundary.a);
    edge.set_block(l, 0, &CMatrix::identity(l));

    let mut state = edge.mul_vec(&stack(site(0), site(n - 1)));
    let mut stepwise: f64 = 0.0;
    // (T phi_2, phi_1) from the boundary equation.
    let first = stack(coeffs.t.mul_vec(&site(1)), site(0));
    stepwise = stepwise.max(dist(&state, &first));
    for k in 1..n {
        state = tm.mul_vec(&state);
        let expect = if k + 1 < n {
            stack(coeffs.t.mul_vec(&site(k + 1)), site(k))
        } else {
            stack(boundary.b.mul_vec(&site(0)), site(n - 1))
        };
        // Restart from the exact local pair so local and global errors are
        // both reported.
        let local = tm.mul_vec(&if k == 1 {
            first.clone()
        } else {
            stack(coeffs.t.mul_vec(&site(k)), site(k - 1))
        });
        stepwise = stepwise.max(dist(&local, &expect));
        if k + 1 == n {
            stepwise = stepwise.max(dist(&state, &expect));
        }
    }
    Ok(stepwise)
}

fn dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn laplace() -> CoefficientTriple {
        CoefficientTriple::scalar(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap()
    }

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn symbol_scalar() {
        let m = laplace();
        let th: f64 = 0.7;
        let h = eval_symbol(&m, C64::from_polar(1.0, th)).unwrap();
        assert!((h[(0, 0)] - c(2.0 * th.cos(), 0.0)).norm() < 1e-15);
        assert_eq!(
            eval_symbol(&m, c(0.0, 0.0)).unwrap_err(),
            Error::ZeroArgument
        );
        let app = CoefficientTriple::scalar(c(1.0, 0.0), c(2.0, 0.0), c(7.0, 0.0)).unwrap();
        assert_eq!(
            eval_symbol(&app, c(1.0, 0.0)).unwrap()[(0, 0)],
            c(10.0, 0.0)
        );
    }

    #[test]
    fn assembly_scalar() {
        let m = laplace();
        let circ = assemble_operator(&m, &BoundaryTriple::circulant(&m), 3).unwrap();
        let want = CMatrix::from_real_rows(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]])
            .unwrap();
        assert_eq!(circ, want);
        let open = assemble_operator(&m, &BoundaryTriple::open(&m), 3).unwrap();
        let want = CMatrix::from_real_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]])
            .unwrap();
        assert_eq!(open, want);
        assert!(assemble_operator(&m, &BoundaryTriple::circulant(&m), 2).is_err());
    }

    #[test]
    fn small_spectra() {
        let m = laplace();
        let circ = assemble_operator(&m, &BoundaryTriple::circulant(&m), 3).unwrap();
        let s = sorted(finite_spectrum(&circ).unwrap().eigenvalues);
        for (got, want) in s.iter().zip([-1.0, -1.0, 2.0]) {
            assert!((got - c(want, 0.0)).norm() < 1e-12);
        }
        let open2 = assemble_operator(&m, &BoundaryTriple::open(&m), 2).unwrap();
        let s = sorted(finite_spectrum(&open2).unwrap().eigenvalues);
        assert!((s[0] + 1.0).norm() < 1e-14 && (s[1] - 1.0).norm() < 1e-14);
        let fft = circulant_spectrum_fft(&m, 3, Parallelism::Sequential).unwrap();
        let dense = finite_spectrum(&circ).unwrap();
        assert!(fft.distance(&dense).unwrap() < 1e-12);
    }

    #[test]
    fn fft_closed_form() {
        let app = CoefficientTriple::scalar(c(1.0, 0.0), c(2.0, 0.0), c(7.0, 0.0)).unwrap();
        let s = circulant_spectrum_fft(&app, 4, Parallelism::Parallel).unwrap();
        let want = SpectrumMultiset {
            eigenvalues: vec![c(10.0, 0.0), c(4.0, 0.0), c(7.0, 1.0), c(7.0, -1.0)],
        };
        assert!(s.distance(&want).unwrap() < 1e-12);
    }

    #[test]
    fn winding_examples() {
        let m = laplace();
        assert_eq!(winding_number(&m, c(3.0, 0.0), 256).unwrap(), 0);
        assert!(matches!(
            winding_number(&m, c(0.0, 0.0), 256),
            Err(Error::OnCurve { .. })
        ));
        // R = 1, T = 2: both roots of 2z^2 + 1 lie in the unit disk.
        let m2 = CoefficientTriple::scalar(c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_eq!(winding_number(&m2, c(0.0, 0.0), 256).unwrap(), 1);
        assert_eq!(winding_number(&m2, c(100.0, 0.0), 256).unwrap(), 0);
    }

    #[test]
    fn charpoly_examples() {
        let m = laplace();
        let circ = BoundaryTriple::circulant(&m);
        assert!((charpoly_direct(&m, &circ, 3, c(0.0, 0.0)).unwrap() - c(2.0, 0.0)).norm() < 1e-14);
        let open = BoundaryTriple::open(&m);
        assert!((charpoly_direct(&m, &open, 2, c(0.0, 0.0)).unwrap() + 1.0).norm() < 1e-14);
        let big = c(1e3, 2e2);
        let p = charpoly_direct(&m, &circ, 5, big).unwrap();
        let lead = -big.powu(5);
        assert!((p / lead - 1.0).norm() < 1e-4);
    }

    #[test]
    fn case_tags() {
        let m = laplace();
        assert!(BoundaryTriple::circulant(&m).consistent_with(&m, BoundaryCase::Circulant));
        assert!(BoundaryTriple::open(&m).consistent_with(&m, BoundaryCase::Open));
        assert!(!BoundaryTriple::open(&m).consistent_with(&m, BoundaryCase::Perturbed));
        assert_eq!(BoundaryTriple::circulant(&m).rank_a(), 1);
        assert_eq!(BoundaryTriple::open(&m).rank_a(), 0);
    }
}
