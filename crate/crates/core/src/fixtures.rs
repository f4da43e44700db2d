//! Reference models used by tests, benches and the CLI configs.

use crate::numkernel::{CMatrix, C64};
use crate::operators::{BoundaryTriple, CoefficientTriple};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn m2(rows: [[C64; 2]; 2]) -> CMatrix {
    CMatrix::from_rows(&[rows[0].to_vec(), rows[1].to_vec()]).expect("2x2 literal")
}

/// The `L = 2` example model `(R, T, V)`.
pub fn example_coefficients() -> CoefficientTriple {
    let r = m2([[c(0.0, 0.3), c(0.7, 0.0)], [c(0.0, 0.0), c(0.0, 0.3)]]);
    let t = m2([[c(1.5, 0.0), c(0.0, 0.0)], [c(0.0, -0.6), c(1.5, 0.0)]]);
    let v = m2([[c(0.3, -0.3), c(0.0, -0.5)], [c(1.0, 0.0), c(-0.3, -0.3)]]);
    CoefficientTriple::new(r, t, v).expect("example blocks are invertible")
}

/// The reversed symbol of [`example_coefficients`] (`R` and `T` swapped).
pub fn example_reversed() -> CoefficientTriple {
    example_coefficients()
        .reversed()
        .expect("example blocks are invertible")
}

pub fn example_a() -> CMatrix {
    m2([[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]])
}

pub fn example_b() -> CMatrix {
    CMatrix::diag(&[c(1.0, 0.0), c(0.2, 1.0)])
}

pub fn example_c() -> CMatrix {
    m2([[c(0.1, 0.0), c(-0.3, 0.0)], [c(1.0, 0.0), c(0.0, 2.0)]])
}

/// `(A, B, V)` for the example model: rank-one `A`, invertible `B`.
pub fn example_perturbation() -> BoundaryTriple {
    let v = example_coefficients().v().clone();
    BoundaryTriple::perturbed(example_a(), example_b(), v).expect("B is invertible")
}

/// `(0, 0, C)` for the example model.
pub fn example_open_boundary() -> BoundaryTriple {
    BoundaryTriple::boundary(example_c())
}

/// `R = T = 1, V = 0`.
pub fn laplacian() -> CoefficientTriple {
    CoefficientTriple::scalar(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).expect("nonzero")
}

/// `R = 1, V = diag(7, 14, ..., 7L), T = 2`, whose circulant spectrum is
/// `{ e^{-2 pi i k/N} + 7j + 2 e^{2 pi i k/N} }`.
pub fn diagonal_shift(l: usize) -> CoefficientTriple {
    let v: Vec<C64> = (1..=l).map(|j| c(7.0 * j as f64, 0.0)).collect();
    CoefficientTriple::new(
        CMatrix::identity(l),
        CMatrix::scalar_identity(l, c(2.0, 0.0)),
        CMatrix::diag(&v),
    )
    .expect("diagonal blocks are invertible")
}

/// Closed-form circulant spectrum of [`diagonal_shift`].
pub fn diagonal_shift_spectrum(l: usize, n: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(l * n);
    for k in 1..=n {
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
        for j in 1..=l {
            out.push(w.inv() + 7.0 * j as f64 + w * 2.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{assemble_operator, eval_symbol};

    #[test]
    fn example_symbol_at_one() {
        let m = example_coefficients();
        let h = eval_symbol(&m, c(1.0, 0.0)).unwrap();
        let sum = &(m.r() + m.v()) + m.t();
        assert_eq!(h, sum);
        assert!((m.det_r() - c(0.0, 0.3) * c(0.0, 0.3)).norm() < 1e-15);
        assert!((m.det_t() - c(2.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn example_assembly_corners() {
        let m = example_coefficients();
        let b = example_perturbation();
        assert_eq!(b.rank_a(), 1);
        let h = assemble_operator(&m, &b, 55).unwrap();
        assert_eq!(h.rows(), 110);
        assert_eq!(h.block(0, 108, 2, 2), example_a());
        assert_eq!(h.block(108, 0, 2, 2), example_b());
        assert_eq!(h.block(0, 0, 2, 2), *m.v());
    }
}
