//! `Z_I` factors, the q-functions and the Widom-type expansions of
//! `det(H_N - E)`.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkernel::{self, CMatrix, C64};
use crate::operators::{BoundaryTriple, CoefficientTriple};
use crate::transfer::{
    self, boundary_transfer_matrix, check_split, riesz_projection, IndexSet, TieSplit,
    TransferSpectrum,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QKind {
    QTilde,
    QHat,
    QPerturbed,
}

/// One q-function value; `value` is `None` when the energy sits in a
/// degeneracy band of the transfer matrix.
#[derive(Debug, Clone, Serialize)]
pub struct QEvaluation {
    pub energy: C64,
    pub set: IndexSet,
    pub kind: QKind,
    pub value: Option<C64>,
}

impl QEvaluation {
    pub fn valid(&self) -> bool {
        self.value.is_some()
    }
}

/// `Z_I = (-1)^L det(T) prod_{j in I} z_j`.
pub fn z_factor(spec: &TransferSpectrum, set: &IndexSet, det_t: C64) -> C64 {
    let sign = if spec.block_dim().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let prod: C64 = set.members().iter().map(|&j| spec.z(j)).product();
    det_t * sign * prod
}

/// Runs the split check, mapping degenerate clusters to an invalid value and
/// tie violations to an error.
fn projection_or_invalid(
    spec: &TransferSpectrum,
    set: &IndexSet,
    ties: TieSplit,
) -> Result<Option<CMatrix>> {
    match check_split(spec, set, TieSplit::Allow) {
        Err(Error::DegenerateSplit) => return Ok(None),
        Err(e) => return Err(e),
        Ok(()) => {}
    }
    riesz_projection(spec, set, ties).map(Some)
}

/// `det_L` of the lower-left block of `R_I`.
pub fn q_tilde(spec: &TransferSpectrum, set: &IndexSet) -> Result<QEvaluation> {
    let l = spec.block_dim();
    let value = match projection_or_invalid(spec, set, TieSplit::Forbid)? {
        Some(p) => Some(numkernel::determinant(&p.block(l, 0, l, l))?),
        None => None,
    };
    Ok(QEvaluation {
        energy: spec.energy,
        set: *set,
        kind: QKind::QTilde,
        value,
    })
}

/// Transfer-matrix products inserted on both sides of the projection in
/// `q_hat`. Each list holds the factors in application order, so the product
/// is `list[K-1] ... list[0]`.
#[derive(Debug, Clone, Default)]
pub struct TransferWindow {
    pub right: Vec<CMatrix>,
    pub left: Vec<CMatrix>,
}

fn ordered_product(list: &[CMatrix], dim: usize) -> CMatrix {
    list.iter().fold(CMatrix::identity(dim), |acc, m| m * &acc)
}

/// `det_L([0 1] W_ri R_I W_le [[E - C, -1], [1, 0]] [1 0]^T)`.
pub fn q_hat(
    spec: &TransferSpectrum,
    c: &CMatrix,
    e: C64,
    set: &IndexSet,
    window: Option<&TransferWindow>,
) -> Result<QEvaluation> {
    q_hat_with(spec, c, e, set, window, TieSplit::Forbid)
}

pub fn q_hat_with(
    spec: &TransferSpectrum,
    c: &CMatrix,
    e: C64,
    set: &IndexSet,
    window: Option<&TransferWindow>,
    ties: TieSplit,
) -> Result<QEvaluation> {
    let l = spec.block_dim();
    if c.rows() != l || c.cols() != l {
        return Err(Error::DimensionMismatch("C must be L x L".into()));
    }
    let value = match projection_or_invalid(spec, set, ties)? {
        Some(mut p) => {
            if let Some(w) = window {
                p = &(&ordered_product(&w.right, 2 * l) * &p) * &ordered_product(&w.left, 2 * l);
            }
            let mut edge = CMatrix::zeros(2 * l, l);
            let mut e_minus_c = -c;
            for i in 0..l {
                e_minus_c[(i, i)] += e;
            }
            edge.set_block(0, 0, &e_minus_c);
            edge.set_block(l, 0, &CMatrix::identity(l));
            let m = &p * &edge;
            Some(numkernel::determinant(&m.block(l, 0, l, l))?)
        }
        None => None,
    };
    Ok(QEvaluation {
        energy: e,
        set: *set,
        kind: QKind::QHat,
        value,
    })
}

/// `q_I = det_{2L}(R_I T_bd - R_{I^c})`, exactly zero when `|I| > L + rank A`.
pub fn q_perturbed(
    spec: &TransferSpectrum,
    boundary: &BoundaryTriple,
    e: C64,
    set: &IndexSet,
) -> Result<QEvaluation> {
    let tbd = boundary_transfer_matrix(boundary, e)?;
    q_perturbed_with(spec, &tbd, boundary.rank_a(), e, set)
}

/// As [`q_perturbed`] with a precomputed boundary transfer matrix.
pub fn q_perturbed_with(
    spec: &TransferSpectrum,
    tbd: &CMatrix,
    rank_a: usize,
    e: C64,
    set: &IndexSet,
) -> Result<QEvaluation> {
    let l = spec.block_dim();
    let kind = QKind::QPerturbed;
    if set.len() > l + rank_a {
        return Ok(QEvaluation {
            energy: e,
            set: *set,
            kind,
            value: Some(C64::new(0.0, 0.0)),
        });
    }
    let value = match projection_or_invalid(spec, set, TieSplit::Allow)? {
        Some(p) => {
            let m = &(&p * tbd) - &(&CMatrix::identity(2 * l) - &p);
            Some(numkernel::determinant(&m)?)
        }
        None => None,
    };
    Ok(QEvaluation {
        energy: e,
        set: *set,
        kind,
        value,
    })
}

/// `(-1)^{L(N-1)} det(T)^N det((T^E)^N - 1)`.
pub fn charpoly_circulant(coeffs: &CoefficientTriple, n: usize, e: C64) -> Result<C64> {
    let l = coeffs.dim();
    let tm = transfer::transfer_matrix(coeffs, e)?;
    let exp = u32::try_from(n).map_err(|_| Error::InvalidSize("N too large".into()))?;
    let pow = tm.pow(exp)?;
    let d = numkernel::determinant(&(&pow - &CMatrix::identity(2 * l)))?;
    let sign = if (l * n.saturating_sub(1)).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let value = coeffs.det_t().powu(exp) * d * sign;
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::Overflow);
    }
    Ok(value)
}

#[derive(Debug, Clone, Serialize)]
pub struct WidomTerm {
    pub set: IndexSet,
    pub z: C64,
    pub z_power: C64,
    pub q: C64,
    pub contribution: C64,
}

/// `total = prefactor * sum_I Z_I^power q_I`.
#[derive(Debug, Clone, Serialize)]
pub struct WidomSum {
    pub energy: C64,
    pub n: usize,
    pub prefactor: C64,
    pub total: C64,
    /// Sorted by decreasing `|Z_I|`.
    pub terms: Vec<WidomTerm>,
    pub dominant: IndexSet,
}

impl WidomSum {
    fn assemble(energy: C64, n: usize, prefactor: C64, mut terms: Vec<WidomTerm>) -> Self {
        terms.sort_by(|a, b| b.z.norm().total_cmp(&a.z.norm()));
        let dominant = terms[0].set;
        let sum = neumaier(terms.iter().map(|t| t.contribution));
        Self {
            energy,
            n,
            prefactor,
            total: prefactor * sum,
            terms,
            dominant,
        }
    }

    /// CSV dump: `set,abs_z,q_re,q_im,contribution_re,contribution_im`.
    pub fn write_terms_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "set,abs_z,q_re,q_im,contribution_re,contribution_im")?;
        for t in &self.terms {
            let members: Vec<String> = t.set.members().iter().map(|j| j.to_string()).collect();
            writeln!(
                w,
                "\"{}\",{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                members.join(" "),
                t.z.norm(),
                t.q.re,
                t.q.im,
                t.contribution.re,
                t.contribution.im
            )?;
        }
        Ok(())
    }
}

/// Compensated summation, applied to real and imaginary parts separately.
pub fn neumaier(values: impl Iterator<Item = C64>) -> C64 {
    let (mut s_re, mut c_re, mut s_im, mut c_im) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let step = |s: &mut f64, c: &mut f64, x: f64| {
        let t = *s + x;
        if s.abs() >= x.abs() {
            *c += (*s - t) + x;
        } else {
            *c += (x - t) + *s;
        }
        *s = t;
    };
    for v in values {
        step(&mut s_re, &mut c_re, v.re);
        step(&mut s_im, &mut c_im, v.im);
    }
    C64::new(s_re + c_re, s_im + c_im)
}

fn exponent(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidSize("N too large".into()))
}

/// `det(H_N(0, 0, C) - E) = sum_{|I| = L} Z_I^N q_hat_I`.
pub fn widom_sum_open(
    coeffs: &CoefficientTriple,
    c: &CMatrix,
    n: usize,
    e: C64,
) -> Result<WidomSum> {
    widom_sum_open_windowed(coeffs, c, n, e, None)
}

pub fn widom_sum_open_windowed(
    coeffs: &CoefficientTriple,
    c: &CMatrix,
    n: usize,
    e: C64,
    window: Option<&TransferWindow>,
) -> Result<WidomSum> {
    let l = coeffs.dim();
    let spec = transfer::ordered_spectrum(coeffs, e)?;
    let p = exponent(n)?;
    let mut terms = Vec::new();
    for set in IndexSet::subsets_of_size(2 * l, l) {
        let q = q_hat_with(&spec, c, e, &set, window, TieSplit::Allow)?
            .value
            .ok_or(Error::DegenerateSplit)?;
        let z = z_factor(&spec, &set, coeffs.det_t());
        let z_power = z.powu(p);
        terms.push(WidomTerm {
            set,
            z,
            z_power,
            q,
            contribution: z_power * q,
        });
    }
    Ok(WidomSum::assemble(e, n, C64::new(1.0, 0.0), terms))
}

/// `det(H_N(A, B, C) - E) = det(B) sum_{|I| <= L + r} Z_I^{N-1} q_I`.
pub fn widom_sum_perturbed(
    coeffs: &CoefficientTriple,
    boundary: &BoundaryTriple,
    n: usize,
    e: C64,
) -> Result<WidomSum> {
    let l = coeffs.dim();
    if n < 2 {
        return Err(Error::InvalidSize("N must be at least 2".into()));
    }
    let spec = transfer::ordered_spectrum(coeffs, e)?;
    let tbd = boundary_transfer_matrix(boundary, e)?;
    let p = exponent(n - 1)?;
    let mut terms = Vec::new();
    for set in IndexSet::subsets_up_to(2 * l, l + boundary.rank_a()) {
        let q = q_perturbed_with(&spec, &tbd, boundary.rank_a(), e, &set)?
            .value
            .ok_or(Error::DegenerateSplit)?;
        let z = z_factor(&spec, &set, coeffs.det_t());
        let z_power = z.powu(p);
        terms.push(WidomTerm {
            set,
            z,
            z_power,
            q,
            contribution: z_power * q,
        });
    }
    Ok(WidomSum::assemble(e, n, boundary.det_b(), terms))
}

/// `I^E_{>,r} = { j = L-r+1, ..., 2L : |z_j| > 1 }`.
pub fn dominant_set(spec: &TransferSpectrum, r: usize) -> IndexSet {
    let l = spec.block_dim();
    let lo = (l + 1).saturating_sub(r).max(1);
    let members: Vec<usize> = (lo..=2 * l).filter(|&j| spec.modulus(j) > 1.0).collect();
    IndexSet::new(&members, 2 * l).expect("members in range")
}
