//! Transfer matrices, modulus-ordered transfer spectra and Riesz projections.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::hungarian;
use crate::numkernel::{self, CMatrix, C64};
use crate::operators::{BoundaryTriple, CoefficientTriple};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralTolerances {
    /// Relative eigenvalue gap marking a degenerate pair.
    pub degeneracy: f64,
    /// Relative modulus gap marking a tie.
    pub tie: f64,
    /// Eigenvalue condition number above which a value counts as degenerate.
    pub condition_limit: f64,
}

impl Default for SpectralTolerances {
    fn default() -> Self {
        Self {
            degeneracy: 1e-8,
            tie: 1e-6,
            condition_limit: numkernel::CONDITION_LIMIT,
        }
    }
}

/// `[[(E - V) T^{-1}, -R], [T^{-1}, 0]]`.
pub fn transfer_matrix(coeffs: &CoefficientTriple, e: C64) -> Result<CMatrix> {
    Ok(two_step(e, coeffs.v(), coeffs.r(), coeffs.t_inv()))
}

/// `[[(E - C) B^{-1}, -A], [B^{-1}, 0]]`.
pub fn boundary_transfer_matrix(boundary: &BoundaryTriple, e: C64) -> Result<CMatrix> {
    let b_inv = boundary.b_inv()?;
    Ok(two_step(e, boundary.c(), boundary.a(), b_inv))
}

fn two_step(e: C64, diag: &CMatrix, off: &CMatrix, inv: &CMatrix) -> CMatrix {
    let l = diag.rows();
    let mut shifted = -diag;
    for i in 0..l {
        shifted[(i, i)] += e;
    }
    let mut m = CMatrix::zeros(2 * l, 2 * l);
    m.set_block(0, 0, &(&shifted * inv));
    m.set_block(0, l, &-off);
    m.set_block(l, 0, inv);
    m
}

/// Eigen-data of the transfer matrix at one energy, ordered by modulus.
#[derive(Debug, Clone)]
pub struct TransferSpectrum {
    pub energy: C64,
    pub values: Vec<C64>,
    pub right: CMatrix,
    pub left: CMatrix,
    pub moduli: Vec<f64>,
    pub degenerate: bool,
    /// Clusters of (0-based) positions that are numerically degenerate.
    pub degenerate_groups: Vec<Vec<usize>>,
    /// Clusters of (1-based) indices with equal moduli, size at least two.
    pub tie_groups: Vec<Vec<usize>>,
}

impl TransferSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Block size `L`.
    pub fn block_dim(&self) -> usize {
        self.values.len() / 2
    }

    /// `z_j` for 1-based `j`.
    pub fn z(&self, j: usize) -> C64 {
        self.values[j - 1]
    }

    /// `|z_j|` for 1-based `j`.
    pub fn modulus(&self, j: usize) -> f64 {
        self.moduli[j - 1]
    }

    /// Number of eigenvalues with modulus strictly above one.
    pub fn count_outside_unit(&self) -> usize {
        self.moduli.iter().filter(|&&m| m > 1.0).count()
    }

    /// Moduli sorted ascending, independent of the tie-break labels.
    pub fn sorted_moduli(&self) -> Vec<f64> {
        let mut m = self.moduli.clone();
        m.sort_by(f64::total_cmp);
        m
    }
}

fn principal_arg(z: C64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

pub fn ordered_spectrum(coeffs: &CoefficientTriple, e: C64) -> Result<TransferSpectrum> {
    ordered_spectrum_with(coeffs, e, &SpectralTolerances::default())
}

pub fn ordered_spectrum_with(
    coeffs: &CoefficientTriple,
    e: C64,
    tol: &SpectralTolerances,
) -> Result<TransferSpectrum> {
    let tm = transfer_matrix(coeffs, e)?;
    spectrum_of(&tm, e, tol)
}

/// Orders the eigen-decomposition of an arbitrary `2L x 2L` matrix.
///
/// Moduli are sorted ascending; within a chain of moduli closer than the tie
/// tolerance, values are ordered by argument in `[0, 2 pi)` and then by real
/// part.
pub fn spectrum_of(tm: &CMatrix, e: C64, tol: &SpectralTolerances) -> Result<TransferSpectrum> {
    let dec = numkernel::eigenpairs(tm)?;
    let n = dec.values.len();
    let max_abs = dec.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = 1.0 + max_abs;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.values[a].norm().total_cmp(&dec.values[b].norm()));
    let mut ties: Vec<Vec<usize>> = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        let breaks = k == n
            || dec.values[order[k]].norm() - dec.values[order[k - 1]].norm() > tol.tie * scale;
        if breaks {
            let group = &mut order[start..k];
            group.sort_by(|&a, &b| {
                let (za, zb) = (dec.values[a], dec.values[b]);
                principal_arg(za)
                    .total_cmp(&principal_arg(zb))
                    .then(za.re.total_cmp(&zb.re))
            });
            if k - start >= 2 {
                ties.push((start + 1..=k).collect());
            }
            start = k;
        }
    }

    let values: Vec<C64> = order.iter().map(|&i| dec.values[i]).collect();
    let moduli = values.iter().map(|z| z.norm()).collect();
    let mut right = CMatrix::zeros(n, n);
    let mut left = CMatrix::zeros(n, n);
    for (pos, &i) in order.iter().enumerate() {
        right.set_column(pos, &dec.right_vectors.column(i));
        left.set_column(pos, &dec.left_vectors.column(i));
    }

    // Union-find over degenerate pairs.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut x = x;
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut flagged = false;
    let gap_tol = tol.degeneracy * scale;
    for a in 0..n {
        for b in (a + 1)..n {
            if (values[a] - values[b]).norm() < gap_tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
                flagged = true;
            }
        }
        let kappa = dec.condition_numbers[order[a]];
        if (kappa.is_nan() || kappa > tol.condition_limit) && n > 1 {
            let nearest = (0..n)
                .filter(|&b| b != a)
                .min_by(|&x, &y| {
                    (values[a] - values[x])
                        .norm()
                        .total_cmp(&(values[a] - values[y]).norm())
                })
                .expect("n > 1");
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, nearest));
            parent[ra] = rb;
            flagged = true;
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    if flagged {
        let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for x in 0..n {
            let r = find(&mut parent, x);
            by_root.entry(r).or_default().push(x);
        }
        groups = by_root.into_values().filter(|g| g.len() > 1).collect();
    }

    Ok(TransferSpectrum {
        energy: e,
        values,
        right,
        left,
        moduli,
        degenerate: !groups.is_empty(),
        degenerate_groups: groups,
        tie_groups: ties,
    })
}

/// A subset of `{1, ..., dim}` stored as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet {
    mask: u64,
    dim: usize,
}

impl IndexSet {
    pub fn new(members: &[usize], dim: usize) -> Result<Self> {
        if dim > 64 {
            return Err(Error::InvalidSize(format!(
                "index sets support dim <= 64, got {dim}"
            )));
        }
        let mut mask = 0u64;
        for &m in members {
            if m == 0 || m > dim {
                return Err(Error::IndexOutOfRange { index: m, dim });
            }
            let bit = 1u64 << (m - 1);
            if mask & bit != 0 {
                return Err(Error::InvalidSize(format!("index {m} repeated")));
            }
            mask |= bit;
        }
        Ok(Self { mask, dim })
    }

    pub fn from_mask(mask: u64, dim: usize) -> Self {
        assert!(
            dim <= 64 && (dim == 64 || mask >> dim == 0),
            "mask exceeds dimension"
        );
        Self { mask, dim }
    }

    pub fn empty(dim: usize) -> Self {
        Self::from_mask(0, dim)
    }

    pub fn full(dim: usize) -> Self {
        Self::from_mask(
            if dim == 64 {
                u64::MAX
            } else {
                (1u64 << dim) - 1
            },
            dim,
        )
    }

    /// `{lo, ..., hi}`; empty when `lo > hi`.
    pub fn range(lo: usize, hi: usize, dim: usize) -> Result<Self> {
        let members: Vec<usize> = (lo..=hi).collect();
        Self::new(&members, dim)
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, j: usize) -> bool {
        j >= 1 && j <= self.dim && self.mask & (1u64 << (j - 1)) != 0
    }

    /// Sorted 1-based members.
    pub fn members(&self) -> Vec<usize> {
        (1..=self.dim).filter(|&j| self.contains(j)).collect()
    }

    pub fn complement(&self) -> Self {
        Self {
            mask: Self::full(self.dim).mask & !self.mask,
            dim: self.dim,
        }
    }

    /// All subsets of `{1..dim}` with at most `max_len` elements, in colex order.
    pub fn subsets_up_to(dim: usize, max_len: usize) -> Vec<IndexSet> {
        assert!(dim < 32, "enumeration limited to dim < 32");
        (0..(1u64 << dim))
            .filter(|m| m.count_ones() as usize <= max_len)
            .map(|m| Self::from_mask(m, dim))
            .collect()
    }

    /// All subsets with exactly `k` elements, in colex order.
    pub fn subsets_of_size(dim: usize, k: usize) -> Vec<IndexSet> {
        Self::subsets_up_to(dim, k)
            .into_iter()
            .filter(|s| s.len() == k)
            .collect()
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m: Vec<String> = self.members().iter().map(|j| j.to_string()).collect();
        write!(f, "{{{}}}", m.join(","))
    }
}

impl Serialize for IndexSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.members().serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieSplit {
    /// Refuse index sets that separate eigenvalues of equal modulus.
    #[default]
    Forbid,
    /// Accept them; the labeling of the tie then decides the projection.
    Allow,
}

fn straddles(group: &[usize], set: &IndexSet) -> bool {
    let inside = group.iter().filter(|&&j| set.contains(j)).count();
    inside != 0 && inside != group.len()
}

/// Checks that `set` splits neither a degenerate cluster nor, unless
/// allowed, a modulus tie.
pub fn check_split(spec: &TransferSpectrum, set: &IndexSet, ties: TieSplit) -> Result<()> {
    if set.dim() != spec.len() {
        return Err(Error::DimensionMismatch(format!(
            "index set over {} for a spectrum of size {}",
            set.dim(),
            spec.len()
        )));
    }
    for g in &spec.degenerate_groups {
        let one_based: Vec<usize> = g.iter().map(|j| j + 1).collect();
        if straddles(&one_based, set) {
            return Err(Error::DegenerateSplit);
        }
    }
    if ties == TieSplit::Forbid && spec.tie_groups.iter().any(|g| straddles(g, set)) {
        return Err(Error::DegenerateSplit);
    }
    Ok(())
}

/// `R_I = sum_{j in I} right_j left_j^*`.
pub fn riesz_projection(
    spec: &TransferSpectrum,
    set: &IndexSet,
    ties: TieSplit,
) -> Result<CMatrix> {
    check_split(spec, set, ties)?;
    let n = spec.len();
    let mut p = CMatrix::zeros(n, n);
    for j in set.members() {
        let r = spec.right.column(j - 1);
        let l = spec.left.column(j - 1);
        for a in 0..n {
            for b in 0..n {
                p[(a, b)] += r[a] * l[b].conj();
            }
        }
    }
    Ok(p)
}

/// Riesz projection by trapezoidal quadrature of the resolvent on small
/// circles around each selected eigenvalue.
pub fn riesz_projection_contour(
    tm: &CMatrix,
    spec: &TransferSpectrum,
    set: &IndexSet,
    nodes: usize,
) -> Result<CMatrix> {
    let n = tm.rows();
    let mut p = CMatrix::zeros(n, n);
    for j in set.members() {
        let zj = spec.z(j);
        let sep = spec
            .values
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j - 1)
            .map(|(_, z)| (z - zj).norm())
            .fold(f64::INFINITY, f64::min);
        if sep < 1e-8 * (1.0 + zj.norm()) {
            return Err(Error::ContourSeparation);
        }
        let rho = if sep.is_finite() {
            0.5 * sep
        } else {
            1.0 + zj.norm()
        };
        for k in 0..nodes {
            let w = C64::from_polar(rho, 2.0 * PI * k as f64 / nodes as f64);
            let z = zj + w;
            let mut shifted = -tm;
            for i in 0..n {
                shifted[(i, i)] += z;
            }
            let res = numkernel::inverse(&shifted)?;
            p = &p + &res.scale(w / nodes as f64);
        }
    }
    Ok(p)
}

/// Permutation `pi` with `a[j]` continuing to `b[pi[j]]`, 0-based.
///
/// Greedy nearest-neighbour assignment, replaced by the optimal assignment
/// when the greedy choice is not clear-cut.
pub fn match_values(a: &[C64], b: &[C64]) -> Vec<usize> {
    let n = a.len();
    assert_eq!(n, b.len(), "matching needs equal sizes");
    let mut perm = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut clear = true;
    for j in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n).map(|k| ((a[j] - b[k]).norm(), k)).collect();
        d.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (best, k) = d[0];
        if taken[k] || (n > 1 && d[1].0 < 2.0 * best) {
            clear = false;
            break;
        }
        perm[j] = k;
        taken[k] = true;
    }
    if clear {
        return perm;
    }
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).collect())
        .collect();
    hungarian(&cost)
}

/// Branch continuation between the transfer spectra at two nearby energies.
pub fn match_branches(a: &TransferSpectrum, b: &TransferSpectrum) -> Vec<usize> {
    match_values(&a.values, &b.values)
}
