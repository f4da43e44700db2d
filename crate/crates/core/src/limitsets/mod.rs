//! Limit-spectrum sets extracted from grid scans of transfer spectra.

mod contour;
mod outliers;
mod result;
mod scan;

use serde::{Deserialize, Serialize};

use crate::numkernel::C64;

pub use contour::{
    lambda_open, lambda_r, omega_r_boundary_cells, omega_r_membership, sigma_arcs, sigma_r,
    LAMBDA_R_TOL,
};
pub use outliers::{
    outliers_open, outliers_perturbed, refine_zero, CandidateStatus, OutlierOptions, OutlierPoint,
    OutlierSearch, RefineStatus, Refined,
};
pub use result::{
    limit_spectrum, model_hash, LimitSpectrumOptions, LimitSpectrumResult, ResultMetadata,
};
pub use scan::{scan_grid, scan_grid_with, sigma_periodic, NodeData, Region, ScanGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetLabel {
    Sigma,
    #[serde(rename = "Sigma_r")]
    SigmaR,
    Lambda,
    #[serde(rename = "Lambda_r")]
    LambdaR,
    #[serde(rename = "Gamma_C")]
    GammaC,
    #[serde(rename = "Gamma_r")]
    GammaR,
}

impl SetLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SetLabel::Sigma => "Sigma",
            SetLabel::SigmaR => "Sigma_r",
            SetLabel::Lambda => "Lambda",
            SetLabel::LambdaR => "Lambda_r",
            SetLabel::GammaC => "Gamma_C",
            SetLabel::GammaR => "Gamma_r",
        }
    }
}

/// A polyline on one of the arc sets.
#[derive(Debug, Clone, Serialize)]
pub struct Arc {
    pub label: SetLabel,
    pub r: Option<usize>,
    /// Sorted-modulus index `j` of the crossing level, or `k` for `|z_k| = |z_{k+1}|`.
    pub level: Option<usize>,
    #[serde(serialize_with = "result::points_as_pairs")]
    pub points: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    /// Two or more sorted moduli cross the unit circle inside one cell.
    MultipleUnitCrossings,
    /// A neighbouring modulus ties with the crossing pair.
    NeighbouringModulusTie,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlaggedCell {
    #[serde(serialize_with = "result::point_as_pair")]
    pub center: C64,
    pub reason: FlagReason,
}

/// Arcs of one set together with the scan cells they pass through.
#[derive(Debug, Clone, Default)]
pub struct ArcSet {
    pub arcs: Vec<Arc>,
    pub flagged: Vec<FlaggedCell>,
    /// Cells `(ix, iy)` containing a piece of an arc.
    pub cells: Vec<(usize, usize)>,
    /// Arc ends that also lie on a unit-modulus set.
    pub overlap: Vec<C64>,
}

impl ArcSet {
    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = C64> + '_ {
        self.arcs.iter().flat_map(|a| a.points.iter().copied())
    }

    pub fn point_count(&self) -> usize {
        self.arcs.iter().map(|a| a.points.len()).sum()
    }

    pub fn extend(&mut self, other: ArcSet) {
        self.arcs.extend(other.arcs);
        self.flagged.extend(other.flagged);
        self.cells.extend(other.cells);
        self.cells.sort();
        self.cells.dedup();
        self.overlap.extend(other.overlap);
    }
}

fn segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).re * d.re + (p - a).im * d.im) / len2;
    (p - (a + d * t.clamp(0.0, 1.0))).norm()
}

/// Distance from `p` to the nearest arc polyline.
pub fn distance_to_arcs(p: C64, arcs: &[Arc]) -> f64 {
    let mut best = f64::INFINITY;
    for arc in arcs {
        if arc.points.len() == 1 {
            best = best.min((p - arc.points[0]).norm());
        }
        for w in arc.points.windows(2) {
            best = best.min(segment_distance(p, w[0], w[1]));
        }
    }
    best
}

/// Distance from `p` to the nearest point of a cloud.
pub fn distance_to_cloud(p: C64, cloud: &[C64]) -> f64 {
    cloud
        .iter()
        .map(|q| (p - q).norm())
        .fold(f64::INFINITY, f64::min)
}

/// `sup_{a in A} dist(a, B)`; infinite if `B` is empty and `A` is not.
pub fn directed_hausdorff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .map(|&p| distance_to_cloud(p, b))
        .fold(0.0, f64::max)
}

pub fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Number of cells of `a` farther than one cell (Chebyshev) from every cell of `b`.
pub fn cells_outside_layer(a: &[(usize, usize)], b: &[(usize, usize)]) -> usize {
    let set: std::collections::HashSet<(usize, usize)> = b.iter().copied().collect();
    a.iter()
        .filter(|&&(x, y)| {
            !(x.saturating_sub(1)..=x + 1)
                .any(|i| (y.saturating_sub(1)..=y + 1).any(|j| set.contains(&(i, j))))
        })
        .count()
}
