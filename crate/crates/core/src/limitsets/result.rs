use std::io::{self, Write};

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::numkernel::{CMatrix, C64};
use crate::operators::{BoundaryCase, BoundaryTriple, CoefficientTriple};
use crate::parallel::Parallelism;
use crate::transfer::SpectralTolerances;

use super::contour::{lambda_open, lambda_r, sigma_arcs, sigma_r};
use super::outliers::{outliers_open, outliers_perturbed, OutlierOptions, OutlierPoint};
use super::scan::{scan_grid_with, Region};
use super::{Arc, FlaggedCell, SetLabel};

pub(crate) fn point_as_pair<S: Serializer>(p: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [p.re, p.im].serialize(s)
}

pub(crate) fn points_as_pairs<S: Serializer>(
    ps: &[C64],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(ps.len()))?;
    for p in ps {
        seq.serialize_element(&[p.re, p.im])?;
    }
    seq.end()
}

/// SHA-256 over the block entries of `(R, T, V, A, B, C)` in row-major order.
pub fn model_hash(coeffs: &CoefficientTriple, boundary: &BoundaryTriple) -> String {
    let mut h = Sha256::new();
    let blocks: [(&str, &CMatrix); 6] = [
        ("R", coeffs.r()),
        ("T", coeffs.t()),
        ("V", coeffs.v()),
        ("A", boundary.a()),
        ("B", boundary.b()),
        ("C", boundary.c()),
    ];
    for (name, m) in blocks {
        h.update(name.as_bytes());
        h.update((m.rows() as u64).to_le_bytes());
        for z in m.as_slice() {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy)]
pub struct LimitSpectrumOptions {
    pub region: Region,
    pub nx: usize,
    pub ny: usize,
    /// Defaults to `rank A` in the perturbed case.
    pub r: Option<usize>,
    pub tolerances: SpectralTolerances,
    pub outliers: OutlierOptions,
    pub mode: Parallelism,
}

impl Default for LimitSpectrumOptions {
    fn default() -> Self {
        Self {
            region: Region::square(3.0),
            nx: 256,
            ny: 256,
            r: None,
            tolerances: SpectralTolerances::default(),
            outliers: OutlierOptions::default(),
            mode: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultMetadata {
    pub region: Region,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub r: Option<usize>,
    pub case: BoundaryCase,
    pub tolerances: SpectralTolerances,
    pub exclusion_radius: f64,
    pub residual_tol: f64,
    pub seed_factor: f64,
    pub seed_quantile: f64,
    pub masked_fraction: f64,
    pub degenerate_nodes: usize,
    pub model_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSpectrumResult {
    pub arcs: Vec<Arc>,
    pub outliers: Vec<OutlierPoint>,
    pub candidates: Vec<OutlierPoint>,
    pub flagged_cells: Vec<FlaggedCell>,
    #[serde(serialize_with = "points_as_pairs")]
    pub overlap_points: Vec<C64>,
    pub metadata: ResultMetadata,
}

impl LimitSpectrumResult {
    pub fn arcs_labeled(&self, label: SetLabel) -> impl Iterator<Item = &Arc> {
        self.arcs.iter().filter(move |a| a.label == label)
    }

    /// The documented JSON layout: outliers flattened to `{label, re, im, residual, status}`.
    pub fn to_json(&self) -> serde_json::Value {
        let arcs: Vec<_> = self
            .arcs
            .iter()
            .map(|a| {
                json!({
                    "label": a.label,
                    "r": a.r,
                    "level": a.level,
                    "points": a.points.iter().map(|p| [p.re, p.im]).collect::<Vec<_>>(),
                })
            })
            .collect();
        let point = |o: &OutlierPoint| {
            json!({
                "label": o.label,
                "re": o.point.re,
                "im": o.point.im,
                "residual": o.residual,
                "status": o.refinement,
                "index_set": o.set,
                "decision": o.status,
            })
        };
        json!({
            "arcs": arcs,
            "outliers": self.outliers.iter().map(point).collect::<Vec<_>>(),
            "candidates": self.candidates.iter().map(point).collect::<Vec<_>>(),
            "flagged_cells": self.flagged_cells,
            "overlap_points": self.overlap_points.iter().map(|p| [p.re, p.im]).collect::<Vec<_>>(),
            "metadata": self.metadata,
        })
    }

    /// Flat rows `set_label, r, re, im, aux`; `aux` is the arc index for
    /// arc points and the residual for outliers.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "set_label,r,re,im,aux")?;
        let r_str = |r: Option<usize>| r.map(|r| r.to_string()).unwrap_or_default();
        for (i, a) in self.arcs.iter().enumerate() {
            for p in &a.points {
                writeln!(
                    w,
                    "{},{},{:.17e},{:.17e},{}",
                    a.label.as_str(),
                    r_str(a.r),
                    p.re,
                    p.im,
                    i
                )?;
            }
        }
        for o in &self.outliers {
            writeln!(
                w,
                "{},{},{:.17e},{:.17e},{:.6e}",
                o.label.as_str(),
                r_str(self.metadata.r),
                o.point.re,
                o.point.im,
                o.residual
            )?;
        }
        for p in &self.overlap_points {
            for label in [SetLabel::SigmaR, SetLabel::LambdaR] {
                writeln!(
                    w,
                    "{},{},{:.17e},{:.17e},overlap",
                    label.as_str(),
                    r_str(self.metadata.r),
                    p.re,
                    p.im
                )?;
            }
        }
        Ok(())
    }
}

/// Limit spectrum of `H_N(A, B, C)` on a grid:
/// `Sigma` for periodic corners, `Lambda` and `Gamma(C)` when the corners
/// vanish, `Sigma_r`, `Lambda_r` and `Gamma_r` when `B` is invertible.
pub fn limit_spectrum(
    coeffs: &CoefficientTriple,
    boundary: &BoundaryTriple,
    opts: &LimitSpectrumOptions,
) -> Result<LimitSpectrumResult> {
    let case = boundary.case();
    let periodic = case == BoundaryCase::Circulant;
    let open = !periodic && boundary.corners_vanish();
    let r = if periodic || open {
        None
    } else {
        Some(opts.r.unwrap_or(boundary.rank_a()))
    };
    if !periodic && !open {
        boundary.b_inv()?;
    }
    let scan = scan_grid_with(
        coeffs,
        opts.region,
        opts.nx,
        opts.ny,
        r.unwrap_or(0),
        opts.tolerances,
        opts.mode,
    )?;

    let mut arcs = Vec::new();
    let mut flagged = Vec::new();
    let mut overlap = Vec::new();
    let mut outliers = Vec::new();
    let mut candidates = Vec::new();
    if periodic {
        let s = sigma_arcs(&scan);
        flagged.extend(s.flagged);
        arcs.extend(s.arcs);
    } else if open {
        let lam = lambda_open(&scan);
        let found = outliers_open(&scan, boundary.c(), &lam.arcs, &opts.outliers)?;
        flagged.extend(lam.flagged);
        arcs.extend(lam.arcs);
        outliers = found.outliers;
        candidates = found.candidates;
    } else {
        let r = r.expect("perturbed case has r");
        let mut set = sigma_r(&scan, r);
        set.extend(lambda_r(&scan, r));
        let found = outliers_perturbed(&scan, boundary, r, &set.arcs, &opts.outliers)?;
        flagged.extend(set.flagged);
        overlap = set.overlap;
        arcs.extend(set.arcs);
        outliers = found.outliers;
        candidates = found.candidates;
    }

    let metadata = ResultMetadata {
        region: opts.region,
        nx: opts.nx,
        ny: opts.ny,
        h: scan.h,
        r,
        case,
        tolerances: opts.tolerances,
        exclusion_radius: opts.outliers.exclusion_radius.unwrap_or(3.0 * scan.h),
        residual_tol: opts.outliers.residual_tol,
        seed_factor: opts.outliers.seed_factor,
        seed_quantile: opts.outliers.seed_quantile,
        masked_fraction: scan.masked_fraction(),
        degenerate_nodes: scan.degenerate_count(),
        model_hash: model_hash(coeffs, boundary),
    };
    Ok(LimitSpectrumResult {
        arcs,
        outliers,
        candidates,
        flagged_cells: flagged,
        overlap_points: overlap,
        metadata,
    })
}
