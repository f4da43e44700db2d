use serde::Serialize;

use crate::error::Result;
use crate::numkernel::{CMatrix, C64};
use crate::operators::BoundaryTriple;
use crate::parallel::map_indexed;
use crate::transfer::{self, boundary_transfer_matrix, IndexSet, TieSplit};
use crate::widom::{dominant_set, q_hat_with, q_perturbed_with};

use super::scan::ScanGrid;
use super::{distance_to_arcs, Arc, SetLabel};

const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineStatus {
    Converged,
    MaxIterations,
    EvaluationFailed,
    Diverged,
}

#[derive(Debug, Clone, Copy)]
pub struct Refined {
    pub point: C64,
    pub residual: f64,
    pub iterations: usize,
    pub status: RefineStatus,
}

/// Newton iteration for a zero of `f` with a central-difference derivative.
///
/// `h0` is the initial difference step and sets the trust radius; `scale`
/// is the typical size of `|f|` used in the residual test.
pub fn refine_zero(f: &dyn Fn(C64) -> Option<C64>, seed: C64, h0: f64, scale: f64) -> Refined {
    let mut e = seed;
    let Some(mut fe) = f(e) else {
        return Refined {
            point: e,
            residual: f64::INFINITY,
            iterations: 0,
            status: RefineStatus::EvaluationFailed,
        };
    };
    let mut hd = h0;
    let radius = 20.0 * h0;
    for it in 0..MAX_ITERATIONS {
        if fe.norm() < 1e-12 * scale {
            return Refined {
                point: e,
                residual: fe.norm(),
                iterations: it,
                status: RefineStatus::Converged,
            };
        }
        let (Some(fp), Some(fm)) = (f(e + hd), f(e - hd)) else {
            return Refined {
                point: e,
                residual: fe.norm(),
                iterations: it,
                status: RefineStatus::EvaluationFailed,
            };
        };
        let d = (fp - fm) / (2.0 * hd);
        if d.norm() == 0.0 || !d.is_finite() {
            return Refined {
                point: e,
                residual: fe.norm(),
                iterations: it,
                status: RefineStatus::EvaluationFailed,
            };
        }
        let mut step = -fe / d;
        let mut accepted = None;
        for _ in 0..8 {
            if let Some(fnew) = f(e + step) {
                if fnew.norm() < fe.norm() {
                    accepted = Some(fnew);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(fnew) = accepted else {
            let status = if step.norm() < 1e-13 {
                RefineStatus::Converged
            } else {
                RefineStatus::MaxIterations
            };
            return Refined {
                point: e,
                residual: fe.norm(),
                iterations: it,
                status,
            };
        };
        e += step;
        fe = fnew;
        if (e - seed).norm() > radius {
            return Refined {
                point: e,
                residual: fe.norm(),
                iterations: it + 1,
                status: RefineStatus::Diverged,
            };
        }
        if step.norm() < 1e-13 {
            return Refined {
                point: e,
                residual: fe.norm(),
                iterations: it + 1,
                status: RefineStatus::Converged,
            };
        }
        hd = step.norm().clamp(1e-7 * (1.0 + e.norm()), h0);
    }
    let status = if fe.norm() < 1e-12 * scale {
        RefineStatus::Converged
    } else {
        RefineStatus::MaxIterations
    };
    Refined {
        point: e,
        residual: fe.norm(),
        iterations: MAX_ITERATIONS,
        status,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OutlierOptions {
    /// Minimum distance to the arcs; `None` means three grid spacings.
    pub exclusion_radius: Option<f64>,
    /// Seeds are local minima below `seed_factor` times the `seed_quantile` of `|q|`.
    pub seed_factor: f64,
    pub seed_quantile: f64,
    /// Acceptance threshold relative to the median of `|q|` on the grid.
    pub residual_tol: f64,
}

impl Default for OutlierOptions {
    fn default() -> Self {
        Self {
            exclusion_radius: None,
            seed_factor: 10.0,
            seed_quantile: 0.05,
            residual_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Accepted,
    Unconverged,
    ResidualTooLarge,
    NearArc,
    OutsideRegion,
    IndexSetChanged,
    Duplicate,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutlierPoint {
    pub label: SetLabel,
    #[serde(serialize_with = "super::result::point_as_pair")]
    pub point: C64,
    pub residual: f64,
    pub refinement: RefineStatus,
    pub status: CandidateStatus,
    pub set: IndexSet,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct OutlierSearch {
    pub outliers: Vec<OutlierPoint>,
    /// Refined seeds that were not accepted.
    pub candidates: Vec<OutlierPoint>,
    /// Median of `|q|` over the valid grid nodes.
    pub scale: f64,
    pub seeds: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[k]
}

struct Seed {
    point: C64,
    set: IndexSet,
}

/// Local minima of `|q|` over the eight-neighbourhood below the seed threshold.
fn grid_seeds(
    scan: &ScanGrid,
    values: &[Option<(IndexSet, f64)>],
    opts: &OutlierOptions,
) -> (Vec<Seed>, f64) {
    let mut finite: Vec<f64> = values
        .iter()
        .flatten()
        .map(|v| v.1)
        .filter(|v| v.is_finite())
        .collect();
    finite.sort_by(f64::total_cmp);
    let scale = quantile(&finite, 0.5).max(f64::MIN_POSITIVE);
    let threshold = opts.seed_factor * quantile(&finite, opts.seed_quantile);
    let mut seeds = Vec::new();
    for iy in 0..scan.ny {
        for ix in 0..scan.nx {
            let Some((set, v)) = &values[scan.index(ix, iy)] else {
                continue;
            };
            if v.is_nan() || *v > threshold {
                continue;
            }
            // Strict minimum under the order (|q|, node index); flat patches are skipped.
            let here = scan.index(ix, iy);
            let mut minimum = true;
            let mut highest = *v;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                    if (dx, dy) == (0, 0)
                        || jx < 0
                        || jy < 0
                        || jx >= scan.nx as i64
                        || jy >= scan.ny as i64
                    {
                        continue;
                    }
                    let there = scan.index(jx as usize, jy as usize);
                    if let Some((_, w)) = &values[there] {
                        highest = highest.max(*w);
                        if *w < *v || (*w == *v && there < here) {
                            minimum = false;
                        }
                    }
                }
            }
            if highest - *v <= 1e-12 * scale {
                minimum = false;
            }
            if minimum {
                seeds.push(Seed {
                    point: scan.point(ix, iy),
                    set: *set,
                });
            }
        }
    }
    (seeds, scale)
}

#[allow(clippy::too_many_arguments)]
fn classify(
    scan: &ScanGrid,
    label: SetLabel,
    seeds: Vec<Seed>,
    scale: f64,
    arcs: &[Arc],
    opts: &OutlierOptions,
    field: &(dyn Fn(C64, &IndexSet) -> Option<C64> + Sync),
    set_at: &dyn Fn(C64) -> Option<IndexSet>,
) -> OutlierSearch {
    let exclusion = opts.exclusion_radius.unwrap_or(3.0 * scan.h);
    let refined = map_indexed(seeds.len(), scan.mode, |i| {
        let s = &seeds[i];
        refine_zero(&|e| field(e, &s.set), s.point, scan.h, scale)
    });
    let mut search = OutlierSearch {
        scale,
        seeds: seeds.len(),
        ..Default::default()
    };
    for (seed, rf) in seeds.iter().zip(refined) {
        let status = if rf.status != RefineStatus::Converged {
            CandidateStatus::Unconverged
        } else if rf.residual.is_nan() || rf.residual >= opts.residual_tol * scale {
            CandidateStatus::ResidualTooLarge
        } else if !scan.region.contains(rf.point) {
            CandidateStatus::OutsideRegion
        } else if set_at(rf.point) != Some(seed.set) {
            CandidateStatus::IndexSetChanged
        } else if distance_to_arcs(rf.point, arcs) <= exclusion {
            CandidateStatus::NearArc
        } else if search
            .outliers
            .iter()
            .any(|o| (o.point - rf.point).norm() < 0.5 * scan.h)
        {
            CandidateStatus::Duplicate
        } else {
            CandidateStatus::Accepted
        };
        let p = OutlierPoint {
            label,
            point: rf.point,
            residual: rf.residual,
            refinement: rf.status,
            status,
            set: seed.set,
        };
        if status == CandidateStatus::Accepted {
            search.outliers.push(p);
        } else {
            search.candidates.push(p);
        }
    }
    search
}

/// `Gamma(C)`: zeros of `q_hat` for `I_0 = {L+1, ..., 2L}` away from `Lambda`.
pub fn outliers_open(
    scan: &ScanGrid,
    c: &CMatrix,
    lambda: &[Arc],
    opts: &OutlierOptions,
) -> Result<OutlierSearch> {
    let l = scan.block_dim();
    let i0 = IndexSet::range(l + 1, 2 * l, 2 * l)?;
    let coeffs = &scan.coeffs;
    let tol = scan.tolerances;
    let field = |e: C64, set: &IndexSet| -> Option<C64> {
        let spec = transfer::ordered_spectrum_with(coeffs, e, &tol).ok()?;
        q_hat_with(&spec, c, e, set, None, TieSplit::Allow)
            .ok()?
            .value
            .filter(|v| v.is_finite())
    };
    let values = map_indexed(scan.nx * scan.ny, scan.mode, |k| {
        let n = &scan.nodes[k];
        if n.masked {
            return None;
        }
        field(n.energy, &i0).map(|v| (i0, v.norm()))
    });
    let (seeds, scale) = grid_seeds(scan, &values, opts);
    let set_at = |_e: C64| Some(i0);
    Ok(classify(
        scan,
        SetLabel::GammaC,
        seeds,
        scale,
        lambda,
        opts,
        &field,
        &set_at,
    ))
}

/// `Gamma_r`: zeros of `q_{I^E_{>,r}}` away from `Sigma_r` and `Lambda_r`.
///
/// The index set is recomputed at every grid node and held fixed while a
/// seed is refined; a zero whose own index set differs is rejected.
pub fn outliers_perturbed(
    scan: &ScanGrid,
    boundary: &BoundaryTriple,
    r: usize,
    arcs: &[Arc],
    opts: &OutlierOptions,
) -> Result<OutlierSearch> {
    boundary.b_inv()?;
    let coeffs = &scan.coeffs;
    let tol = scan.tolerances;
    let rank_a = boundary.rank_a();
    let field = |e: C64, set: &IndexSet| -> Option<C64> {
        let spec = transfer::ordered_spectrum_with(coeffs, e, &tol).ok()?;
        let tbd = boundary_transfer_matrix(boundary, e).ok()?;
        q_perturbed_with(&spec, &tbd, rank_a, e, set)
            .ok()?
            .value
            .filter(|v| v.is_finite())
    };
    let set_at = |e: C64| -> Option<IndexSet> {
        let spec = transfer::ordered_spectrum_with(coeffs, e, &tol).ok()?;
        Some(dominant_set(&spec, r))
    };
    let values = map_indexed(scan.nx * scan.ny, scan.mode, |k| {
        let n = &scan.nodes[k];
        if n.masked {
            return None;
        }
        let set = set_at(n.energy)?;
        field(n.energy, &set).map(|v| (set, v.norm()))
    });
    let (seeds, scale) = grid_seeds(scan, &values, opts);
    Ok(classify(
        scan,
        SetLabel::GammaR,
        seeds,
        scale,
        arcs,
        opts,
        &field,
        &set_at,
    ))
}
