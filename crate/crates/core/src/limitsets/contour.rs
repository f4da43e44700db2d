use std::collections::{BTreeMap, HashMap};

use crate::error::Result;
use crate::numkernel::C64;
use crate::operators::{winding_number, CoefficientTriple};
use crate::parallel::map_indexed;
use crate::transfer::match_values;

use super::scan::{NodeData, ScanGrid};
use super::{Arc, ArcSet, FlagReason, FlaggedCell, SetLabel};

const BISECTION_STEPS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Key {
    /// Edge `(ix, iy) -> (ix + 1, iy)`.
    H(usize),
    /// Edge `(ix, iy) -> (ix, iy + 1)`.
    V(usize),
    /// Cell with lower-left corner `(ix, iy)`.
    C(usize),
}

/// The four edges of a cell: bottom, right, top, left.
fn cell_edges(g: &ScanGrid, ix: usize, iy: usize) -> [Key; 4] {
    [
        Key::H(g.index(ix, iy)),
        Key::V(g.index(ix + 1, iy)),
        Key::H(g.index(ix, iy + 1)),
        Key::V(g.index(ix, iy)),
    ]
}

fn cell_center(g: &ScanGrid, ix: usize, iy: usize) -> C64 {
    g.point(ix, iy) + C64::new(0.5 * g.hx, 0.5 * g.hy)
}

/// Edge endpoints `(a, b)` as node indices, or `None` past the grid border.
fn edge_nodes(g: &ScanGrid, key: Key) -> Option<(usize, usize)> {
    match key {
        Key::H(k) => (k % g.nx + 1 < g.nx).then_some((k, k + 1)),
        Key::V(k) => (k / g.nx + 1 < g.ny).then_some((k, k + g.nx)),
        Key::C(_) => None,
    }
}

fn all_edges(g: &ScanGrid) -> Vec<Key> {
    let n = g.nx * g.ny;
    (0..n)
        .map(Key::H)
        .chain((0..n).map(Key::V))
        .filter(|&k| edge_nodes(g, k).is_some())
        .collect()
}

/// Joins segments sharing endpoint keys into polylines.
fn assemble(segments: &[(Key, Key)], pos: &HashMap<Key, C64>) -> Vec<Vec<C64>> {
    let mut adj: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (i, (a, b)) in segments.iter().enumerate() {
        adj.entry(*a).or_default().push(i);
        adj.entry(*b).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let other = |s: usize, k: Key| {
        if segments[s].0 == k {
            segments[s].1
        } else {
            segments[s].0
        }
    };
    let walk = |start: Key, first: usize, used: &mut Vec<bool>| {
        let mut line = vec![pos[&start]];
        let (mut cur, mut seg) = (start, first);
        loop {
            used[seg] = true;
            cur = other(seg, cur);
            line.push(pos[&cur]);
            let next = &adj[&cur];
            if next.len() != 2 {
                break;
            }
            match next.iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        line
    };
    let starts: Vec<Key> = adj
        .iter()
        .filter(|(_, v)| v.len() != 2)
        .map(|(k, _)| *k)
        .collect();
    for k in starts {
        for &s in &adj[&k].clone() {
            if !used[s] {
                lines.push(walk(k, s, &mut used));
            }
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            lines.push(walk(segments[s].0, s, &mut used));
        }
    }
    lines
}

fn lerp(a: C64, b: C64, ga: f64, gb: f64) -> C64 {
    let t = if ga == gb {
        0.5
    } else {
        (ga / (ga - gb)).clamp(0.0, 1.0)
    };
    a + (b - a) * t
}

// Sigma-type sets -----------------------------------------------------------

fn level_value(n: &NodeData, j: usize) -> f64 {
    n.moduli[j - 1] - 1.0
}

fn edge_perm(g: &ScanGrid, key: Key) -> Option<&Vec<usize>> {
    match key {
        Key::H(n) => g.perm_x[n].as_ref(),
        Key::V(n) => g.perm_y[n].as_ref(),
        Key::C(_) => None,
    }
}

fn continued(values: &[C64], next: &[C64]) -> Vec<C64> {
    let p = match_values(values, next);
    p.iter().map(|&k| next[k]).collect()
}

/// Zero of `|z| - 1` along the continued branch `branch` between `a` and
/// `b`, with the 1-based sorted-modulus rank of the branch at the zero.
fn refine_unit(
    g: &ScanGrid,
    branch: usize,
    a: C64,
    b: C64,
    va: &[C64],
    vb: &[C64],
) -> (C64, usize) {
    let gap = |v: &[C64]| v[branch].norm() - 1.0;
    let (mut a, mut b) = (a, b);
    let (mut va, mut vb) = (va.to_vec(), vb.to_vec());
    for _ in 0..BISECTION_STEPS {
        let m = (a + b) * 0.5;
        let node = g.evaluate(m);
        if node.masked {
            break;
        }
        let vm = continued(&va, &node.values);
        if (gap(&vm) > 0.0) == (gap(&va) > 0.0) {
            a = m;
            va = vm;
        } else {
            b = m;
            vb = vm;
        }
    }
    let (ga, gb) = (gap(&va), gap(&vb));
    let t = if ga == gb {
        0.5
    } else {
        (ga / (ga - gb)).clamp(0.0, 1.0)
    };
    let moduli: Vec<f64> = va
        .iter()
        .zip(&vb)
        .map(|(x, y)| x.norm() + (y.norm() - x.norm()) * t)
        .collect();
    let rank = 1 + moduli.iter().filter(|&&m| m < moduli[branch]).count();
    (lerp(a, b, ga, gb), rank)
}

/// Connects the crossing edges of one cell. Even counts pair up (saddles
/// via `pair_low`, true when the bottom edge pairs with the right edge);
/// odd counts and unresolved saddles meet at the cell center.
fn link_cell(
    g: &ScanGrid,
    ix: usize,
    iy: usize,
    here: &[Key],
    pair_low: Option<bool>,
    pos: &mut HashMap<Key, C64>,
) -> Vec<(Key, Key)> {
    let keys = cell_edges(g, ix, iy);
    match (here.len(), pair_low) {
        (2, _) => vec![(here[0], here[1])],
        (4, Some(true)) => vec![(keys[0], keys[1]), (keys[2], keys[3])],
        (4, Some(false)) => vec![(keys[0], keys[3]), (keys[1], keys[2])],
        _ => {
            let center = Key::C(g.index(ix, iy));
            pos.insert(center, cell_center(g, ix, iy));
            here.iter().map(|&e| (e, center)).collect()
        }
    }
}

/// Unit-circle crossings of the continued branches for the given 1-based
/// sorted levels, joined cell by cell. A branch continued along an edge
/// keeps its sign test even where the sorted moduli only touch 1.
pub(crate) fn unit_modulus_arcs(
    g: &ScanGrid,
    levels: &[usize],
    label: SetLabel,
    r: Option<usize>,
) -> ArcSet {
    let edges = all_edges(g);
    let crossings: Vec<Vec<(usize, C64)>> = map_indexed(edges.len(), g.mode, |i| {
        let (ka, kb) = edge_nodes(g, edges[i]).expect("interior edge");
        let (na, nb) = (&g.nodes[ka], &g.nodes[kb]);
        let Some(perm) = edge_perm(g, edges[i]) else {
            return vec![];
        };
        if !na.usable() || !nb.usable() {
            return vec![];
        }
        let vb: Vec<C64> = perm.iter().map(|&p| nb.values[p]).collect();
        (0..na.values.len())
            .filter_map(|k| {
                let (ga, gb) = (na.moduli[k] - 1.0, vb[k].norm() - 1.0);
                if (ga > 0.0) == (gb > 0.0) {
                    return None;
                }
                let (p, j) = refine_unit(g, k, na.energy, nb.energy, &na.values, &vb);
                levels.contains(&j).then_some((j, p))
            })
            .collect()
    });
    let mut pos_by_level: BTreeMap<usize, HashMap<Key, C64>> = BTreeMap::new();
    for (i, list) in crossings.into_iter().enumerate() {
        for (j, p) in list {
            pos_by_level.entry(j).or_default().insert(edges[i], p);
        }
    }

    let mut set = ArcSet::default();
    let mut segs_by_level: BTreeMap<usize, Vec<(Key, Key)>> = BTreeMap::new();
    for iy in 0..g.ny - 1 {
        for ix in 0..g.nx - 1 {
            let keys = cell_edges(g, ix, iy);
            let mut crossing_levels = 0;
            for (&j, pos) in pos_by_level.iter_mut() {
                let here: Vec<Key> = keys
                    .iter()
                    .copied()
                    .filter(|k| pos.contains_key(k))
                    .collect();
                if here.is_empty() {
                    continue;
                }
                crossing_levels += 1;
                let pair_low = (here.len() == 4)
                    .then(|| {
                        let center = g.evaluate(cell_center(g, ix, iy));
                        center.usable().then(|| {
                            (level_value(&center, j) > 0.0)
                                == (level_value(g.node(ix, iy), j) > 0.0)
                        })
                    })
                    .flatten();
                let segs = link_cell(g, ix, iy, &here, pair_low, pos);
                segs_by_level.entry(j).or_default().extend(segs);
                set.cells.push((ix, iy));
            }
            if crossing_levels >= 2 {
                set.flagged.push(FlaggedCell {
                    center: cell_center(g, ix, iy),
                    reason: FlagReason::MultipleUnitCrossings,
                });
            }
        }
    }
    set.cells.sort();
    set.cells.dedup();
    for (j, segs) in segs_by_level {
        for points in assemble(&segs, &pos_by_level[&j]) {
            set.arcs.push(Arc {
                label,
                r,
                level: Some(j),
                points,
            });
        }
    }
    set
}

/// `Sigma_r`: unit-modulus crossings of `z_j` with `j >= L - r + 1`.
pub fn sigma_r(scan: &ScanGrid, r: usize) -> ArcSet {
    let l = scan.block_dim();
    let r = r.min(l);
    let levels: Vec<usize> = ((l + 1 - r)..=2 * l).collect();
    unit_modulus_arcs(scan, &levels, SetLabel::SigmaR, Some(r))
}

/// `Sigma`: unit-modulus crossings of any `z_j`.
pub fn sigma_arcs(scan: &ScanGrid) -> ArcSet {
    let levels: Vec<usize> = (1..=2 * scan.block_dim()).collect();
    unit_modulus_arcs(scan, &levels, SetLabel::Sigma, None)
}

// Lambda-type sets ----------------------------------------------------------

fn pair_gap(v: &[C64], k: usize) -> f64 {
    v[k - 1].norm() - v[k].norm()
}

/// Refines the point where the continued branches `k` and `k + 1` swap
/// modulus order between `a` (values sorted) and `b` (values continued).
fn refine_swap(g: &ScanGrid, k: usize, a: C64, b: C64, va: &[C64], vb: &[C64]) -> C64 {
    let (mut a, mut b) = (a, b);
    let (mut va, mut vb) = (va.to_vec(), vb.to_vec());
    for _ in 0..BISECTION_STEPS {
        let m = (a + b) * 0.5;
        let node = g.evaluate(m);
        if node.masked {
            break;
        }
        let vm = continued(&va, &node.values);
        if pair_gap(&vm, k) <= 0.0 {
            a = m;
            va = vm;
        } else {
            b = m;
            vb = vm;
        }
    }
    lerp(a, b, pair_gap(&va, k), pair_gap(&vb, k))
}

/// Edge crossings of `|z_k| = |z_{k+1}|` detected by a branch swap.
fn swap_crossings(g: &ScanGrid, k: usize) -> HashMap<Key, C64> {
    let edges = all_edges(g);
    let found: Vec<Option<C64>> = map_indexed(edges.len(), g.mode, |i| {
        let key = edges[i];
        let (ka, kb) = edge_nodes(g, key)?;
        let perm = edge_perm(g, key)?;
        if perm[k - 1] != k || perm[k] != k - 1 {
            return None;
        }
        let (na, nb) = (&g.nodes[ka], &g.nodes[kb]);
        let vb: Vec<C64> = perm.iter().map(|&p| nb.values[p]).collect();
        if pair_gap(&vb, k) <= 0.0 {
            return None;
        }
        Some(refine_swap(g, k, na.energy, nb.energy, &na.values, &vb))
    });
    edges
        .into_iter()
        .zip(found)
        .filter_map(|(k, p)| p.map(|p| (k, p)))
        .collect()
}

/// Arcs where `|z_k| = |z_{k+1}|`; `keep` filters segments by their midpoint.
fn equal_modulus_arcs(
    g: &ScanGrid,
    k: usize,
    label: SetLabel,
    r: Option<usize>,
    keep: &dyn Fn(&NodeData) -> bool,
) -> ArcSet {
    let mut set = ArcSet::default();
    let l = g.block_dim();
    if k == 0 || k >= 2 * l {
        return set;
    }
    let mut pos = swap_crossings(g, k);
    let mut segs: Vec<(Key, Key)> = Vec::new();
    for iy in 0..g.ny - 1 {
        for ix in 0..g.nx - 1 {
            let keys = cell_edges(g, ix, iy);
            let here: Vec<Key> = keys
                .iter()
                .copied()
                .filter(|k| pos.contains_key(k))
                .collect();
            if here.is_empty() {
                continue;
            }
            let candidate = link_cell(g, ix, iy, &here, None, &mut pos);
            let mut kept = false;
            for (a, b) in candidate {
                let mid = g.evaluate((pos[&a] + pos[&b]) * 0.5);
                if !mid.masked && keep(&mid) {
                    segs.push((a, b));
                    kept = true;
                }
            }
            if kept {
                set.cells.push((ix, iy));
                let corners = [
                    g.node(ix, iy),
                    g.node(ix + 1, iy),
                    g.node(ix + 1, iy + 1),
                    g.node(ix, iy + 1),
                ];
                let hypothesis_fails = corners.iter().any(|n| {
                    let scale = g.tolerances.tie * (1.0 + n.moduli.last().copied().unwrap_or(0.0));
                    !n.masked
                        && ((k >= 2 && n.moduli[k - 1] - n.moduli[k - 2] <= scale)
                            || (k + 1 < 2 * l && n.moduli[k + 1] - n.moduli[k] <= scale))
                });
                if hypothesis_fails {
                    set.flagged.push(FlaggedCell {
                        center: cell_center(g, ix, iy),
                        reason: FlagReason::NeighbouringModulusTie,
                    });
                }
            }
        }
    }
    set.cells.sort();
    set.cells.dedup();
    for points in assemble(&segs, &pos) {
        set.arcs.push(Arc {
            label,
            r,
            level: Some(k),
            points,
        });
    }
    set
}

/// `Lambda`: arcs where `|z_L| = |z_{L+1}|`.
pub fn lambda_open(scan: &ScanGrid) -> ArcSet {
    let l = scan.block_dim();
    equal_modulus_arcs(scan, l, SetLabel::Lambda, None, &|_| true)
}

/// Modulus slack in the side conditions of `Lambda_r`.
pub const LAMBDA_R_TOL: f64 = 1e-9;

/// `Lambda_r`: `|z_{L-r}| = |z_{L-r+1}| >= 1` and `|z_{L-r-1}| <= 1`.
pub fn lambda_r(scan: &ScanGrid, r: usize) -> ArcSet {
    let l = scan.block_dim();
    if r >= l {
        return ArcSet::default();
    }
    let k = l - r;
    let keep = move |n: &NodeData| {
        let pair = 0.5 * (n.moduli[k - 1] + n.moduli[k]);
        pair >= 1.0 - LAMBDA_R_TOL && (k < 2 || n.moduli[k - 2] <= 1.0 + LAMBDA_R_TOL)
    };
    let mut set = equal_modulus_arcs(scan, k, SetLabel::LambdaR, Some(r), &keep);
    // Arc ends sitting on the unit circle belong to Sigma_r as well.
    for arc in &set.arcs {
        for end in [arc.points[0], *arc.points.last().expect("nonempty")] {
            let n = scan.evaluate(end);
            if !n.masked && (0.5 * (n.moduli[k - 1] + n.moduli[k]) - 1.0).abs() <= 2.0 * scan.h {
                set.overlap.push(end);
            }
        }
    }
    set
}

// Omega_r -------------------------------------------------------------------

/// Whether `Wind^E(H) > -r`.
pub fn omega_r_membership(coeffs: &CoefficientTriple, e: C64, r: usize) -> Result<bool> {
    Ok(winding_number(coeffs, e, 512)? > -(r as i64))
}

/// Cells on the discrete boundary of `Omega_r`: corners with different
/// membership, or member corners with different counts of eigenvalues
/// outside the unit disk (a crack of `Sigma` inside `Omega_r`).
pub fn omega_r_boundary_cells(scan: &ScanGrid, r: usize) -> Vec<(usize, usize)> {
    let l = scan.block_dim();
    let mut cells = Vec::new();
    for iy in 0..scan.ny - 1 {
        for ix in 0..scan.nx - 1 {
            let corners = [
                scan.node(ix, iy),
                scan.node(ix + 1, iy),
                scan.node(ix + 1, iy + 1),
                scan.node(ix, iy + 1),
            ];
            if corners.iter().any(|n| !n.usable()) {
                continue;
            }
            let member: Vec<bool> = corners.iter().map(|n| n.outside < l + r).collect();
            let mixed = member.iter().any(|&m| m != member[0]);
            let crack = member.iter().all(|&m| m)
                && corners.iter().any(|n| n.outside != corners[0].outside);
            if mixed || crack {
                cells.push((ix, iy));
            }
        }
    }
    cells
}
