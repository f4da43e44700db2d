use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{self, C64};
use crate::operators::{eval_symbol, CoefficientTriple};
use crate::parallel::{map_indexed, Parallelism};
use crate::transfer::{self, match_values, SpectralTolerances};

/// Axis-aligned rectangle in the complex energy plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Region {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let r = Self {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn square(half_width: f64) -> Self {
        Self {
            re_min: -half_width,
            re_max: half_width,
            im_min: -half_width,
            im_max: half_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|x| x.is_finite())
            && self.re_max > self.re_min
            && self.im_max > self.im_min;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSize(format!("degenerate region {self:?}")))
        }
    }

    pub fn contains(&self, e: C64) -> bool {
        e.re >= self.re_min && e.re <= self.re_max && e.im >= self.im_min && e.im <= self.im_max
    }

    /// Whether `e` lies at least `margin` inside the rectangle.
    pub fn contains_inner(&self, e: C64, margin: f64) -> bool {
        e.re >= self.re_min + margin
            && e.re <= self.re_max - margin
            && e.im >= self.im_min + margin
            && e.im <= self.im_max - margin
    }
}

/// Transfer-spectrum summary at one grid node.
#[derive(Debug, Clone)]
pub struct NodeData {
    pub energy: C64,
    /// Eigenvalues sorted strictly by modulus (no tie-break relabeling).
    pub values: Vec<C64>,
    pub moduli: Vec<f64>,
    pub degenerate: bool,
    pub tied: bool,
    pub masked: bool,
    /// Number of eigenvalues with modulus above one.
    pub outside: usize,
}

impl NodeData {
    /// Usable in sign logic.
    pub fn usable(&self) -> bool {
        !self.masked && !self.degenerate
    }

    /// `|I^E_{>,r}|`.
    pub fn dominant_len(&self, r: usize) -> usize {
        let l = self.values.len() / 2;
        let lo = (l + 1).saturating_sub(r).max(1);
        self.moduli[lo - 1..].iter().filter(|&&m| m > 1.0).count()
    }
}

pub(crate) fn evaluate_node(
    coeffs: &CoefficientTriple,
    e: C64,
    tol: &SpectralTolerances,
) -> NodeData {
    match transfer::ordered_spectrum_with(coeffs, e, tol) {
        Ok(spec) => {
            let mut values = spec.values.clone();
            values.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
            let moduli: Vec<f64> = values.iter().map(|z| z.norm()).collect();
            let outside = moduli.iter().filter(|&&m| m > 1.0).count();
            NodeData {
                energy: e,
                values,
                moduli,
                degenerate: spec.degenerate,
                tied: !spec.tie_groups.is_empty(),
                masked: false,
                outside,
            }
        }
        Err(_) => NodeData {
            energy: e,
            values: vec![],
            moduli: vec![],
            degenerate: false,
            tied: false,
            masked: true,
            outside: 0,
        },
    }
}

/// Transfer data on a uniform `nx x ny` node lattice.
#[derive(Debug, Clone)]
pub struct ScanGrid {
    pub coeffs: CoefficientTriple,
    pub region: Region,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    /// `max(hx, hy)`.
    pub h: f64,
    pub r: usize,
    pub tolerances: SpectralTolerances,
    pub mode: Parallelism,
    /// Row-major over `(ix, iy)`: index `iy * nx + ix`.
    pub nodes: Vec<NodeData>,
    /// Branch permutation along the edge `(ix, iy) -> (ix + 1, iy)`.
    pub perm_x: Vec<Option<Vec<usize>>>,
    /// Branch permutation along the edge `(ix, iy) -> (ix, iy + 1)`.
    pub perm_y: Vec<Option<Vec<usize>>>,
}

impl ScanGrid {
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn node(&self, ix: usize, iy: usize) -> &NodeData {
        &self.nodes[self.index(ix, iy)]
    }

    pub fn point(&self, ix: usize, iy: usize) -> C64 {
        grid_point(&self.region, self.nx, self.ny, ix, iy)
    }

    pub fn block_dim(&self) -> usize {
        self.coeffs.dim()
    }

    pub fn masked_fraction(&self) -> f64 {
        self.nodes.iter().filter(|n| n.masked).count() as f64 / self.nodes.len() as f64
    }

    pub fn degenerate_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.degenerate).count()
    }

    /// Fresh node evaluation at an arbitrary energy with the scan's tolerances.
    pub fn evaluate(&self, e: C64) -> NodeData {
        evaluate_node(&self.coeffs, e, &self.tolerances)
    }
}

pub(crate) fn grid_point(region: &Region, nx: usize, ny: usize, ix: usize, iy: usize) -> C64 {
    let re = region.re_min + (region.re_max - region.re_min) * ix as f64 / (nx - 1) as f64;
    let im = region.im_min + (region.im_max - region.im_min) * iy as f64 / (ny - 1) as f64;
    C64::new(re, im)
}

/// Evaluates ordered transfer spectra on the grid and the branch matching
/// along every grid edge.
pub fn scan_grid(
    coeffs: &CoefficientTriple,
    region: Region,
    nx: usize,
    ny: usize,
    r: usize,
    mode: Parallelism,
) -> Result<ScanGrid> {
    scan_grid_with(
        coeffs,
        region,
        nx,
        ny,
        r,
        SpectralTolerances::default(),
        mode,
    )
}

pub fn scan_grid_with(
    coeffs: &CoefficientTriple,
    region: Region,
    nx: usize,
    ny: usize,
    r: usize,
    tolerances: SpectralTolerances,
    mode: Parallelism,
) -> Result<ScanGrid> {
    region.validate()?;
    if nx < 16 || ny < 16 {
        return Err(Error::InvalidSize(format!("grid {nx}x{ny} is below 16x16")));
    }
    if r > coeffs.dim() {
        return Err(Error::InvalidSize(format!(
            "r = {r} exceeds L = {}",
            coeffs.dim()
        )));
    }
    let nodes = map_indexed(nx * ny, mode, |k| {
        evaluate_node(
            coeffs,
            grid_point(&region, nx, ny, k % nx, k / nx),
            &tolerances,
        )
    });
    let edge = |a: &NodeData, b: &NodeData| {
        if a.masked || b.masked {
            None
        } else {
            Some(match_values(&a.values, &b.values))
        }
    };
    let perm_x = map_indexed(nx * ny, mode, |k| {
        let (ix, iy) = (k % nx, k / nx);
        if ix + 1 < nx {
            edge(&nodes[k], &nodes[iy * nx + ix + 1])
        } else {
            None
        }
    });
    let perm_y = map_indexed(nx * ny, mode, |k| {
        let iy = k / nx;
        if iy + 1 < ny {
            edge(&nodes[k], &nodes[k + nx])
        } else {
            None
        }
    });
    let hx = (region.re_max - region.re_min) / (nx - 1) as f64;
    let hy = (region.im_max - region.im_min) / (ny - 1) as f64;
    Ok(ScanGrid {
        coeffs: coeffs.clone(),
        region,
        nx,
        ny,
        hx,
        hy,
        h: hx.max(hy),
        r,
        tolerances,
        mode,
        nodes,
        perm_x,
        perm_y,
    })
}

/// Eigenvalues of `H(e^{i theta})` on a uniform grid of `theta_samples` angles.
pub fn sigma_periodic(
    coeffs: &CoefficientTriple,
    theta_samples: usize,
    mode: Parallelism,
) -> Result<Vec<C64>> {
    if theta_samples < 64 {
        return Err(Error::InvalidSize(
            "at least 64 angle samples are needed".into(),
        ));
    }
    let blocks = map_indexed(theta_samples, mode, |k| {
        let z = C64::from_polar(
            1.0,
            2.0 * std::f64::consts::PI * k as f64 / theta_samples as f64,
        );
        eval_symbol(coeffs, z).and_then(|h| numkernel::eigenvalues(&h))
    });
    let mut out = Vec::with_capacity(theta_samples * coeffs.dim());
    for b in blocks {
        out.extend(b?);
    }
    Ok(out)
}
