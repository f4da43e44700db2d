//! Model configuration files.
//!
//! Complex numbers are `[re, im]` pairs and matrices are arrays of rows:
//!
//! ```json
//! { "L": 1, "R": [[[1, 0]]], "T": [[[1, 0]]], "V": [[[0, 0]]], "case": "circulant" }
//! ```

use std::path::Path;

use blocktoep::limitsets::Region;
use blocktoep::{
    BoundaryCase, BoundaryTriple, CMatrix, CoefficientTriple, SpectralTolerances, C64,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;

pub const MIN_GRID: usize = 16;

fn default_region() -> Region {
    Region::square(3.0)
}

fn default_grid() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "Tolerances::default_degeneracy")]
    pub degeneracy: f64,
    #[serde(default = "Tolerances::default_tie")]
    pub tie: f64,
    /// Residual threshold for accepting refined outliers.
    #[serde(default = "Tolerances::default_refinement")]
    pub refinement: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion_radius: Option<f64>,
}

impl Tolerances {
    fn default_degeneracy() -> f64 {
        1e-8
    }
    fn default_tie() -> f64 {
        1e-6
    }
    fn default_refinement() -> f64 {
        1e-10
    }

    pub fn spectral(&self) -> SpectralTolerances {
        SpectralTolerances {
            degeneracy: self.degeneracy,
            tie: self.tie,
            ..Default::default()
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            degeneracy: Self::default_degeneracy(),
            tie: Self::default_tie(),
            refinement: Self::default_refinement(),
            exclusion_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "R")]
    pub r: MatrixLiteral,
    #[serde(rename = "T")]
    pub t: MatrixLiteral,
    #[serde(rename = "V")]
    pub v: MatrixLiteral,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixLiteral>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixLiteral>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<MatrixLiteral>,
    pub case: BoundaryCase,
    #[serde(default = "default_region")]
    pub region: Region,
    #[serde(default = "default_grid")]
    pub nx: usize,
    #[serde(default = "default_grid")]
    pub ny: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

/// A validated model ready for the numerical pipelines.
#[derive(Debug, Clone)]
pub struct Model {
    pub coeffs: CoefficientTriple,
    pub boundary: BoundaryTriple,
    pub warnings: Vec<String>,
}

pub fn matrix_literal(m: &CMatrix) -> MatrixLiteral {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn to_matrix(name: &str, lit: &MatrixLiteral, l: usize) -> Result<CMatrix, CliError> {
    if lit.len() != l || lit.iter().any(|row| row.len() != l) {
        return Err(CliError::BadConfig(format!("{name} must be {l}x{l}")));
    }
    let rows: Vec<Vec<C64>> = lit
        .iter()
        .map(|row| row.iter().map(|&[re, im]| C64::new(re, im)).collect())
        .collect();
    CMatrix::from_rows(&rows).map_err(|e| CliError::BadConfig(format!("{name}: {e}")))
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::BadConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::BadConfig(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks shapes, grid and tolerances, builds the operator blocks and
    /// compares the case tag with the matrices.
    pub fn build(&self) -> Result<Model, CliError> {
        let l = self.l;
        if l == 0 {
            return Err(CliError::BadConfig("L must be positive".into()));
        }
        if let Some(n) = self.n {
            if n < 2 {
                return Err(CliError::BadConfig("N must be at least 2".into()));
            }
        }
        self.region
            .validate()
            .map_err(|e| CliError::BadConfig(e.to_string()))?;
        if self.nx < MIN_GRID || self.ny < MIN_GRID {
            return Err(CliError::BadConfig(format!(
                "grid {}x{} is below {MIN_GRID}x{MIN_GRID}",
                self.nx, self.ny
            )));
        }
        let tol = &self.tolerances;
        let positive = [tol.degeneracy, tol.tie, tol.refinement]
            .into_iter()
            .chain(tol.exclusion_radius)
            .all(|x| x.is_finite() && x > 0.0);
        if !positive {
            return Err(CliError::BadConfig("tolerances must be positive".into()));
        }

        let r = to_matrix("R", &self.r, l)?;
        let t = to_matrix("T", &self.t, l)?;
        let v = to_matrix("V", &self.v, l)?;
        let coeffs = CoefficientTriple::new(r.clone(), t.clone(), v.clone())
            .map_err(|e| CliError::BadConfig(format!("R and T must be invertible: {e}")))?;
        let given = |name: &str, m: &Option<MatrixLiteral>| {
            m.as_ref().map(|m| to_matrix(name, m, l)).transpose()
        };
        let (a, b, c) = (
            given("A", &self.a)?,
            given("B", &self.b)?,
            given("C", &self.c)?,
        );
        let zero = CMatrix::zeros(l, l);
        let require = |m: Option<CMatrix>, name: &str| {
            m.ok_or_else(|| CliError::BadConfig(format!("case {:?} requires {name}", self.case)))
        };
        let (a, b, c) = match self.case {
            BoundaryCase::Circulant => (
                a.unwrap_or_else(|| r.clone()),
                b.unwrap_or_else(|| t.clone()),
                c.unwrap_or_else(|| v.clone()),
            ),
            BoundaryCase::Open => (
                a.unwrap_or_else(|| zero.clone()),
                b.unwrap_or_else(|| zero.clone()),
                c.unwrap_or_else(|| v.clone()),
            ),
            BoundaryCase::Boundary => (
                a.unwrap_or_else(|| zero.clone()),
                b.unwrap_or_else(|| zero.clone()),
                require(c, "C")?,
            ),
            BoundaryCase::Perturbed => (
                require(a, "A")?,
                require(b, "B")?,
                c.unwrap_or_else(|| v.clone()),
            ),
            BoundaryCase::Custom => (
                a.unwrap_or_else(|| zero.clone()),
                b.unwrap_or_else(|| zero.clone()),
                c.unwrap_or_else(|| v.clone()),
            ),
        };

        let raw = BoundaryTriple::new(a.clone(), b.clone(), c.clone())
            .map_err(|e| CliError::BadConfig(e.to_string()))?;
        let mut warnings = Vec::new();
        let boundary = if raw.consistent_with(&coeffs, self.case) {
            match self.case {
                BoundaryCase::Circulant => BoundaryTriple::circulant(&coeffs),
                BoundaryCase::Open => BoundaryTriple::open(&coeffs),
                BoundaryCase::Boundary => BoundaryTriple::boundary(c),
                BoundaryCase::Perturbed => BoundaryTriple::perturbed(a, b, c)
                    .map_err(|e| CliError::BadConfig(e.to_string()))?,
                BoundaryCase::Custom => raw,
            }
        } else if self.case == BoundaryCase::Perturbed {
            return Err(CliError::BadConfig(
                "case perturbed requires an invertible B".into(),
            ));
        } else {
            warnings.push(format!(
                "case tag {:?} does not match the corner matrices; treating the model as custom",
                self.case
            ));
            raw
        };
        Ok(Model {
            coeffs,
            boundary,
            warnings,
        })
    }
}
