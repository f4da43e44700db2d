//! Limit spectra of block tridiagonal Toeplitz operators with corner
//! perturbations, computed from transfer-matrix spectral data.

pub mod asymptotics;
pub mod error;
pub mod fixtures;
pub mod limitsets;
pub mod matching;
pub mod numkernel;
pub mod operators;
pub mod parallel;
pub mod transfer;
pub mod widom;

pub use error::{Error, Result};
pub use numkernel::{CMatrix, C64};
pub use operators::{BoundaryCase, BoundaryTriple, CoefficientTriple, SpectrumMultiset};
pub use parallel::Parallelism;
pub use transfer::{IndexSet, SpectralTolerances, TieSplit, TransferSpectrum};
