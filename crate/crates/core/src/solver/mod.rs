//! Full-order finite-volume SPMe solver and dataset generation.

pub mod boundary;
pub mod dataset;
pub mod discharge;
pub mod electrolyte;
pub mod lhs;
pub mod solid;
mod tridiag;

pub use boundary::{complete_aging, derive_boundary_stoichiometry, BoundarySolution};
pub use dataset::{build_dataset, load_dataset, read_series, DatasetConfig, DatasetManifest, ManifestRow};
pub use discharge::{simulate_discharge, Series, SimRecord, SolverSettings};
pub use electrolyte::ElectrolyteGrid;
pub use lhs::latin_hypercube_sample;
pub use solid::SolidGrid;
