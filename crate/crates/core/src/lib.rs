//! Physics layer for lithium-ion aging analysis.
//!
//! Holds the single-particle-model-with-electrolyte (SPMe) vocabulary: cell
//! and aging parameters, open-circuit potential tables, the terminal-voltage
//! law, capacity relations, normalization, the full-order finite-volume
//! solver with dataset generation, and the reduced-order ODE residuals used
//! as physics constraints.

pub mod capacity;
pub mod config;
pub mod constants;
mod error;
pub mod kinetics;
pub mod normalize;
pub mod ocp;
pub mod params;
pub mod reduced;
pub mod solver;

pub use error::{Error, Result};
pub use kinetics::{terminal_voltage, BoundaryState};
pub use normalize::{NormalizationSpec, Range, Variable};
pub use ocp::{OcpCurve, OcpPair};
pub use params::{AgingParameters, AgingRanges, CellParameters, Electrode, ElectrodeParameters};
