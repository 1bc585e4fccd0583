//! Neural models of the cell: concentration surrogate, aging-parameter
//! identification and state-of-health regression.

pub mod data;
pub mod identification;
pub mod oracle;
mod error;
pub mod report;
pub mod soh;
pub mod surrogate;
pub mod voltage;
pub mod window;

pub use error::{Error, Result};
