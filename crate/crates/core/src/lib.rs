//! Estimation of interleaved randomized benchmarking parameters.

pub mod error;
pub mod fisher;
pub mod gatesim;
pub mod harness;
pub mod lsf;
pub mod model;
pub mod prior;
pub mod smc;

pub use error::{Error, Result};
pub use model::{Datum, ExperimentDesign, Mode, ModelParams};
pub use prior::PriorSpec;
