//! Fairness post-processing: pick a group fairness criterion from a moral
//! assessment, then find the utility-maximizing decision rule that satisfies
//! a relaxed version of it.

pub mod assessment;
pub mod cli;
pub mod error;
pub mod frontier;
pub mod io;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod scorer;

pub use error::{Error, Result};
