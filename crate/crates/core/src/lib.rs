pub mod analysis;
pub mod boundary;
pub mod error;
pub mod export;
pub mod integrator;
pub mod levinson;
pub mod liouville;
pub mod magnus;
pub mod phase;
pub mod phase_search;
pub mod pipeline;
pub mod potential;
pub mod quadrature;

pub use error::{Error, Result};
