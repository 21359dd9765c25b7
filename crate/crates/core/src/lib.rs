//! Cox proportional hazards estimation for large survival datasets:
//! whole-data partial likelihood, uniform Poisson subsampling, and the
//! moment-assisted subsampling correction with its plug-in variance.

pub mod cox;
pub mod data;
pub mod error;
pub mod linalg;
pub mod mcox;
pub mod moments;
pub mod pipeline;
pub mod reduce;
pub mod subsample;

pub use error::{CoxError, Result};
pub use pipeline::{run_mcox, McoxConfig, McoxRun, MomentChoice, PhaseTimings};
