//! Weighted quasi-Monte Carlo estimation of separability-criterion probabilities
//! for random bipartite density matrices.

pub mod criteria;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod measures;
pub mod oracle_exact;
pub mod qmc_sequence;
pub mod run;
pub mod validate;
pub mod state_param;

pub use error::{Error, Result};
