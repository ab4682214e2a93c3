//! Total least squares: solver, exact condition numbers, cheap bounds and
//! first-order perturbation validation.

pub mod cli;
pub mod cond_bounds;
pub mod cond_exact;
pub mod error;
pub mod generators;
pub mod io;
pub mod linalg;
pub mod perturb_lab;
pub mod problem;
pub mod report;
pub mod tables;
pub mod tls;

pub use error::{Result, TlsError};
pub use problem::TlsProblem;
