//! Multiscale Robin coupled solver for Darcy flow in high-contrast media.

pub mod downscale;
pub mod error;
pub mod field;
pub mod flux;
pub mod grid;
pub mod linalg;
pub mod mrcm;
pub mod output;
pub mod spaces;
pub mod subdomain_solver;
pub mod transport;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
