//! Robust scalar-on-function linear regression.

pub mod config;
pub mod error;
pub mod flm;
pub mod floc;
pub mod funcspace;
pub mod influence;
pub mod io;
pub mod ppfpca;
pub mod mmreg;
pub mod quadrature;
pub mod rho;
pub mod scales;
pub mod select;
pub mod simlab;

pub use error::{Error, Result};
