pub mod acceptance;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod kernels;
pub mod lattice;
pub mod oracle;
pub mod rng;
pub mod state;
pub mod theory;
pub mod tracer;

pub use error::{Error, Result};
