pub mod error;
pub mod elliptic;
pub mod isomonodromy;
pub mod joyce;
pub mod numerics;
pub mod spectral;
pub mod tau;
pub mod cli;

pub use error::{Error, Result};
