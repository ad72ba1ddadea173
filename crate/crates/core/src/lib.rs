pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod fracderiv;
pub mod fracpath;
pub mod linalg;
pub mod mesh;
pub mod oracle;
pub mod problems;
pub mod quadrature;
pub mod sparse;
pub mod timestep;
pub mod validate;

pub use error::{FemError, Result};
