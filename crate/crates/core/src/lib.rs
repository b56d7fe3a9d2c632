pub mod cli;
pub mod config;
pub mod elliptic;
pub mod error;
pub mod exponential;
pub mod format;
pub mod graph;
pub mod green;
pub mod laplacian;
pub mod quadrature;
pub mod series;
pub mod spectral;

pub use elliptic::{EllipticContext, TorusPoint};
pub use error::{Error, Result};
pub use graph::{Direction, GraphSpec, IsoradialGraph};
