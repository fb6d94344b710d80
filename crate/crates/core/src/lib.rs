//! Finite-difference ground truth, a branch/trunk neural operator for the
//! American put pricing map, and empirical audits of the approximation
//! machinery behind it.
//!
//! Numerical types are generic over [`Scalar`]; the `*64` aliases below fix
//! them to `f64`, which is what the pipeline and file formats use.

pub mod boundary;
pub mod error;
pub mod fd;
pub mod neural;
pub mod operator;
pub mod oracles;
pub mod pou;
mod scalar;
pub mod sde;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type GridSpec64 = fd::GridSpec<f64>;
pub type MarketParams64 = fd::MarketParams<f64>;
pub type PutPayoff64 = fd::PutPayoff<f64>;
pub type PriceSurface64 = fd::PriceSurface<f64>;
pub type OperatorModel64 = operator::OperatorModel<f64>;
pub type SurfaceDataset64 = operator::SurfaceDataset<f64>;
pub type ExerciseBoundary64 = boundary::ExerciseBoundary<f64>;
pub type PathBatch64 = sde::PathBatch<f64>;
