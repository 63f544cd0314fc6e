//! Density level-set clustering with instability diagnostics.
//!
//! The crate estimates densities with kernel density estimators, extracts
//! level sets and cluster trees from them, and measures how stable those
//! objects are under data splitting. The stability statistics drive
//! bandwidth and level selection; analytic mixture oracles and Monte Carlo
//! validators certify the estimators against known ground truth.

pub mod clustertree;
pub mod data;
pub mod error;
pub mod instability;
pub mod kde;
pub mod kernel;
pub mod levelset;
pub mod mixture;
pub mod numeric;
pub mod oracle;
pub mod points;
pub mod rng;

pub use error::{Error, Result};
pub use kde::{BinnedKde, DensityModel, EmpiricalKde, SmoothedOracle};
pub use kernel::{KernelFamily, KernelSpec};
pub use mixture::GaussianMixture;
pub use points::PointSet;
pub use rng::Rng;
