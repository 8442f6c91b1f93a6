//! Macroscopic functionals of microscopic configurations and trajectories.

pub mod functionals;
pub mod martingale;
pub mod residual;
pub mod testfn;

pub use functionals::{empirical_profile, fluctuation_term, generator_term, log_z, theta, EmpiricalProfile};
pub use martingale::{martingale_path, quadrature_grid, MartingalePath};
pub use residual::{weak_residual, CellDensity, WeakResidual};
pub use testfn::{default_family, SpeciesTestFunctions, TestFunction, TimeFactor};
