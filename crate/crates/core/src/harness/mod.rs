//! Ensembles of simulations compared against the macroscopic equations.

pub mod config;
pub mod convergence;
pub mod ensemble;
pub mod studies;

pub use config::{cosine_pair, rotating_profiles, uniform_checkpoints, DriftPolicy, ExperimentConfig, ReferenceKind};
pub use convergence::{
    compare_ensembles, log_log_slope, run_convergence_study, run_convergence_study_with, sign_convention,
    ComparisonReport, DistanceRow, DriftResolution, SignConvention, SizeResult,
};
pub use ensemble::{
    average_profiles, distance, project, project_grid, replica_seed, simulate_ensemble, Ensemble, Norm, ReplicaRun,
};
pub use studies::{
    residual_study_from_ensembles, run_martingale_study, run_martingale_study_with, run_weak_residual_study,
    run_weak_residual_study_with, MartingaleReport, MartingaleStats, ResidualReport, ResidualRow,
};
