//! Semi-confirmatory factor analysis on uniform-block covariance structures.
//!
//! Variables are grouped into communities; each community loads on one
//! latent factor. The implied covariance is a uniform-block matrix, so
//! estimation, inference and factor scores all reduce to K×K algebra.

pub mod data;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod io;
pub mod par;
pub mod scores;
pub mod simulation;
pub mod ub;

pub use data::{DataMatrix, Membership};
pub use error::{Result, ScfaError};
pub use estimation::{estimate, estimate_with, Diagnostics, EstimateOptions, ScfaFit};
pub use inference::{wald_report, InferenceReport, Parameter, ParameterInference};
pub use par::Execution;
pub use scores::{score_fgls, score_gls, score_ols, FactorScoreMatrix};
pub use simulation::{run_study, run_study_with, GeneratorSpec, NoiseSpec, SimulationReport};
pub use ub::{LogDet, PartitionVector, Projection, UniformBlockMatrix};
