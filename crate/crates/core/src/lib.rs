//! Generalized LASSO and Dantzig selector estimators with a target matrix `A`,
//! their two-step transductive variants, and Monte Carlo tooling to check the
//! accompanying risk bounds and reproduce the benchmark comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimators;
pub mod linalg;
pub mod sim;
pub mod solvers;
pub mod theory;
pub mod transductive;

pub use error::{Error, Result};
pub use estimators::{
    dantzig_feasibility_residual, fit_generalized_dantzig, fit_generalized_lasso, soft_threshold_lse,
    Estimate, Method, Objective, PreparedFit, RegressionProblem, ScalingInfo,
};
pub use linalg::Matrix;
pub use sim::{ExperimentConfig, PerfSummary, ReplicationResult};
pub use solvers::{CdOptions, LpProblem, SolveDiagnostics};
pub use theory::{ConeSpec, CoverageReport, RestrictedConstantReport};
pub use transductive::{two_step_fit, ProximityReport, StageMethod, TwoStepConfig, TwoStepFit, Weighting};
