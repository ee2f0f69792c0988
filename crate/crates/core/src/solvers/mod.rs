//! Numerical back-ends: cyclic coordinate descent for l1-penalized least squares and
//! a dense two-phase simplex for the l1-minimization linear programs.
//!
//! Penalty convention: every solver-level `lambda` multiplies `2 * ||.||_1`, so the
//! LASSO objective is `||y - B g||^2 + 2 lambda ||g||_1`.

mod cd;
mod simplex;

pub use cd::{
    coordinate_descent_lasso, kkt_violation, lasso_path, lasso_path_quadratic, soft_threshold,
    solve_quadratic, CdOptions, QuadraticLasso,
};
pub use simplex::{l1_min_linf_constrained, simplex_lp, LpProblem};

/// Per-call solver report.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    /// Sweeps for coordinate descent, pivots for the simplex.
    pub iterations: usize,
    pub final_kkt_residual: f64,
    pub converged: bool,
}
