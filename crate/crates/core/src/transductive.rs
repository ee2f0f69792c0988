//! Two-step transductive estimation.
//!
//! Stage one fits a LASSO or Dantzig selector on the labeled pair `(X, Y)` and
//! extrapolates labels `checkY = Z b1` to the full design. Stage two refits
//! against `checkY` in the geometry of `Z`:
//!
//! ```text
//! lasso:    minimize (n/m) ||checkY - Z b||^2 + 2 lambda ||W b||_1
//! dantzig:  minimize ||b||_1  s.t.  ||(n/m) W^-1 Z'(checkY - Z b)||_inf <= lambda
//! ```
//!
//! with `W = I` (unit weighting) or `W = Xi` for `A = sqrt(n/m) Z`.

use crate::error::{Error, Result};
use crate::estimators::{compute_scaling_from_gram, Estimate, Method, Objective, RegressionProblem};
use crate::linalg::{gram, norm2_sq, norm_inf, Matrix};
use crate::solvers::{l1_min_linf_constrained, solve_quadratic, CdOptions, QuadraticLasso, SolveDiagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageMethod {
    Lasso,
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Unit,
    XiSqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub preliminary: StageMethod,
    pub transductive: StageMethod,
    pub weighting: Weighting,
    /// Stage-two level is `constraint_multiplier * lambda2`.
    pub constraint_multiplier: f64,
}

impl TwoStepConfig {
    /// Multiplier defaults to 20 for a LASSO second stage and 1 for a Dantzig one.
    pub fn new(lambda1: f64, lambda2: f64, preliminary: StageMethod, transductive: StageMethod) -> Self {
        TwoStepConfig {
            lambda1,
            lambda2,
            preliminary,
            transductive,
            weighting: Weighting::Unit,
            constraint_multiplier: match transductive {
                StageMethod::Lasso => 20.0,
                StageMethod::Dantzig => 1.0,
            },
        }
    }

    /// LASSO then Transductive LASSO at plain `lambda2`, unit weights.
    pub fn benchmark(lambda1: f64, lambda2: f64) -> Self {
        TwoStepConfig {
            constraint_multiplier: 1.0,
            ..Self::new(lambda1, lambda2, StageMethod::Lasso, StageMethod::Lasso)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0) || !(self.lambda2 >= 0.0) {
            return Err(Error::invalid("two-step lambdas must be >= 0"));
        }
        if !(self.constraint_multiplier > 0.0) {
            return Err(Error::invalid("constraint multiplier must be positive"));
        }
        Ok(())
    }
}

/// Plain LASSO (`||Y - X b||^2 + 2 lambda ||b||_1`) or Dantzig selector
/// (`||X'(Y - X b)||_inf <= lambda`) on the labeled sample.
pub fn preliminary_fit(
    problem: &RegressionProblem,
    lambda1: f64,
    method: StageMethod,
    opts: &CdOptions,
) -> Result<(Vec<f64>, SolveDiagnostics)> {
    let q = QuadraticLasso::from_design(problem.x(), problem.y())?;
    match method {
        StageMethod::Lasso => solve_quadratic(&q, lambda1, opts),
        StageMethod::Dantzig => l1_min_linf_constrained(&q.gram, &q.corr, lambda1),
    }
}

/// `checkY = Z b1` for the stage-one fit at `lambda1`.
pub fn preliminary_labels(
    problem: &RegressionProblem,
    lambda1: f64,
    method: StageMethod,
) -> Result<Vec<f64>> {
    let z = problem.z().ok_or(Error::MissingUnlabeled)?;
    let (beta, _) = preliminary_fit(problem, lambda1, method, &CdOptions::default())?;
    Ok(z.matvec(&beta))
}

/// Precomputed second-stage geometry for one unlabeled design.
#[derive(Debug, Clone)]
pub struct TransductiveStage {
    z: Matrix,
    ratio: f64,
    /// `(n/m) Z'Z`
    scaled_gram: Matrix,
    weights: Vec<f64>,
    active: Vec<usize>,
    reduced_gram: Matrix,
}

impl TransductiveStage {
    /// `z` holds all `m` points; its first `n` rows are the labeled design.
    pub fn new(z: &Matrix, n: usize, weighting: Weighting) -> Result<Self> {
        let m = z.rows();
        if n == 0 || n >= m {
            return Err(Error::dim(format!("need 0 < n < m, got n = {n}, m = {m}")));
        }
        let ratio = n as f64 / m as f64;
        let scaled_gram = gram(z).scaled(ratio);
        let weights = match weighting {
            Weighting::Unit => vec![1.0; z.cols()],
            Weighting::XiSqrt => {
                let x = z.top_rows(n);
                let rtol = crate::linalg::default_rtol(n, z.cols());
                compute_scaling_from_gram(&x, scaled_gram.clone(), rtol)?.xi_sqrt()
            }
        };
        let top = weights.iter().fold(0.0_f64, |a, &b| a.max(b));
        let active: Vec<usize> = (0..z.cols())
            .filter(|&j| scaled_gram[(j, j)] > 0.0 && weights[j] > 1e-12 * top)
            .collect();
        let reduced_gram = Matrix::from_fn(active.len(), active.len(), |a, b| {
            let (i, j) = (active[a], active[b]);
            scaled_gram[(i, j)] / (weights[i] * weights[j])
        });
        Ok(TransductiveStage {
            z: z.clone(),
            ratio,
            scaled_gram,
            weights,
            active,
            reduced_gram,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scaled_gram(&self) -> &Matrix {
        &self.scaled_gram
    }

    /// `(n/m) Z' checkY`
    pub fn target_correlation(&self, check_y: &[f64]) -> Vec<f64> {
        self.z.t_matvec(check_y).iter().map(|v| v * self.ratio).collect()
    }

    /// `||(n/m) W^-1 Z'(checkY - Z b)||_inf`, from a precomputed `(n/m) Z' checkY`.
    pub fn residual_from_corr(&self, corr: &[f64], beta: &[f64]) -> f64 {
        let qb = self.scaled_gram.matvec(beta);
        let r: Vec<f64> = self
            .active
            .iter()
            .map(|&j| (corr[j] - qb[j]) / self.weights[j])
            .collect();
        norm_inf(&r)
    }

    pub fn residual(&self, check_y: &[f64], beta: &[f64]) -> f64 {
        self.residual_from_corr(&self.target_correlation(check_y), beta)
    }

    /// Penalized stage in covariance form; `yty` only shifts the objective.
    pub fn lasso_from_corr(
        &self,
        corr: &[f64],
        yty: f64,
        lambda: f64,
        opts: &CdOptions,
    ) -> Result<(Vec<f64>, SolveDiagnostics)> {
        let problem = QuadraticLasso {
            gram: self.reduced_gram.clone(),
            corr: self.active.iter().map(|&j| corr[j] / self.weights[j]).collect(),
            yty,
        };
        let mut local = opts.clone();
        local.order = None;
        if let Some(w) = &opts.warm_start {
            local.warm_start = Some(self.active.iter().map(|&j| w[j] * self.weights[j]).collect());
        }
        let (gamma, diag) = solve_quadratic(&problem, lambda, &local)?;
        let mut beta = vec![0.0; self.weights.len()];
        for (&j, g) in self.active.iter().zip(gamma) {
            beta[j] = g / self.weights[j];
        }
        Ok((beta, diag))
    }

    pub fn dantzig_from_corr(&self, corr: &[f64], lambda: f64) -> Result<(Vec<f64>, SolveDiagnostics)> {
        let k = self.active.len();
        let m = Matrix::from_fn(k, k, |a, b| {
            let (i, j) = (self.active[a], self.active[b]);
            self.scaled_gram[(i, j)] / self.weights[i]
        });
        let c: Vec<f64> = self.active.iter().map(|&j| corr[j] / self.weights[j]).collect();
        let (sub, diag) = l1_min_linf_constrained(&m, &c, lambda)?;
        let mut beta = vec![0.0; self.weights.len()];
        for (&j, b) in self.active.iter().zip(sub) {
            beta[j] = b;
        }
        Ok((beta, diag))
    }

    pub fn lasso(&self, check_y: &[f64], lambda: f64, opts: &CdOptions) -> Result<Estimate> {
        let corr = self.target_correlation(check_y);
        let yty = self.ratio * norm2_sq(check_y);
        let (beta, diagnostics) = self.lasso_from_corr(&corr, yty, lambda, opts)?;
        Ok(self.estimate(beta, lambda, Method::GeneralizedLasso, diagnostics, &corr))
    }

    pub fn dantzig(&self, check_y: &[f64], lambda: f64) -> Result<Estimate> {
        let corr = self.target_correlation(check_y);
        let (beta, diagnostics) = self.dantzig_from_corr(&corr, lambda)?;
        Ok(self.estimate(beta, lambda, Method::GeneralizedDantzig, diagnostics, &corr))
    }

    fn estimate(
        &self,
        beta: Vec<f64>,
        lambda: f64,
        method: Method,
        diagnostics: SolveDiagnostics,
        corr: &[f64],
    ) -> Estimate {
        Estimate {
            kkt_infinity_norm: self.residual_from_corr(corr, &beta),
            beta,
            lambda,
            objective: Objective::Transductive,
            method,
            diagnostics,
            kernel_consistent: true,
        }
    }
}

fn check_stage_dims(check_y: &[f64], z: &Matrix, n: usize, m: usize) -> Result<()> {
    if z.rows() != m || check_y.len() != m {
        return Err(Error::dim(format!(
            "expected {m} unlabeled rows, got Z with {} rows and checkY with {}",
            z.rows(),
            check_y.len()
        )));
    }
    if n >= m {
        return Err(Error::dim("need n < m"));
    }
    Ok(())
}

/// Transductive LASSO at penalty level `lambda`.
pub fn fit_transductive_lasso(
    check_y: &[f64],
    z: &Matrix,
    n: usize,
    m: usize,
    lambda: f64,
    weighting: Weighting,
) -> Result<Estimate> {
    check_stage_dims(check_y, z, n, m)?;
    TransductiveStage::new(z, n, weighting)?.lasso(check_y, lambda, &CdOptions::default())
}

/// Transductive Dantzig selector at constraint level `lambda`.
pub fn fit_transductive_dantzig(
    check_y: &[f64],
    z: &Matrix,
    n: usize,
    m: usize,
    lambda: f64,
    weighting: Weighting,
) -> Result<Estimate> {
    check_stage_dims(check_y, z, n, m)?;
    TransductiveStage::new(z, n, weighting)?.dantzig(check_y, lambda)
}

#[derive(Debug, Clone)]
pub struct TwoStepFit {
    pub estimate: Estimate,
    pub lambda1: f64,
    pub lambda2: f64,
    pub stage_one: Vec<f64>,
    pub stage_one_diagnostics: SolveDiagnostics,
    pub check_y: Vec<f64>,
}

pub fn two_step_fit(problem: &RegressionProblem, cfg: &TwoStepConfig) -> Result<TwoStepFit> {
    cfg.validate()?;
    let z = problem.z().ok_or(Error::MissingUnlabeled)?;
    let opts = CdOptions::default();
    let (stage_one, stage_one_diagnostics) = preliminary_fit(problem, cfg.lambda1, cfg.preliminary, &opts)?;
    let check_y = z.matvec(&stage_one);
    let stage = TransductiveStage::new(z, problem.n(), cfg.weighting)?;
    let level = cfg.constraint_multiplier * cfg.lambda2;
    let estimate = match cfg.transductive {
        StageMethod::Lasso => stage.lasso(&check_y, level, &opts)?,
        StageMethod::Dantzig => stage.dantzig(&check_y, level)?,
    };
    Ok(TwoStepFit {
        estimate,
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        stage_one,
        stage_one_diagnostics,
        check_y,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityReport {
    /// `sup_{||u||_1 <= r} ||(X'X - (n/m) Z'Z) u||_inf`
    pub sup_value: f64,
    pub radius: f64,
    /// `(sigma / 10) sqrt(2 n log(p / eta))`
    pub threshold: f64,
    pub max_abs_delta: f64,
    pub satisfied: bool,
}

/// `X'X - (n/m) Z'Z`
pub fn gram_discrepancy(x: &Matrix, z: &Matrix) -> Result<Matrix> {
    let ratio = x.rows() as f64 / z.rows() as f64;
    gram(x).sub(&gram(z).scaled(ratio))
}

/// The supremum over the l1 ball is attained at a signed coordinate vector, so it
/// equals `radius * max_ij |Delta_ij|`.
pub fn check_design_proximity(
    x: &Matrix,
    z: &Matrix,
    radius: f64,
    sigma: f64,
    eta: f64,
) -> Result<ProximityReport> {
    if !(radius >= 0.0) {
        return Err(Error::invalid("radius must be >= 0"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid("eta must lie in (0, 1)"));
    }
    if x.cols() != z.cols() {
        return Err(Error::dim("X and Z column counts differ"));
    }
    let delta = gram_discrepancy(x, z)?;
    let max_abs_delta = delta.max_abs();
    let sup_value = radius * max_abs_delta;
    let n = x.rows() as f64;
    let p = x.cols() as f64;
    let threshold = sigma / 10.0 * (2.0 * n * (p / eta).ln()).sqrt();
    Ok(ProximityReport {
        sup_value,
        radius,
        threshold,
        max_abs_delta,
        satisfied: sup_value < threshold,
    })
}
