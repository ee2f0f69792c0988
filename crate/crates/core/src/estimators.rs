//! The generalized LASSO / Dantzig selector family indexed by a target matrix `A`.
//!
//! For a design `X` (n x p) and response `Y`, the per-coordinate scale is
//! `xi_j = (1/n) [G (X'X)^+ G]_jj` with `G = A'A`, and `Xi = diag(xi^(1/2))`.
//! The surrogate response is `Y_A = A (X'X)^+ X'Y`. The penalized estimator solves
//!
//! ```text
//! minimize ||Y_A - A b||^2 + 2 lambda ||Xi b||_1
//! ```
//!
//! and the constrained one solves `min ||b||_1  s.t.  ||Xi^-1 A'(Y_A - A b)||_inf <= lambda`.
//! Coordinates with `xi_j = 0` are fixed at zero in both.

use crate::error::{Error, Result};
use crate::linalg::{default_rtol, gram, norm2_sq, norm_inf, numerical_rank, pseudo_inverse, Matrix};
use crate::solvers::{
    l1_min_linf_constrained, soft_threshold, solve_quadratic, CdOptions, QuadraticLasso, SolveDiagnostics,
};

/// Labeled design, response and optional unlabeled design.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    x: Matrix,
    y: Vec<f64>,
    z: Option<Matrix>,
    sigma: f64,
    /// Column factors `s_j` applied by [`RegressionProblem::normalize`]; `X_norm = X diag(s)`.
    scale: Option<Vec<f64>>,
}

impl RegressionProblem {
    pub fn new(x: Matrix, y: Vec<f64>, z: Option<Matrix>, sigma: f64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::dim(format!(
                "design has {} rows but response has {} entries",
                x.rows(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("response contains non-finite values"));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("sigma must be finite and >= 0"));
        }
        if let Some(z) = &z {
            if z.cols() != x.cols() {
                return Err(Error::dim("unlabeled design must have the same columns as X"));
            }
            if z.rows() <= x.rows() {
                return Err(Error::dim(format!(
                    "unlabeled design needs m > n rows (m = {}, n = {})",
                    z.rows(),
                    x.rows()
                )));
            }
        }
        Ok(RegressionProblem {
            x,
            y,
            z,
            sigma,
            scale: None,
        })
    }

    /// Rescales columns so that `X_j'X_j / n = 1`; the same factors are applied to `Z`.
    pub fn normalize(mut self) -> Result<Self> {
        let n = self.n() as f64;
        let g = gram(&self.x);
        let mut s = Vec::with_capacity(self.p());
        for (j, d) in g.diag().into_iter().enumerate() {
            if d <= 0.0 {
                return Err(Error::invalid(format!("column {j} of X is identically zero")));
            }
            s.push((n / d).sqrt());
        }
        self.x = self.x.scale_columns(&s);
        self.z = self.z.map(|z| z.scale_columns(&s));
        let prev = self.scale.take();
        self.scale = Some(match prev {
            Some(p) => p.iter().zip(&s).map(|(a, b)| a * b).collect(),
            None => s,
        });
        Ok(self)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> Option<&Matrix> {
        self.z.as_ref()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn m(&self) -> Option<usize> {
        self.z.as_ref().map(Matrix::rows)
    }

    pub fn is_normalized(&self) -> bool {
        self.scale.is_some()
    }

    pub fn column_scale(&self) -> Option<&[f64]> {
        self.scale.as_deref()
    }

    /// Maps coefficients fitted on the normalized design back to the original columns.
    pub fn to_original_scale(&self, beta: &[f64]) -> Vec<f64> {
        match &self.scale {
            Some(s) => beta.iter().zip(s).map(|(b, s)| b * s).collect(),
            None => beta.to_vec(),
        }
    }

    pub fn rtol(&self) -> f64 {
        default_rtol(self.n(), self.p())
    }
}

/// Which linear functional of `beta` the estimator is tuned for.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `A = X`
    Denoising,
    /// `A = sqrt(n/m) Z`
    Transductive,
    /// `A = sqrt(n) I`
    Estimation,
    Custom(Matrix),
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Denoising => "denoise",
            Objective::Transductive => "transductive",
            Objective::Estimation => "estimate",
            Objective::Custom(_) => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    GeneralizedLasso,
    GeneralizedDantzig,
    SoftThresholdLse,
}

#[derive(Debug, Clone)]
pub struct ScalingInfo {
    pub xi: Vec<f64>,
    pub gram_a: Matrix,
    pub pinv_gram_x: Matrix,
}

impl ScalingInfo {
    /// Indices with `xi_j > 0` (relative to the largest entry).
    pub fn active(&self) -> Vec<usize> {
        let top = self.xi.iter().fold(0.0_f64, |a, &b| a.max(b));
        let floor = 1e-12 * top;
        (0..self.xi.len())
            .filter(|&j| top > 0.0 && self.xi[j] > floor)
            .collect()
    }

    /// Diagonal of `Xi`, i.e. `xi_j^(1/2)`.
    pub fn xi_sqrt(&self) -> Vec<f64> {
        self.xi.iter().map(|v| v.sqrt()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub objective: Objective,
    pub method: Method,
    pub diagnostics: SolveDiagnostics,
    pub kkt_infinity_norm: f64,
    /// `false` when the numerical ranks suggest `Ker(A) != Ker(X)`.
    pub kernel_consistent: bool,
}

impl Estimate {
    pub fn active_set(&self) -> Vec<usize> {
        (0..self.beta.len()).filter(|&j| self.beta[j] != 0.0).collect()
    }
}

fn x_gram_invertible(x: &Matrix, rtol: f64) -> Result<bool> {
    Ok(numerical_rank(&gram(x), rtol)? == x.cols())
}

pub fn target_matrix(problem: &RegressionProblem, objective: &Objective) -> Result<Matrix> {
    match objective {
        Objective::Denoising => Ok(problem.x().clone()),
        Objective::Transductive => {
            let z = problem.z().ok_or(Error::MissingUnlabeled)?;
            let ratio = problem.n() as f64 / z.rows() as f64;
            Ok(z.scaled(ratio.sqrt()))
        }
        Objective::Estimation => {
            if !x_gram_invertible(problem.x(), problem.rtol())? {
                return Err(Error::Singular);
            }
            Ok(Matrix::identity(problem.p()).scaled((problem.n() as f64).sqrt()))
        }
        Objective::Custom(a) => {
            if a.cols() != problem.p() {
                return Err(Error::dim(format!(
                    "custom target has {} columns, design has {}",
                    a.cols(),
                    problem.p()
                )));
            }
            Ok(a.clone())
        }
    }
}

/// `xi_j = (1/n) [G (X'X)^+ G]_jj` for `G = A'A`.
pub fn compute_scaling(x: &Matrix, a: &Matrix, rtol: f64) -> Result<ScalingInfo> {
    compute_scaling_from_gram(x, gram(a), rtol)
}

pub fn compute_scaling_from_gram(x: &Matrix, gram_a: Matrix, rtol: f64) -> Result<ScalingInfo> {
    if gram_a.rows() != x.cols() {
        return Err(Error::dim("target Gram matrix does not match design width"));
    }
    let n = x.rows() as f64;
    let pinv = pseudo_inverse(&gram(x), rtol)?;
    let pg = pinv.matmul(&gram_a)?;
    let p = x.cols();
    let xi = (0..p)
        .map(|j| {
            let v: f64 = (0..p).map(|k| gram_a[(j, k)] * pg[(k, j)]).sum::<f64>() / n;
            v.max(0.0)
        })
        .collect();
    Ok(ScalingInfo {
        xi,
        gram_a,
        pinv_gram_x: pinv,
    })
}

/// `Y_A = A (X'X)^+ X'Y`.
pub fn surrogate_response(x: &Matrix, y: &[f64], a: &Matrix, rtol: f64) -> Result<Vec<f64>> {
    let pinv = pseudo_inverse(&gram(x), rtol)?;
    let v = pinv.matvec(&x.t_matvec(y));
    Ok(a.matvec(&v))
}

/// Everything about a (problem, objective) pair that does not depend on lambda.
#[derive(Debug, Clone)]
pub struct PreparedFit {
    pub objective: Objective,
    pub target: Matrix,
    pub scaling: ScalingInfo,
    /// `(X'X)^+ X'Y`
    pub v: Vec<f64>,
    pub surrogate: Vec<f64>,
    pub active: Vec<usize>,
    kernel_consistent: bool,
    p: usize,
}

impl PreparedFit {
    pub fn new(problem: &RegressionProblem, objective: &Objective) -> Result<Self> {
        let rtol = problem.rtol();
        let target = target_matrix(problem, objective)?;
        let scaling = compute_scaling(problem.x(), &target, rtol)?;
        let v = scaling.pinv_gram_x.matvec(&problem.x().t_matvec(problem.y()));
        let surrogate = target.matvec(&v);
        let active = scaling.active();
        let gx = gram(problem.x());
        let rank_x = numerical_rank(&gx, rtol)?;
        let rank_a = numerical_rank(&scaling.gram_a, rtol)?;
        let rank_stacked = numerical_rank(&gx.add(&scaling.gram_a)?, rtol)?;
        Ok(PreparedFit {
            objective: objective.clone(),
            target,
            scaling,
            v,
            surrogate,
            active,
            kernel_consistent: rank_x == rank_a && rank_x == rank_stacked,
            p: problem.p(),
        })
    }

    /// `Xi^-1 A'(Y_A - A b)` on the active coordinates.
    fn weighted_correlation(&self, beta: &[f64]) -> Vec<f64> {
        let g = &self.scaling.gram_a;
        let diff: Vec<f64> = self.v.iter().zip(beta).map(|(a, b)| a - b).collect();
        let corr = g.matvec(&diff);
        self.active
            .iter()
            .map(|&j| corr[j] / self.scaling.xi[j].sqrt())
            .collect()
    }

    pub fn feasibility_residual(&self, beta: &[f64]) -> f64 {
        norm_inf(&self.weighted_correlation(beta))
    }

    /// Smallest lambda at which both estimators return zero.
    /// Whether `Ker(A) = Ker(X)` held numerically.
    pub fn is_kernel_consistent(&self) -> bool {
        self.kernel_consistent
    }

    pub fn lambda_max(&self) -> f64 {
        self.feasibility_residual(&vec![0.0; self.p])
    }

    /// The LASSO in `gamma = Xi b` coordinates restricted to the active set.
    pub fn reduced_lasso(&self) -> QuadraticLasso {
        let g = &self.scaling.gram_a;
        let w: Vec<f64> = self.active.iter().map(|&j| self.scaling.xi[j].sqrt()).collect();
        let k = self.active.len();
        let gram_b = Matrix::from_fn(k, k, |a, b| g[(self.active[a], self.active[b])] / (w[a] * w[b]));
        let gv = g.matvec(&self.v);
        let corr = self.active.iter().zip(&w).map(|(&j, wj)| gv[j] / wj).collect();
        QuadraticLasso {
            gram: gram_b,
            corr,
            yty: norm2_sq(&self.surrogate),
        }
    }

    fn expand(&self, gamma: &[f64]) -> Vec<f64> {
        let mut beta = vec![0.0; self.p];
        for (&j, &gj) in self.active.iter().zip(gamma) {
            beta[j] = gj / self.scaling.xi[j].sqrt();
        }
        beta
    }

    pub fn fit_lasso(&self, lambda: f64, opts: &CdOptions) -> Result<Estimate> {
        let reduced = self.reduced_lasso();
        let mut local = opts.clone();
        if let Some(w) = &opts.warm_start {
            local.warm_start = Some(
                self.active
                    .iter()
                    .map(|&j| w[j] * self.scaling.xi[j].sqrt())
                    .collect(),
            );
        }
        if let Some(order) = &opts.order {
            let pos: Vec<usize> = order
                .iter()
                .filter_map(|j| self.active.iter().position(|a| a == j))
                .collect();
            local.order = Some(pos);
        }
        let (gamma, diagnostics) = solve_quadratic(&reduced, lambda, &local)?;
        let beta = self.expand(&gamma);
        Ok(Estimate {
            kkt_infinity_norm: self.feasibility_residual(&beta),
            beta,
            lambda,
            objective: self.objective.clone(),
            method: Method::GeneralizedLasso,
            diagnostics,
            kernel_consistent: self.kernel_consistent,
        })
    }

    pub fn fit_dantzig(&self, lambda: f64) -> Result<Estimate> {
        let g = &self.scaling.gram_a;
        let k = self.active.len();
        let w: Vec<f64> = self.active.iter().map(|&j| self.scaling.xi[j].sqrt()).collect();
        let m = Matrix::from_fn(k, k, |a, b| g[(self.active[a], self.active[b])] / w[a]);
        let gv = g.matvec(&self.v);
        let c: Vec<f64> = self.active.iter().zip(&w).map(|(&j, wj)| gv[j] / wj).collect();
        let (sub, diagnostics) = l1_min_linf_constrained(&m, &c, lambda).map_err(|e| match e {
            Error::Infeasible(r) => Error::invalid(format!(
                "internal: Dantzig program reported infeasible (residual {r:e}) although (X'X)^+X'Y is feasible"
            )),
            other => other,
        })?;
        let mut beta = vec![0.0; self.p];
        for (&j, b) in self.active.iter().zip(sub) {
            beta[j] = b;
        }
        Ok(Estimate {
            kkt_infinity_norm: self.feasibility_residual(&beta),
            beta,
            lambda,
            objective: self.objective.clone(),
            method: Method::GeneralizedDantzig,
            diagnostics,
            kernel_consistent: self.kernel_consistent,
        })
    }
}

pub fn fit_generalized_lasso(
    problem: &RegressionProblem,
    objective: &Objective,
    lambda: f64,
) -> Result<Estimate> {
    fit_generalized_lasso_with(problem, objective, lambda, &CdOptions::default())
}

pub fn fit_generalized_lasso_with(
    problem: &RegressionProblem,
    objective: &Objective,
    lambda: f64,
    opts: &CdOptions,
) -> Result<Estimate> {
    PreparedFit::new(problem, objective)?.fit_lasso(lambda, opts)
}

pub fn fit_generalized_dantzig(
    problem: &RegressionProblem,
    objective: &Objective,
    lambda: f64,
) -> Result<Estimate> {
    PreparedFit::new(problem, objective)?.fit_dantzig(lambda)
}

/// Least squares followed by coordinatewise soft-thresholding at `lambda * Xi_jj / n`,
/// with `Xi` taken for `A = sqrt(n) I`.
pub fn soft_threshold_lse(problem: &RegressionProblem, lambda: f64) -> Result<Estimate> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be >= 0"));
    }
    let prep = PreparedFit::new(problem, &Objective::Estimation)?;
    let n = problem.n() as f64;
    let beta: Vec<f64> = prep
        .v
        .iter()
        .zip(&prep.scaling.xi)
        .map(|(&b, &xi)| soft_threshold(b, lambda * xi.sqrt() / n))
        .collect();
    Ok(Estimate {
        kkt_infinity_norm: prep.feasibility_residual(&beta),
        beta,
        lambda,
        objective: Objective::Estimation,
        method: Method::SoftThresholdLse,
        diagnostics: SolveDiagnostics {
            iterations: 1,
            final_kkt_residual: 0.0,
            converged: true,
        },
        kernel_consistent: prep.kernel_consistent,
    })
}

/// `||Xi^-1 A'(Y_A - A b)||_inf` over the coordinates with `xi_j > 0`.
pub fn dantzig_feasibility_residual(problem: &RegressionProblem, a: &Matrix, beta: &[f64]) -> Result<f64> {
    let prep = PreparedFit::new(problem, &Objective::Custom(a.clone()))?;
    if beta.len() != problem.p() {
        return Err(Error::dim("beta length does not match design width"));
    }
    Ok(prep.feasibility_residual(beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inverse, norm1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_problem(n: usize, p: usize, m: Option<usize>, seed: u64) -> RegressionProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = m.unwrap_or(n);
        let z = Matrix::from_fn(rows, p, |_, _| rng.sample(StandardNormal));
        let x = z.top_rows(n);
        let y = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0)
            .collect();
        RegressionProblem::new(x, y, m.map(|_| z), 1.0).unwrap()
    }

    /// Columns are orthogonal with `X'X = n I`.
    fn orthonormal_problem(seed: u64) -> RegressionProblem {
        // Hadamard-type 4x4 design scaled so each column has squared norm n = 4
        let h = Matrix::from_rows(&[
            vec![1.0, 1.0, 1.0, 1.0],
            vec![1.0, -1.0, 1.0, -1.0],
            vec![1.0, 1.0, -1.0, -1.0],
            vec![1.0, -1.0, -1.0, 1.0],
        ])
        .unwrap();
        let x = h.select_columns(&[0, 1, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = (0..4)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * 4.0)
            .collect();
        RegressionProblem::new(x, y, None, 1.0).unwrap()
    }

    #[test]
    fn target_matrices() {
        let prob = random_problem(7, 3, Some(10), 1);
        assert_eq!(target_matrix(&prob, &Objective::Denoising).unwrap(), *prob.x());
        let a = target_matrix(&prob, &Objective::Estimation).unwrap();
        assert_eq!(a, Matrix::identity(3).scaled(7f64.sqrt()));
        let t = target_matrix(&prob, &Objective::Transductive).unwrap();
        let z = prob.z().unwrap();
        for i in 0..10 {
            for j in 0..3 {
                assert!((t[(i, j)] - 0.7f64.sqrt() * z[(i, j)]).abs() < 1e-15);
            }
        }
        let no_z = random_problem(7, 3, None, 1);
        assert_eq!(
            target_matrix(&no_z, &Objective::Transductive),
            Err(Error::MissingUnlabeled)
        );
        let wide = random_problem(4, 6, None, 2);
        assert_eq!(target_matrix(&wide, &Objective::Estimation), Err(Error::Singular));
    }

    #[test]
    fn scaling_is_one_for_normalized_denoising() {
        let prob = random_problem(10, 4, None, 3).normalize().unwrap();
        let s = compute_scaling(prob.x(), prob.x(), prob.rtol()).unwrap();
        assert!(s.xi.iter().all(|&v| (v - 1.0).abs() < 1e-8));
        // also when p > n
        let wide = random_problem(5, 8, None, 4).normalize().unwrap();
        let s = compute_scaling(wide.x(), wide.x(), wide.rtol()).unwrap();
        assert!(s.xi.iter().all(|&v| (v - 1.0).abs() < 1e-8), "{:?}", s.xi);
    }

    #[test]
    fn scaling_for_estimation_target() {
        let prob = random_problem(10, 4, None, 5);
        let a = Matrix::identity(4).scaled(10f64.sqrt());
        let s = compute_scaling(prob.x(), &a, prob.rtol()).unwrap();
        let inv = inverse(&gram(prob.x())).unwrap();
        for j in 0..4 {
            assert!((s.xi[j] - 10.0 * inv[(j, j)]).abs() < 1e-10 * s.xi[j]);
        }
    }

    #[test]
    fn scaling_for_unnormalized_denoising() {
        let prob = random_problem(10, 4, None, 6);
        let s = compute_scaling(prob.x(), prob.x(), prob.rtol()).unwrap();
        let g = gram(prob.x());
        // explicit product (X'X)(X'X)^+(X'X) / n
        let prod = g.matmul(&inverse(&g).unwrap()).unwrap().matmul(&g).unwrap();
        for j in 0..4 {
            assert!((s.xi[j] - prod[(j, j)] / 10.0).abs() < 1e-9 * s.xi[j]);
            assert!((s.xi[j] - g[(j, j)] / 10.0).abs() < 1e-9 * s.xi[j]);
        }
    }

    #[test]
    fn surrogate_examples() {
        let prob = random_problem(9, 3, None, 7);
        let x = prob.x();
        let g = gram(x);
        let ginv = inverse(&g).unwrap();
        let lse = ginv.matvec(&x.t_matvec(prob.y()));
        let proj = x.matvec(&lse);
        let ys = surrogate_response(x, prob.y(), x, prob.rtol()).unwrap();
        for (a, b) in ys.iter().zip(&proj) {
            assert!((a - b).abs() < 1e-10);
        }
        let a = Matrix::identity(3).scaled(3.0);
        let ys = surrogate_response(x, prob.y(), &a, prob.rtol()).unwrap();
        for (a, b) in ys.iter().zip(&lse) {
            assert!((a - 3.0 * b).abs() < 1e-10);
        }
        // response orthogonal to the columns of X
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let ys = surrogate_response(&x, &[0.0, 0.0, 5.0], &x, 1e-10).unwrap();
        assert!(ys.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lasso_zero_above_null_threshold() {
        let prob = random_problem(7, 8, Some(10), 8).normalize().unwrap();
        for obj in [Objective::Denoising, Objective::Transductive] {
            let prep = PreparedFit::new(&prob, &obj).unwrap();
            let est = prep.fit_lasso(prep.lambda_max(), &CdOptions::default()).unwrap();
            assert!(est.beta.iter().all(|&v| v == 0.0));
            let ds = prep.fit_dantzig(prep.lambda_max() * 1.0001).unwrap();
            assert!(norm1(&ds.beta) < 1e-12);
        }
    }

    #[test]
    fn denoising_matches_plain_lasso() {
        let prob = random_problem(15, 6, None, 9).normalize().unwrap();
        let est = fit_generalized_lasso(&prob, &Objective::Denoising, 2.0).unwrap();
        let (direct, _) =
            crate::solvers::coordinate_descent_lasso(prob.x(), prob.y(), 2.0, &CdOptions::default()).unwrap();
        for (a, b) in est.beta.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(est.kkt_infinity_norm <= 2.0 + 1e-6);
    }

    #[test]
    fn estimation_matches_soft_threshold_lse() {
        let prob = random_problem(12, 4, None, 10);
        for lam in [0.0, 0.5, 2.0, 10.0, 1e6] {
            let a = fit_generalized_lasso(&prob, &Objective::Estimation, lam).unwrap();
            let b = soft_threshold_lse(&prob, lam).unwrap();
            for (x, y) in a.beta.iter().zip(&b.beta) {
                assert!((x - y).abs() < 1e-8, "lambda {lam}: {x} vs {y}");
            }
        }
        let lse = soft_threshold_lse(&prob, 0.0).unwrap();
        let g = gram(prob.x());
        let direct = inverse(&g).unwrap().matvec(&prob.x().t_matvec(prob.y()));
        for (a, b) in lse.beta.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(soft_threshold_lse(&prob, 1e9)
            .unwrap()
            .beta
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn soft_threshold_lse_on_orthonormal_design() {
        let prob = orthonormal_problem(11);
        let xty = prob.x().t_matvec(prob.y());
        let lam = 1.3;
        let est = soft_threshold_lse(&prob, lam).unwrap();
        for j in 0..3 {
            let expected = soft_threshold(xty[j] / 4.0, lam / 4.0);
            assert!((est.beta[j] - expected).abs() < 1e-12);
        }
        assert!(matches!(
            soft_threshold_lse(&random_problem(3, 5, None, 1), 1.0),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn dantzig_on_orthonormal_design_is_separable() {
        let prob = orthonormal_problem(12);
        let xty = prob.x().t_matvec(prob.y());
        for lam in [0.1, 1.0, 3.0] {
            let est = fit_generalized_dantzig(&prob, &Objective::Denoising, lam).unwrap();
            for j in 0..3 {
                let expected = soft_threshold(xty[j], lam) / 4.0;
                assert!((est.beta[j] - expected).abs() < 1e-9);
            }
            assert!(est.kkt_infinity_norm <= lam + 1e-9);
        }
    }

    #[test]
    fn residual_certificates() {
        let prob = random_problem(10, 5, None, 13).normalize().unwrap();
        let lam = 1.5;
        let lasso = fit_generalized_lasso(&prob, &Objective::Denoising, lam).unwrap();
        let r = dantzig_feasibility_residual(&prob, prob.x(), &lasso.beta).unwrap();
        assert!(r <= lam + 1e-6);
        let ds = fit_generalized_dantzig(&prob, &Objective::Denoising, lam).unwrap();
        let r = dantzig_feasibility_residual(&prob, prob.x(), &ds.beta).unwrap();
        assert!(r <= lam + 1e-9);
        assert!(norm1(&ds.beta) <= norm1(&lasso.beta) + 1e-8);
        let zero = vec![0.0; 5];
        let at_zero = dantzig_feasibility_residual(&prob, prob.x(), &zero).unwrap();
        let prep = PreparedFit::new(&prob, &Objective::Denoising).unwrap();
        assert!(at_zero <= prep.lambda_max() + 1e-12);
    }

    #[test]
    fn zero_target_column_is_excluded() {
        let prob = random_problem(10, 3, None, 14);
        let mut a = prob.x().clone();
        for i in 0..a.rows() {
            a[(i, 2)] = 0.0;
        }
        let est = fit_generalized_lasso(&prob, &Objective::Custom(a.clone()), 0.5).unwrap();
        assert_eq!(est.beta[2], 0.0);
        assert!(!est.kernel_consistent);
        let ds = fit_generalized_dantzig(&prob, &Objective::Custom(a), 0.5).unwrap();
        assert_eq!(ds.beta[2], 0.0);
    }

    #[test]
    fn normalization_round_trip() {
        let raw = random_problem(8, 3, Some(12), 15);
        let prob = raw.clone().normalize().unwrap();
        let g = gram(prob.x());
        for j in 0..3 {
            assert!((g[(j, j)] / 8.0 - 1.0).abs() < 1e-12);
        }
        let beta = vec![1.0, -2.0, 0.5];
        let orig = prob.to_original_scale(&beta);
        let a = prob.x().matvec(&beta);
        let b = raw.x().matvec(&orig);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn problem_validation() {
        let x = Matrix::zeros(3, 2);
        assert!(RegressionProblem::new(x.clone(), vec![0.0; 2], None, 1.0).is_err());
        assert!(RegressionProblem::new(x.clone(), vec![0.0; 3], Some(Matrix::zeros(3, 2)), 1.0).is_err());
        assert!(RegressionProblem::new(x.clone(), vec![0.0; 3], None, -1.0).is_err());
        let p = RegressionProblem::new(x, vec![0.0; 3], None, 1.0).unwrap();
        assert!(p.normalize().is_err());
    }
}
