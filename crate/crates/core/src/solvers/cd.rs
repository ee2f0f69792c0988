use super::SolveDiagnostics;
use crate::error::{Error, Result};
use crate::linalg::{dot, gram, Matrix};

/// `sgn(z) * max(|z| - t, 0)`. Ties at `|z| == t` give zero.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdOptions {
    /// Stop once the largest coordinate change in a sweep falls below this (and KKT holds).
    pub tol: f64,
    pub tol_kkt: f64,
    pub max_sweeps: usize,
    pub warm_start: Option<Vec<f64>>,
    /// Coordinate visiting order; `None` is `0..p`.
    pub order: Option<Vec<usize>>,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions {
            tol: 1e-9,
            tol_kkt: 1e-7,
            max_sweeps: 100_000,
            warm_start: None,
            order: None,
        }
    }
}

impl CdOptions {
    pub fn with_warm_start(mut self, start: Vec<f64>) -> Self {
        self.warm_start = Some(start);
        self
    }

    fn validate(&self, p: usize) -> Result<()> {
        if !(self.tol > 0.0) || !(self.tol_kkt > 0.0) {
            return Err(Error::invalid("coordinate descent tolerances must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps must be at least 1"));
        }
        if let Some(w) = &self.warm_start {
            if w.len() != p {
                return Err(Error::dim(format!(
                    "warm start has {} entries, need {p}",
                    w.len()
                )));
            }
        }
        if let Some(order) = &self.order {
            let mut seen = vec![false; p];
            for &j in order {
                if j >= p || seen[j] {
                    return Err(Error::invalid("coordinate order must be a permutation"));
                }
                seen[j] = true;
            }
            if order.len() != p {
                return Err(Error::invalid("coordinate order must be a permutation"));
            }
        }
        Ok(())
    }
}

/// A LASSO instance in covariance form: `||y - B g||^2` is represented by
/// `B'B`, `B'y` and `y'y`, which is all coordinate descent needs.
#[derive(Debug, Clone)]
pub struct QuadraticLasso {
    pub gram: Matrix,
    pub corr: Vec<f64>,
    pub yty: f64,
}

impl QuadraticLasso {
    pub fn from_design(b: &Matrix, y: &[f64]) -> Result<Self> {
        if b.rows() != y.len() {
            return Err(Error::dim(format!(
                "design has {} rows, response has {}",
                b.rows(),
                y.len()
            )));
        }
        Ok(QuadraticLasso {
            gram: gram(b),
            corr: b.t_matvec(y),
            yty: dot(y, y),
        })
    }

    pub fn dim(&self) -> usize {
        self.corr.len()
    }

    /// `B'(y - B g)`
    pub fn gradient_corr(&self, g: &[f64]) -> Vec<f64> {
        let bg = self.gram.matvec(g);
        self.corr.iter().zip(&bg).map(|(c, q)| c - q).collect()
    }

    /// `||y - B g||^2 + 2 lambda ||g||_1`, expanded through the Gram matrix.
    pub fn objective(&self, g: &[f64], lambda: f64) -> f64 {
        let q = self.gram.matvec(g);
        self.yty - 2.0 * dot(&self.corr, g) + dot(g, &q) + 2.0 * lambda * crate::linalg::norm1(g)
    }

    /// Null threshold: zero is optimal for every `lambda >= ||B'y||_inf`.
    pub fn lambda_max(&self) -> f64 {
        crate::linalg::norm_inf(&self.corr)
    }
}

/// Largest subgradient-condition violation at `g`.
pub fn kkt_violation(problem: &QuadraticLasso, g: &[f64], lambda: f64) -> f64 {
    let grad = problem.gradient_corr(g);
    grad.iter()
        .zip(g)
        .enumerate()
        .map(|(j, (&gj, &bj))| {
            if problem.gram[(j, j)] <= 0.0 {
                0.0
            } else if bj == 0.0 {
                (gj.abs() - lambda).max(0.0)
            } else {
                (gj - lambda * bj.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Cyclic coordinate descent on a covariance-form LASSO.
///
/// Columns with a zero diagonal entry are pinned at zero.
pub fn solve_quadratic(
    problem: &QuadraticLasso,
    lambda: f64,
    opts: &CdOptions,
) -> Result<(Vec<f64>, SolveDiagnostics)> {
    let p = problem.dim();
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    opts.validate(p)?;
    let g = &problem.gram;
    let mut beta = opts.warm_start.clone().unwrap_or_else(|| vec![0.0; p]);
    for j in 0..p {
        if g[(j, j)] <= 0.0 {
            beta[j] = 0.0;
        }
    }
    let default_order: Vec<usize> = (0..p).collect();
    let order = opts.order.as_deref().unwrap_or(&default_order);
    let mut q = g.matvec(&beta);
    let mut prev_obj = problem.objective(&beta, lambda);
    let mut kkt = f64::INFINITY;

    for sweep in 1..=opts.max_sweeps {
        let mut max_delta: f64 = 0.0;
        for &j in order {
            let gjj = g[(j, j)];
            if gjj <= 0.0 {
                continue;
            }
            let z = problem.corr[j] - q[j] + gjj * beta[j];
            let next = soft_threshold(z, lambda) / gjj;
            let delta = next - beta[j];
            if delta != 0.0 {
                beta[j] = next;
                let row = g.row(j);
                for (qk, &gk) in q.iter_mut().zip(row) {
                    *qk += delta * gk;
                }
                max_delta = max_delta.max(delta.abs());
            }
        }

        let obj = problem.objective(&beta, lambda);
        debug_assert!(
            obj <= prev_obj + 1e-10 * (1.0 + prev_obj.abs()),
            "coordinate descent objective increased: {prev_obj} -> {obj}"
        );
        prev_obj = obj;

        if max_delta < opts.tol {
            q = g.matvec(&beta);
            kkt = kkt_violation(problem, &beta, lambda);
            if kkt <= opts.tol_kkt {
                return Ok((
                    beta,
                    SolveDiagnostics {
                        iterations: sweep,
                        final_kkt_residual: kkt,
                        converged: true,
                    },
                ));
            }
        }
    }
    if kkt.is_infinite() {
        kkt = kkt_violation(problem, &beta, lambda);
    }
    Ok((
        beta,
        SolveDiagnostics {
            iterations: opts.max_sweeps,
            final_kkt_residual: kkt,
            converged: kkt <= opts.tol_kkt,
        },
    ))
}

/// Minimizes `||y - B g||^2 + 2 lambda ||g||_1`.
pub fn coordinate_descent_lasso(
    b: &Matrix,
    y: &[f64],
    lambda: f64,
    opts: &CdOptions,
) -> Result<(Vec<f64>, SolveDiagnostics)> {
    let problem = QuadraticLasso::from_design(b, y)?;
    solve_quadratic(&problem, lambda, opts)
}

/// Warm-started path over a descending grid.
pub fn lasso_path_quadratic(
    problem: &QuadraticLasso,
    lambdas: &[f64],
    opts: &CdOptions,
) -> Result<Vec<(Vec<f64>, SolveDiagnostics)>> {
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("lambda grid must be sorted in descending order"));
    }
    let mut out = Vec::with_capacity(lambdas.len());
    let mut local = opts.clone();
    for &lambda in lambdas {
        let (beta, diag) = solve_quadratic(problem, lambda, &local)?;
        local.warm_start = Some(beta.clone());
        out.push((beta, diag));
    }
    Ok(out)
}

pub fn lasso_path(
    b: &Matrix,
    y: &[f64],
    lambdas: &[f64],
    opts: &CdOptions,
) -> Result<Vec<(Vec<f64>, SolveDiagnostics)>> {
    let problem = QuadraticLasso::from_design(b, y)?;
    lasso_path_quadratic(&problem, lambdas, opts)
}
