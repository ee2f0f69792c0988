//! Monte Carlo comparison of the LASSO against the two-step Transductive LASSO on
//! correlated Gaussian designs.
//!
//! Each replication draws `Z` (m x p) with AR(1) rows, takes `X` as the first `n`
//! rows, observes `Y = X b* + sigma e`, and fits
//!
//! * the LASSO path `b_L(lambda)` for every `lambda` in the grid, and
//! * the Transductive LASSO `b_TL(lambda1, lambda2)` for every pair in the grid,
//!   with stage one being `b_L(lambda1)`.
//!
//! `PERF(.)` is the best TL loss over the grid divided by the best LASSO loss.
//! Every `lambda1` also contributes its boundary member `b_TL(lambda1, 0) = b_L(lambda1)`,
//! so the TL family always contains the LASSO fits and `PERF <= 1`.

mod report;

pub use report::{write_histogram_csv, write_results_csv, write_summary_csv};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::RegressionProblem;
use crate::linalg::{ar1_covariance, cholesky, norm2_sq, sub_vec, Matrix};
use crate::solvers::{lasso_path_quadratic, CdOptions, QuadraticLasso};
use crate::transductive::{TransductiveStage, TwoStepConfig};

/// `(3, 1.5, 0, 0, 2, 0, 0, 0)`
pub const BETA_SPARSE: [f64; 8] = [3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0];
/// `(5, 0, 0, 0, 0, 0, 0, 0)`
pub const BETA_VERY_SPARSE: [f64; 8] = [5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];

pub const PERF_ZERO_GUARD: f64 = 1e-12;
pub const SUPPORT_ZERO_TOL: f64 = 1e-8;
pub const HISTOGRAM_BINS: usize = 20;

/// `{base^k : k = kmax, kmax-1, ..., kmin}` in descending order.
pub fn geometric_grid(base: f64, kmin: i32, kmax: i32) -> Vec<f64> {
    (kmin..=kmax).rev().map(|k| base.powi(k)).collect()
}

/// `{1.2^k : k = -50..30}`, descending.
pub fn default_grid() -> Vec<f64> {
    geometric_grid(1.2, -50, 30)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub rho: f64,
    pub sigma: f64,
    pub beta_star: Vec<f64>,
    /// Label used in summaries (`sparse`, `very-sparse`, `custom`).
    pub beta_star_id: String,
    pub grid: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub normalize: bool,
    /// Stage methods and weights for the TL sweep; its lambdas are ignored.
    pub two_step: TwoStepConfig,
    pub cd: CdOptions,
}

impl ExperimentConfig {
    pub fn new(n: usize, m: usize, rho: f64, sigma: f64, beta_star: Vec<f64>, beta_star_id: &str) -> Self {
        ExperimentConfig {
            n,
            m,
            p: beta_star.len(),
            rho,
            sigma,
            beta_star,
            beta_star_id: beta_star_id.to_string(),
            grid: default_grid(),
            replications: 100,
            seed: 0,
            normalize: false,
            two_step: TwoStepConfig::benchmark(0.0, 0.0),
            cd: CdOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::invalid("n and p must be positive"));
        }
        if self.m <= self.n {
            return Err(Error::invalid(format!(
                "need m > n (m = {}, n = {})",
                self.m, self.n
            )));
        }
        if self.beta_star.len() != self.p {
            return Err(Error::invalid("beta_star length differs from p"));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::invalid("rho must lie in (-1, 1)"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma must be finite and >= 0"));
        }
        if self.grid.is_empty() {
            return Err(Error::invalid("lambda grid is empty"));
        }
        if self.grid.iter().any(|&l| !(l >= 0.0) || !l.is_finite())
            || self.grid.windows(2).any(|w| w[1] > w[0])
        {
            return Err(Error::invalid(
                "lambda grid must be finite, >= 0 and sorted descending",
            ));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be >= 1"));
        }
        Ok(())
    }
}

/// Named Table-1 style scenarios.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let sparse = || BETA_SPARSE.to_vec();
    let cfg = match name {
        "table1-row1" => ExperimentConfig::new(7, 10, 0.5, 1.0, BETA_VERY_SPARSE.to_vec(), "very-sparse"),
        "table1-row2" => ExperimentConfig::new(7, 10, 0.5, 1.0, sparse(), "sparse"),
        "table1-row3" => ExperimentConfig::new(7, 20, 0.5, 1.0, sparse(), "sparse"),
        "table1-row4" => ExperimentConfig::new(20, 30, 0.5, 1.0, sparse(), "sparse"),
        "table1-row5" => ExperimentConfig::new(20, 30, 0.9, 1.0, sparse(), "sparse"),
        "table1-row6" => ExperimentConfig::new(20, 30, 0.5, 3.0, sparse(), "sparse"),
        "n20m120" => ExperimentConfig::new(20, 120, 0.5, 1.0, sparse(), "sparse"),
        _ => return None,
    };
    Some(cfg)
}

pub const PRESET_NAMES: [&str; 7] = [
    "table1-row1",
    "table1-row2",
    "table1-row3",
    "table1-row4",
    "table1-row5",
    "table1-row6",
    "n20m120",
];

/// Independent stream per `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rows i.i.d. `N(0, S)` with `S_ij = rho^|i-j|`, via
/// `x_1 = z_1`, `x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j`.
pub fn gen_design<R: Rng + ?Sized>(m: usize, p: usize, rho: f64, rng: &mut R) -> Matrix {
    let c = (1.0 - rho * rho).sqrt();
    let mut data = Vec::with_capacity(m * p);
    for _ in 0..m {
        let mut prev = 0.0;
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            let v = if j == 0 { z } else { rho * prev + c * z };
            data.push(v);
            prev = v;
        }
    }
    Matrix::from_vec(m, p, data).expect("generated entries are finite")
}

/// Same distribution as [`gen_design`], through `x = L z` with `L L' = S`.
pub fn gen_design_cholesky<R: Rng + ?Sized>(m: usize, p: usize, rho: f64, rng: &mut R) -> Result<Matrix> {
    let l = cholesky(&ar1_covariance(p, rho))?;
    let mut out = Matrix::zeros(m, p);
    for i in 0..m {
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let x = l.matvec(&z);
        for j in 0..p {
            out[(i, j)] = x[j];
        }
    }
    Ok(out)
}

/// `Y = X b* + sigma e`
pub fn gen_response<R: Rng + ?Sized>(x: &Matrix, beta_star: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    x.matvec(beta_star)
        .into_iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Lasso,
    TransductiveLasso,
    /// The `lambda2 -> 0` member of the TL family at a given `lambda1`.
    TransductiveBoundary,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::Lasso => "lasso",
            Estimator::TransductiveLasso => "tlasso",
            Estimator::TransductiveBoundary => "tlasso-boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub estimator: Estimator,
    /// LASSO lambda, or stage-one lambda for TL fits.
    pub lambda1: f64,
    pub lambda2: Option<f64>,
    pub beta: Vec<f64>,
    pub loss_x: f64,
    pub loss_z: f64,
    pub loss_beta: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub rep_index: usize,
    pub records: Vec<FitRecord>,
    pub support_recovery_lambda: Option<f64>,
    pub perf_i: f64,
    pub perf_x: f64,
    pub perf_z: f64,
    pub nonconverged: usize,
}

impl ReplicationResult {
    pub fn perf(&self, metric: PerfMetric) -> f64 {
        match metric {
            PerfMetric::I => self.perf_i,
            PerfMetric::X => self.perf_x,
            PerfMetric::Z => self.perf_z,
        }
    }

    pub fn lasso_records(&self) -> impl Iterator<Item = &FitRecord> {
        self.records.iter().filter(|r| r.estimator == Estimator::Lasso)
    }
}

struct Losses<'a> {
    x: &'a Matrix,
    z: &'a Matrix,
    beta_star: &'a [f64],
}

impl Losses<'_> {
    fn record(
        &self,
        estimator: Estimator,
        lambda1: f64,
        lambda2: Option<f64>,
        beta: Vec<f64>,
        converged: bool,
    ) -> FitRecord {
        let d = sub_vec(&beta, self.beta_star);
        FitRecord {
            estimator,
            lambda1,
            lambda2,
            loss_x: norm2_sq(&self.x.matvec(&d)),
            loss_z: norm2_sq(&self.z.matvec(&d)),
            loss_beta: norm2_sq(&d),
            beta,
            converged,
        }
    }
}

fn perf_ratio(num: f64, den: f64) -> f64 {
    if den < PERF_ZERO_GUARD {
        1.0
    } else {
        num / den
    }
}

/// One replication of the benchmark, fully determined by `(cfg.seed, rep_index)`.
pub fn run_replication(cfg: &ExperimentConfig, rep_index: usize) -> Result<ReplicationResult> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, rep_index as u64);
    let z_raw = gen_design(cfg.m, cfg.p, cfg.rho, &mut rng);
    let x_raw = z_raw.top_rows(cfg.n);
    let y = gen_response(&x_raw, &cfg.beta_star, cfg.sigma, &mut rng);
    let mut problem = RegressionProblem::new(x_raw.clone(), y, Some(z_raw.clone()), cfg.sigma)?;
    if cfg.normalize {
        problem = problem.normalize()?;
    }
    let x = problem.x();
    let z = problem.z().expect("constructed with Z");
    let losses = Losses {
        x: &x_raw,
        z: &z_raw,
        beta_star: &cfg.beta_star,
    };
    let to_orig = |b: &[f64]| problem.to_original_scale(b);

    let stage_one = QuadraticLasso::from_design(x, problem.y())?;
    let path = lasso_path_quadratic(&stage_one, &cfg.grid, &cfg.cd)?;
    let stage = TransductiveStage::new(z, cfg.n, cfg.two_step.weighting)?;
    let mult = cfg.two_step.constraint_multiplier;

    let mut records = Vec::with_capacity(cfg.grid.len() * (cfg.grid.len() + 2));
    let mut nonconverged = 0;
    for ((beta, diag), &lam) in path.iter().zip(&cfg.grid) {
        nonconverged += usize::from(!diag.converged);
        records.push(losses.record(Estimator::Lasso, lam, None, to_orig(beta), diag.converged));
    }

    for ((beta1, diag1), &lam1) in path.iter().zip(&cfg.grid) {
        // checkY = Z b1, so (n/m) Z' checkY = (n/m) Z'Z b1
        let corr = stage.scaled_gram().matvec(beta1);
        let yty = crate::linalg::dot(beta1, &corr);
        let mut warm: Option<Vec<f64>> = None;
        for &lam2 in &cfg.grid {
            let mut opts = cfg.cd.clone();
            opts.warm_start = warm.take();
            let (beta, diag) = stage.lasso_from_corr(&corr, yty, mult * lam2, &opts)?;
            nonconverged += usize::from(!diag.converged);
            records.push(losses.record(
                Estimator::TransductiveLasso,
                lam1,
                Some(lam2),
                to_orig(&beta),
                diag.converged,
            ));
            warm = Some(beta);
        }
        records.push(losses.record(
            Estimator::TransductiveBoundary,
            lam1,
            Some(0.0),
            to_orig(beta1),
            diag1.converged,
        ));
    }

    let best = |est: fn(Estimator) -> bool, f: fn(&FitRecord) -> f64| {
        records
            .iter()
            .filter(|r| est(r.estimator))
            .map(f)
            .fold(f64::INFINITY, f64::min)
    };
    let is_l = |e: Estimator| e == Estimator::Lasso;
    let is_tl = |e: Estimator| e != Estimator::Lasso;
    let perf_i = perf_ratio(best(is_tl, |r| r.loss_beta), best(is_l, |r| r.loss_beta));
    let perf_x = perf_ratio(best(is_tl, |r| r.loss_x), best(is_l, |r| r.loss_x));
    let perf_z = perf_ratio(best(is_tl, |r| r.loss_z), best(is_l, |r| r.loss_z));

    let lasso_betas: Vec<Vec<f64>> = path.iter().map(|(b, _)| to_orig(b)).collect();
    let support_recovery_lambda =
        support_recovery_lambda(&lasso_betas, &cfg.grid, &cfg.beta_star, SUPPORT_ZERO_TOL);

    Ok(ReplicationResult {
        rep_index,
        records,
        support_recovery_lambda,
        perf_i,
        perf_x,
        perf_z,
        nonconverged,
    })
}

/// All replications, in `rep_index` order regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReplicationResult>> {
    cfg.validate()?;
    (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, rep))
        .collect()
}

/// Smallest grid lambda whose estimated support equals `supp(b*)`.
pub fn support_recovery_lambda(
    path: &[Vec<f64>],
    grid: &[f64],
    beta_star: &[f64],
    zero_tol: f64,
) -> Option<f64> {
    let truth: Vec<bool> = beta_star.iter().map(|&b| b != 0.0).collect();
    path.iter()
        .zip(grid)
        .filter(|(beta, _)| beta.iter().map(|b| b.abs() > zero_tol).eq(truth.iter().copied()))
        .map(|(_, &lam)| lam)
        .fold(None, |acc: Option<f64>, lam| {
            Some(acc.map_or(lam, |a| a.min(lam)))
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerfMetric {
    I,
    X,
    Z,
}

impl PerfMetric {
    pub const ALL: [PerfMetric; 3] = [PerfMetric::I, PerfMetric::X, PerfMetric::Z];

    pub fn label(self) -> &'static str {
        match self {
            PerfMetric::I => "PERF(I)",
            PerfMetric::X => "PERF(X)",
            PerfMetric::Z => "PERF(Z)",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            PerfMetric::I => "perf_i",
            PerfMetric::X => "perf_x",
            PerfMetric::Z => "perf_z",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerfSummary {
    pub metric: PerfMetric,
    pub me: f64,
    pub q3: f64,
    pub histogram: Histogram,
}

/// Empirical quantile taking the lower neighbour: `sorted[floor(q (N - 1))]`.
pub fn quantile_lower(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = (q * (v.len() - 1) as f64).floor() as usize;
    v[idx.min(v.len() - 1)]
}

/// Equal-width bins over `[min, max]`; the last bin is closed on the right.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + width * k as f64 })
        .collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let k = if width > 0.0 {
            (((v - lo) / width).floor() as usize).min(bins - 1)
        } else {
            bins - 1
        };
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

pub fn summarize_metric(results: &[ReplicationResult], metric: PerfMetric) -> PerfSummary {
    let vals: Vec<f64> = results.iter().map(|r| r.perf(metric)).collect();
    PerfSummary {
        metric,
        me: vals.iter().sum::<f64>() / vals.len() as f64,
        q3: quantile_lower(&vals, 0.3),
        histogram: histogram(&vals, HISTOGRAM_BINS),
    }
}

/// ME, Q3 and histogram for PERF(I), PERF(X), PERF(Z).
pub fn summarize(results: &[ReplicationResult]) -> Result<[PerfSummary; 3]> {
    if results.is_empty() {
        return Err(Error::invalid("cannot summarize zero replications"));
    }
    let mut sorted: Vec<ReplicationResult> = results.to_vec();
    sorted.sort_by_key(|r| r.rep_index);
    Ok(PerfMetric::ALL.map(|m| summarize_metric(&sorted, m)))
}
