use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use tlasso::estimators::{Estimate, Objective, PreparedFit, RegressionProblem};
use tlasso::linalg::{gram, Matrix};
use tlasso::sim::{
    preset, run_experiment, summarize, write_histogram_csv, write_results_csv, write_summary_csv,
    ExperimentConfig, PRESET_NAMES,
};
use tlasso::solvers::CdOptions;
use tlasso::theory::{
    lemma1_coverage, prop4_sampling, restricted_constant, theorem_coverage_with_retry, uniform_population,
    write_coverage_csv, ConeSpec, CoverageReport, Lemma1Form, Theorem, TheoremOptions, TheoremReport,
    TheoremScenario,
};
use tlasso::transductive::{two_step_fit, StageMethod, TwoStepConfig, Weighting};

use crate::config;
use crate::error::{invalid, CliError, CliResult};
use crate::io::{create, read_matrix, read_vector, write_estimate, write_path};
use crate::{
    Claim, CommonVerify, DataArgs, FitArgs, FormArg, GramArg, MethodArg, ObjectiveArg, PathArgs,
    SimulateArgs, Switch, TargetArg, TheoremObjectiveArg, VerifyArgs, WeightingArg,
};

fn stage(m: MethodArg) -> StageMethod {
    match m {
        MethodArg::Lasso => StageMethod::Lasso,
        MethodArg::Dantzig => StageMethod::Dantzig,
    }
}

fn weighting(w: WeightingArg) -> Weighting {
    match w {
        WeightingArg::Unit => Weighting::Unit,
        WeightingArg::Xi => Weighting::XiSqrt,
    }
}

fn check_level(name: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and >= 0")))
    }
}

fn cd_options(d: &DataArgs) -> CliResult<CdOptions> {
    if !(d.tol > 0.0) || d.max_sweeps == 0 {
        return Err(invalid("tol and max-sweeps must be positive"));
    }
    Ok(CdOptions {
        tol: d.tol,
        max_sweeps: d.max_sweeps,
        ..CdOptions::default()
    })
}

fn load_problem(d: &DataArgs) -> CliResult<RegressionProblem> {
    let x = read_matrix(&d.x)?;
    let y = read_vector(&d.y)?;
    let z = d.unlabeled.as_deref().map(read_matrix).transpose()?;
    let problem = RegressionProblem::new(x, y, z, d.sigma)?;
    Ok(match d.normalize {
        Switch::On => problem.normalize()?,
        Switch::Off => problem,
    })
}

fn objective(d: &DataArgs, problem: &RegressionProblem) -> CliResult<Objective> {
    let which = d.objective.unwrap_or(ObjectiveArg::Denoise);
    if d.custom_a.is_some() && which != ObjectiveArg::Custom {
        return Err(invalid("--custom-a requires --objective custom"));
    }
    Ok(match which {
        ObjectiveArg::Denoise => Objective::Denoising,
        ObjectiveArg::Estimate => Objective::Estimation,
        ObjectiveArg::Transductive => {
            if problem.z().is_none() {
                return Err(invalid("--objective transductive requires --unlabeled"));
            }
            Objective::Transductive
        }
        ObjectiveArg::Custom => {
            let path = d
                .custom_a
                .as_deref()
                .ok_or_else(|| invalid("--objective custom requires --custom-a"))?;
            let a = read_matrix(path)?;
            if a.cols() != problem.p() {
                return Err(invalid(format!(
                    "custom A has {} columns but X has {}",
                    a.cols(),
                    problem.p()
                )));
            }
            match problem.column_scale() {
                Some(s) => Objective::Custom(a.scale_columns(s)),
                None => Objective::Custom(a),
            }
        }
    })
}

fn print_diagnostics(est: &Estimate, out: &Path) {
    println!("objective = {}", est.objective.name());
    println!("method = {:?}", est.method);
    println!("lambda = {}", est.lambda);
    println!("kkt_residual = {}", est.kkt_infinity_norm);
    println!("active_set_size = {}", est.active_set().len());
    println!("iterations = {}", est.diagnostics.iterations);
    println!("converged = {}", est.diagnostics.converged);
    println!("kernel_consistent = {}", est.kernel_consistent);
    println!("estimate = {}", out.display());
}

pub fn fit(a: &FitArgs) -> CliResult<()> {
    check_level("lambda", a.lambda)?;
    let problem = load_problem(&a.data)?;
    let opts = cd_options(&a.data)?;
    let (est, stage_one_ok) = match a.lambda2 {
        None => {
            let obj = objective(&a.data, &problem)?;
            let prep = PreparedFit::new(&problem, &obj)?;
            let est = match a.data.method {
                MethodArg::Lasso => prep.fit_lasso(a.lambda, &opts)?,
                MethodArg::Dantzig => prep.fit_dantzig(a.lambda)?,
            };
            (est, true)
        }
        Some(lambda2) => {
            check_level("lambda2", lambda2)?;
            if !matches!(a.data.objective, None | Some(ObjectiveArg::Transductive)) {
                return Err(invalid(
                    "the two-step fit (--lambda2) targets the transductive objective",
                ));
            }
            if problem.z().is_none() {
                return Err(invalid("--lambda2 requires --unlabeled"));
            }
            if !(a.multiplier > 0.0) || !a.multiplier.is_finite() {
                return Err(invalid("multiplier must be positive"));
            }
            let cfg = TwoStepConfig {
                weighting: weighting(a.weighting),
                constraint_multiplier: a.multiplier,
                ..TwoStepConfig::new(a.lambda, lambda2, stage(a.stage1), stage(a.data.method))
            };
            let fit = two_step_fit(&problem, &cfg)?;
            println!("lambda1 = {}", a.lambda);
            println!("stage_one_iterations = {}", fit.stage_one_diagnostics.iterations);
            println!("stage_one_converged = {}", fit.stage_one_diagnostics.converged);
            (fit.estimate, fit.stage_one_diagnostics.converged)
        }
    };
    write_estimate(&a.out, &problem.to_original_scale(&est.beta))?;
    print_diagnostics(&est, &a.out);
    if !est.diagnostics.converged || !stage_one_ok {
        return Err(CliError::NonConvergence(format!(
            "solver stopped after {} iterations with KKT residual {:e}",
            est.diagnostics.iterations, est.diagnostics.final_kkt_residual
        )));
    }
    Ok(())
}

pub fn path(a: &PathArgs) -> CliResult<()> {
    let grid = config::parse_grid(&a.grid)?;
    let problem = load_problem(&a.data)?;
    let obj = objective(&a.data, &problem)?;
    let opts = cd_options(&a.data)?;
    let prep = PreparedFit::new(&problem, &obj)?;
    let mut betas = Vec::with_capacity(grid.len());
    let mut nonconverged = 0;
    let mut warm: Option<Vec<f64>> = None;
    for &lambda in &grid {
        let est = match a.data.method {
            MethodArg::Lasso => {
                let o = match &warm {
                    Some(w) => opts.clone().with_warm_start(w.clone()),
                    None => opts.clone(),
                };
                prep.fit_lasso(lambda, &o)?
            }
            MethodArg::Dantzig => prep.fit_dantzig(lambda)?,
        };
        if !est.diagnostics.converged {
            nonconverged += 1;
        }
        betas.push(problem.to_original_scale(&est.beta));
        warm = Some(est.beta);
    }
    write_path(&a.out, &grid, &betas)?;
    println!("objective = {}", obj.name());
    println!("lambdas = {}", grid.len());
    println!("lambda_max = {}", prep.lambda_max());
    println!("nonconverged = {nonconverged}");
    println!("path = {}", a.out.display());
    if nonconverged > 0 {
        return Err(CliError::NonConvergence(format!(
            "{nonconverged} grid points did not converge"
        )));
    }
    Ok(())
}

fn set_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(invalid("threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn resolve_preset(name: &str) -> CliResult<ExperimentConfig> {
    let name = if name == "n20p8" { "table1-row4" } else { name };
    preset(name).ok_or_else(|| {
        invalid(format!(
            "unknown preset {name:?}; expected one of {} or n20p8",
            PRESET_NAMES.join(", ")
        ))
    })
}

/// Preset, then config file, then individual flags.
pub fn experiment_config(a: &SimulateArgs) -> CliResult<ExperimentConfig> {
    let mut kv = match &a.config {
        Some(p) => config::load(p)?,
        None => BTreeMap::new(),
    };
    let base = match (&a.preset, kv.remove("preset")) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p,
        (None, None) => {
            return Err(invalid(
                "simulate needs --preset or a config file with a preset key",
            ))
        }
    };
    let mut cfg = resolve_preset(&base)?;
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.insert(k.to_string(), v);
        }
    };
    set("n", a.n.map(|v| v.to_string()));
    set("m", a.m.map(|v| v.to_string()));
    set("rho", a.rho.map(|v| v.to_string()));
    set("sigma", a.sigma.map(|v| v.to_string()));
    set("beta_star", a.beta_star.clone());
    set("replications", a.replications.map(|v| v.to_string()));
    set("seed", a.seed.map(|v| v.to_string()));
    set(
        "normalize",
        a.normalize
            .map(|v| if v == Switch::On { "on" } else { "off" }.to_string()),
    );
    set("grid", a.grid.clone());
    set(
        "weighting",
        a.weighting
            .map(|w| if w == WeightingArg::Xi { "xi" } else { "unit" }.to_string()),
    );
    config::apply(&mut cfg, &kv)?;
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let cfg = experiment_config(a)?;
    set_threads(a.threads)?;
    let results = run_experiment(&cfg)?;
    eprintln!("replications completed: {}/{}", results.len(), cfg.replications);
    let summaries = summarize(&results)?;
    std::fs::create_dir_all(&a.out)?;
    write_file(&a.out.join("results.csv"), |w| write_results_csv(w, &results))?;
    write_file(&a.out.join("summary.csv"), |w| {
        write_summary_csv(w, &cfg, &summaries)
    })?;
    for s in &summaries {
        let name = format!("histogram_{}.csv", s.metric.slug());
        write_file(&a.out.join(name), |w| write_histogram_csv(w, &s.histogram))?;
    }
    println!(
        "n={} m={} p={} rho={} sigma={} beta_star={} replications={} seed={}",
        cfg.n, cfg.m, cfg.p, cfg.rho, cfg.sigma, cfg.beta_star_id, cfg.replications, cfg.seed
    );
    println!("{:<10}{:>10}{:>10}", "metric", "ME", "Q3");
    for s in &summaries {
        println!("{:<10}{:>10.4}{:>10.4}", s.metric.label(), s.me, s.q3);
    }
    let nonconverged: usize = results.iter().map(|r| r.nonconverged).sum();
    if nonconverged > 0 {
        eprintln!("warning: {nonconverged} fits did not converge");
    }
    println!("output = {}", a.out.display());
    Ok(())
}

fn join_support(s: &[usize]) -> String {
    s.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" ")
}

fn print_rows(rows: &[(String, CoverageReport)]) {
    for (name, r) in rows {
        println!(
            "{name}: {}/{} = {:.4} (nominal {:.4}, margin {:.4}) {}",
            r.successes,
            r.trials,
            r.empirical,
            r.nominal,
            r.margin,
            if r.passes() { "pass" } else { "fail" }
        );
    }
}

fn finish(
    claim: &str,
    out: &Option<PathBuf>,
    rows: &[(String, CoverageReport)],
    pass: bool,
) -> CliResult<()> {
    let path = out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("coverage-{claim}.csv")));
    write_file(&path, |w| write_coverage_csv(w, claim, rows))?;
    print_rows(rows);
    println!("coverage = {}", path.display());
    println!("result = {}", if pass { "pass" } else { "fail" });
    if pass {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{claim}: coverage below nominal minus margin"
        )))
    }
}

fn scenario_config(c: &CommonVerify) -> CliResult<ExperimentConfig> {
    if !(c.eta > 0.0 && c.eta < 1.0) {
        return Err(invalid("eta must lie in (0, 1)"));
    }
    if c.trials == Some(0) || c.budget == 0 {
        return Err(invalid("trials and budget must be positive"));
    }
    set_threads(c.threads)?;
    let mut cfg = resolve_preset(&c.preset)?;
    cfg.seed = c.seed;
    Ok(cfg)
}

fn theorem_report(which: Theorem, sc: &TheoremScenario, opts: &TheoremOptions) -> CliResult<TheoremReport> {
    let (r, retried) = theorem_coverage_with_retry(which, sc, opts)?;
    println!("claim = {}", which.label());
    println!("lambda = {}", r.lambda);
    for (name, c) in &r.constants {
        println!("{name} = {} ({} samples)", c.c_estimate, c.samples_used);
    }
    if retried {
        println!("restricted constants re-estimated with 10x budget");
    }
    for f in &r.precondition_failures {
        println!("precondition failed: {f}");
    }
    if r.nonconverged > 0 {
        println!("nonconverged fits = {}", r.nonconverged);
    }
    Ok(r)
}

fn theorem_options(
    c: &CommonVerify,
    trials: usize,
    objective: Objective,
    weight_exponent: f64,
) -> TheoremOptions {
    TheoremOptions {
        trials: c.trials.unwrap_or(trials),
        seed: c.seed,
        budget: c.budget,
        objective,
        weight_exponent,
    }
}

fn theorem_objective(o: TheoremObjectiveArg) -> Objective {
    match o {
        TheoremObjectiveArg::Denoise => Objective::Denoising,
        TheoremObjectiveArg::Estimate => Objective::Estimation,
    }
}

pub fn verify(a: &VerifyArgs) -> CliResult<()> {
    match &a.claim {
        Claim::Lemma1 {
            common,
            a: target,
            form,
        } => {
            let cfg = scenario_config(common)?;
            let sc = TheoremScenario::from_config(&cfg, common.eta)?;
            let n = sc.n();
            let (label, amat) = match target {
                TargetArg::X => ("A=X", sc.x.clone()),
                TargetArg::Identity => ("A=sqrt(n)I", Matrix::identity(sc.p()).scaled((n as f64).sqrt())),
            };
            let form = match form {
                FormArg::Stated => Lemma1Form::Stated,
                FormArg::Normalized => Lemma1Form::Normalized,
            };
            let trials = common.trials.unwrap_or(2000);
            let r = lemma1_coverage(&sc.x, &amat, sc.sigma, common.eta, trials, common.seed, form)?;
            let pass = r.passes();
            finish(
                "lemma1",
                &common.out,
                &[(format!("{label} eta={}", common.eta), r)],
                pass,
            )
        }
        Claim::Theorem1 {
            common,
            objective,
            weight_exponent,
        }
        | Claim::Theorem2 {
            common,
            objective,
            weight_exponent,
        } => {
            let which = if matches!(a.claim, Claim::Theorem1 { .. }) {
                Theorem::One
            } else {
                Theorem::Two
            };
            let cfg = scenario_config(common)?;
            let sc = TheoremScenario::from_config(&cfg, common.eta)?;
            let opts = theorem_options(common, 500, theorem_objective(*objective), *weight_exponent);
            let r = theorem_report(which, &sc, &opts)?;
            finish(which.label(), &common.out, &r.coverage_rows(), r.passes())
        }
        Claim::Theorem3 {
            common,
            k,
            delta,
            weight_exponent,
        } => {
            if !(*delta >= 0.0) {
                return Err(invalid("delta must be >= 0"));
            }
            let cfg = scenario_config(common)?;
            let sc = TheoremScenario::replicated(&cfg, *k, *delta, common.eta)?;
            let opts = theorem_options(common, 300, Objective::Transductive, *weight_exponent);
            let r = theorem_report(Theorem::Three, &sc, &opts)?;
            let prox_ok = match &r.proximity {
                Some(p) => {
                    println!(
                        "design proximity: sup {} vs threshold {} ({})",
                        p.sup_value,
                        p.threshold,
                        if p.satisfied { "holds" } else { "violated" }
                    );
                    p.satisfied
                }
                None => false,
            };
            finish(
                Theorem::Three.label(),
                &common.out,
                &r.coverage_rows(),
                r.passes() && prox_ok,
            )
        }
        Claim::Prop4 {
            common,
            k,
            kappa,
            p,
            n,
        } => {
            let _ = scenario_config(common)?;
            if *k < 2 || *n == 0 || *p < 2 {
                return Err(invalid("prop4 needs k >= 2, n >= 1 and p >= 2"));
            }
            let chi = uniform_population(k * n, *p, common.seed);
            let trials = common.trials.unwrap_or(1000);
            let r = prop4_sampling(&chi, *k, Some(*kappa), common.eta, trials, common.seed)?;
            println!("claim = prop4");
            println!(
                "population = {} x {} uniform on [-1, 1], n = {n}, k = {k}",
                k * n,
                p
            );
            println!("bound = {}", r.bound);
            println!(
                "unnormalized max deviation = {} (reported against {})",
                r.statement_level_max, r.statement_level_bound
            );
            let pass = r.coverage.passes();
            finish(
                "prop4",
                &common.out,
                &[("sup_deviation".to_string(), r.coverage)],
                pass,
            )
        }
        Claim::Assumption {
            common,
            m,
            x,
            support,
        } => {
            let cfg = scenario_config(common)?;
            if !(*x > 0.0) || !x.is_finite() {
                return Err(invalid("cone aperture must be positive"));
            }
            let (mat, n, label) = match m {
                GramArg::Identity => (Matrix::identity(cfg.p).scaled(cfg.n as f64), cfg.n, "identity"),
                GramArg::Gram => {
                    let sc = TheoremScenario::from_config(&cfg, common.eta)?;
                    (gram(&sc.x), sc.n(), "gram")
                }
            };
            let p = mat.rows();
            let supp: Vec<usize> = match support {
                Some(s) => s
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<usize>()
                            .map_err(|_| invalid(format!("support: not an index: {t:?}")))
                    })
                    .collect::<CliResult<_>>()?,
                None => ConeSpec::support_of(&cfg.beta_star),
            };
            if supp.is_empty() || supp.iter().any(|&j| j >= p) {
                return Err(invalid(format!(
                    "support must be non-empty with indices below {p}"
                )));
            }
            let cone = ConeSpec::unweighted(supp, *x, p)?;
            let r = restricted_constant(&mat, &cone, n, common.budget, common.seed)?;
            let path = common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("assumption.csv"));
            let pass = r.c_estimate > 0.0;
            write_file(&path, |w| {
                writeln!(w, "matrix,x,n,p,support,c_estimate,samples_used,refined,pass")?;
                writeln!(
                    w,
                    "{label},{x},{n},{p},{},{},{},{},{pass}",
                    join_support(&cone.support),
                    r.c_estimate,
                    r.samples_used,
                    r.refined
                )
            })?;
            println!("claim = assumption");
            println!(
                "matrix = {label} (n = {n}, p = {p}), support = [{}], x = {x}",
                join_support(&cone.support)
            );
            println!("c_estimate = {}", r.c_estimate);
            println!("samples_used = {}", r.samples_used);
            println!("report = {}", path.display());
            println!("result = {}", if pass { "pass" } else { "fail" });
            if pass {
                Ok(())
            } else {
                Err(CliError::Verification(
                    "restricted constant is not positive".into(),
                ))
            }
        }
    }
}
