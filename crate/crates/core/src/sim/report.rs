use std::io::{self, Write};

use super::{ExperimentConfig, Histogram, PerfSummary, ReplicationResult};

/// One row per fit: `rep,estimator,lambda1,lambda2,loss_x,loss_z,loss_beta,converged`.
/// `lambda2` is empty for plain LASSO rows.
pub fn write_results_csv<W: Write>(out: &mut W, results: &[ReplicationResult]) -> io::Result<()> {
    writeln!(
        out,
        "rep,estimator,lambda1,lambda2,loss_x,loss_z,loss_beta,converged"
    )?;
    for r in results {
        for rec in &r.records {
            let l2 = rec.lambda2.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.rep_index,
                rec.estimator.label(),
                rec.lambda1,
                l2,
                rec.loss_x,
                rec.loss_z,
                rec.loss_beta,
                rec.converged
            )?;
        }
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(
    out: &mut W,
    cfg: &ExperimentConfig,
    summaries: &[PerfSummary],
) -> io::Result<()> {
    writeln!(out, "metric,ME,Q3,n,m,p,rho,sigma,beta_star_id,replications,seed")?;
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.metric.label(),
            s.me,
            s.q3,
            cfg.n,
            cfg.m,
            cfg.p,
            cfg.rho,
            cfg.sigma,
            cfg.beta_star_id,
            cfg.replications,
            cfg.seed
        )?;
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(out: &mut W, hist: &Histogram) -> io::Result<()> {
    writeln!(out, "bin_left,bin_right,count")?;
    for (k, c) in hist.counts.iter().enumerate() {
        writeln!(out, "{},{},{}", hist.edges[k], hist.edges[k + 1], c)?;
    }
    Ok(())
}
