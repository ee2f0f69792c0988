//! Flat `key = value` experiment files.

use std::collections::BTreeMap;
use std::path::Path;

use tlasso::sim::{geometric_grid, preset, ExperimentConfig, BETA_SPARSE, BETA_VERY_SPARSE};
use tlasso::transductive::Weighting;

use crate::error::{invalid, CliResult};

pub fn parse_text(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("config line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn load(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    parse_text(&text)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| invalid(format!("{key}: cannot parse {v:?}")))
}

pub fn parse_list(key: &str, v: &str) -> CliResult<Vec<f64>> {
    v.split(',').map(|s| num::<f64>(key, s.trim())).collect()
}

pub fn parse_bool(key: &str, v: &str) -> CliResult<bool> {
    match v {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(format!("{key}: expected on/off, got {v:?}"))),
    }
}

/// `sparse`, `very-sparse`, or a comma-separated vector.
pub fn parse_beta(v: &str) -> CliResult<(Vec<f64>, String)> {
    match v {
        "sparse" => Ok((BETA_SPARSE.to_vec(), "sparse".into())),
        "very-sparse" => Ok((BETA_VERY_SPARSE.to_vec(), "very-sparse".into())),
        _ => Ok((parse_list("beta_star", v)?, "custom".into())),
    }
}

/// Applies recognised keys on top of `cfg`.
pub fn apply(cfg: &mut ExperimentConfig, kv: &BTreeMap<String, String>) -> CliResult<()> {
    let mut grid = (1.2, -50, 30);
    let mut grid_set = false;
    for (k, v) in kv {
        if k.as_str() == "preset" {
            *cfg = preset(v).ok_or_else(|| invalid(format!("unknown preset {v:?}")))?;
        }
    }
    for (k, v) in kv {
        match k.as_str() {
            "preset" => {}
            "n" => cfg.n = num(k, v)?,
            "m" => cfg.m = num(k, v)?,
            "rho" => cfg.rho = num(k, v)?,
            "sigma" => cfg.sigma = num(k, v)?,
            "beta_star" => {
                let (b, id) = parse_beta(v)?;
                cfg.p = b.len();
                cfg.beta_star = b;
                cfg.beta_star_id = id;
            }
            "beta_star_id" => cfg.beta_star_id = v.clone(),
            "replications" => cfg.replications = num(k, v)?,
            "seed" => cfg.seed = num(k, v)?,
            "normalize" => cfg.normalize = parse_bool(k, v)?,
            "grid_base" => {
                grid.0 = num(k, v)?;
                grid_set = true;
            }
            "grid_kmin" => {
                grid.1 = num(k, v)?;
                grid_set = true;
            }
            "grid_kmax" => {
                grid.2 = num(k, v)?;
                grid_set = true;
            }
            "grid" => {
                cfg.grid = parse_grid(v)?;
            }
            "weighting" => cfg.two_step.weighting = parse_weighting(v)?,
            "multiplier" => cfg.two_step.constraint_multiplier = num(k, v)?,
            _ => return Err(invalid(format!("unknown config key {k:?}"))),
        }
    }
    if grid_set {
        if grid.1 > grid.2 || !(grid.0 > 1.0) {
            return Err(invalid("grid needs base > 1 and kmin <= kmax"));
        }
        cfg.grid = geometric_grid(grid.0, grid.1, grid.2);
    }
    Ok(())
}

/// `base:kmin:kmax`
pub fn parse_grid(v: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() != 3 {
        return Err(invalid(format!("grid: expected base:kmin:kmax, got {v:?}")));
    }
    let base: f64 = num("grid base", parts[0])?;
    let kmin: i32 = num("grid kmin", parts[1])?;
    let kmax: i32 = num("grid kmax", parts[2])?;
    if kmin > kmax || !(base > 1.0) || !base.is_finite() {
        return Err(invalid("grid needs base > 1 and kmin <= kmax"));
    }
    Ok(geometric_grid(base, kmin, kmax))
}

pub fn parse_weighting(v: &str) -> CliResult<Weighting> {
    match v {
        "unit" => Ok(Weighting::Unit),
        "xi" => Ok(Weighting::XiSqrt),
        _ => Err(invalid(format!("weighting: expected unit or xi, got {v:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_applies() {
        let kv = parse_text(
            "preset = table1-row2\n# comment\nreplications = 3\nseed=9\nbeta_star = very-sparse\n",
        )
        .unwrap();
        let mut cfg = preset("table1-row1").unwrap();
        apply(&mut cfg, &kv).unwrap();
        assert_eq!((cfg.n, cfg.m, cfg.replications, cfg.seed), (7, 10, 3, 9));
        assert_eq!(cfg.beta_star, BETA_VERY_SPARSE);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        let mut cfg = preset("table1-row1").unwrap();
        assert!(apply(&mut cfg, &parse_text("colour = red").unwrap()).is_err());
        assert!(parse_text("no equals sign").is_err());
    }

    #[test]
    fn grid_override() {
        let mut cfg = preset("table1-row1").unwrap();
        apply(&mut cfg, &parse_text("grid_kmin = -2\ngrid_kmax = 2").unwrap()).unwrap();
        assert_eq!(cfg.grid.len(), 5);
    }
}
