//! Flat dotted-key run configuration: `section.key = value` lines, comments
//! with `#`, no nesting and no schema machinery.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::{CliError, CliResult};

/// How the reduced period `That` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ThatMode {
    /// Transfer the shooting-oracle orbits and use their periods.
    Auto,
    Explicit(f64),
    Sweep(Vec<f64>),
}

/// One fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: String,
    pub m: f64,
    pub k: Vec<i64>,
    pub delta: f64,
    pub that: ThatMode,
    pub sign_sweep: bool,
    pub d_cut: Option<usize>,
    pub n_t: Option<usize>,
    /// Mean-angle grid resolution per torus dimension; `None` picks an
    /// automatic value from the dimension.
    pub q_per_dim: Option<usize>,
    pub random_starts: usize,
    pub tol_fp: f64,
    pub tol_crit: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Raw `key = value` entries, kept sorted for the report echo.
    pub raw: BTreeMap<String, String>,
}

impl RunConfig {
    /// Automatic mean-angle grid size: the largest `g <= 8` whose full grid
    /// `g^n` stays within 9 starts per sign.
    pub fn q_per_dim_auto(&self, n: usize) -> usize {
        if let Some(q) = self.q_per_dim {
            return q.max(1);
        }
        let mut g = 8usize;
        while g > 1 && g.pow(n as u32) > 9 {
            g -= 1;
        }
        g
    }
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Config(format!("`{key}` must be a number, got `{v}`")))
}

fn parse_usize(key: &str, v: &str) -> CliResult<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| CliError::Config(format!("`{key}` must be a nonnegative integer, got `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> CliResult<bool> {
    match v.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(CliError::Config(format!(
            "`{key}` must be a boolean, got `{other}`"
        ))),
    }
}

fn parse_k(v: &str) -> CliResult<Vec<i64>> {
    v.split(',')
        .map(|s| {
            s.trim().parse::<i64>().map_err(|_| {
                CliError::Config(format!("`rotation.k` entry `{s}` is not an integer"))
            })
        })
        .collect()
}

fn parse_that(v: &str) -> CliResult<ThatMode> {
    let v = v.trim();
    if v == "auto" {
        return Ok(ThatMode::Auto);
    }
    if v.contains(',') {
        let list: CliResult<Vec<f64>> = v.split(',').map(|s| parse_f64("solver.that", s)).collect();
        return Ok(ThatMode::Sweep(list?));
    }
    Ok(ThatMode::Explicit(parse_f64("solver.that", v)?))
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config `{}`: {e}", path.display())))?;
    parse_config(&text)
}

/// Parses config text; every key must be known and every value well-formed.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if raw.insert(key.clone(), value).is_some() {
            return Err(CliError::Config(format!("duplicate key `{key}`")));
        }
    }

    let mut cfg = RunConfig {
        system: String::new(),
        m: f64::NAN,
        k: Vec::new(),
        delta: 0.3,
        that: ThatMode::Auto,
        sign_sweep: true,
        d_cut: None,
        n_t: None,
        q_per_dim: None,
        random_starts: 2,
        tol_fp: 1e-11,
        tol_crit: 1e-9,
        seed: 0,
        out_dir: PathBuf::from("out"),
        raw: raw.clone(),
    };

    for (key, value) in &raw {
        match key.as_str() {
            "system.name" => cfg.system = value.clone(),
            "energy.M" => cfg.m = parse_f64(key, value)?,
            "rotation.k" => cfg.k = parse_k(value)?,
            "solver.delta" => cfg.delta = parse_f64(key, value)?,
            "solver.that" => cfg.that = parse_that(value)?,
            "solver.sign_sweep" => cfg.sign_sweep = parse_bool(key, value)?,
            "solver.d_cut" => cfg.d_cut = Some(parse_usize(key, value)?),
            "solver.n_t" => cfg.n_t = Some(parse_usize(key, value)?),
            "starts.q_per_dim" => cfg.q_per_dim = Some(parse_usize(key, value)?),
            "starts.random" => cfg.random_starts = parse_usize(key, value)?,
            "tol.fixed_point" => cfg.tol_fp = parse_f64(key, value)?,
            "tol.critical" => cfg.tol_crit = parse_f64(key, value)?,
            "rng.seed" => {
                cfg.seed = value.parse::<u64>().map_err(|_| {
                    CliError::Config(format!("`rng.seed` must be a u64, got `{value}`"))
                })?
            }
            "output.dir" => cfg.out_dir = PathBuf::from(value),
            other => {
                return Err(CliError::Config(format!("unknown config key `{other}`")));
            }
        }
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> CliResult<()> {
    if cfg.system.is_empty() {
        return Err(CliError::Config("`system.name` is required".into()));
    }
    if !cfg.m.is_finite() {
        return Err(CliError::Config("`energy.M` is required".into()));
    }
    if !(cfg.delta > 0.0 && cfg.delta <= 1.0) {
        return Err(CliError::Config(format!(
            "`solver.delta` must lie in (0, 1], got {}",
            cfg.delta
        )));
    }
    if !(cfg.tol_fp > 0.0 && cfg.tol_crit > 0.0) {
        return Err(CliError::Config("tolerances must be positive".into()));
    }
    match &cfg.that {
        ThatMode::Explicit(v) if *v == 0.0 => {
            return Err(CliError::Config("`solver.that` must be nonzero".into()));
        }
        ThatMode::Sweep(list) => {
            if list.is_empty() || list.iter().any(|v| *v == 0.0 || !v.is_finite()) {
                return Err(CliError::Config(
                    "`solver.that` sweep entries must be finite and nonzero".into(),
                ));
            }
        }
        _ => {}
    }
    if let Some(nt) = cfg.n_t {
        if !nt.is_power_of_two() {
            return Err(CliError::Config(format!(
                "`solver.n_t` must be a power of two, got {nt}"
            )));
        }
    }
    Ok(())
}

/// Validation specific to `solve`: a nonzero rotation vector of the system's
/// torus dimension.
pub fn validate_rotation(cfg: &RunConfig, ell: usize) -> CliResult<Vec<i64>> {
    if cfg.k.len() != ell {
        return Err(CliError::Config(format!(
            "`rotation.k` has {} entries, system needs {ell}",
            cfg.k.len()
        )));
    }
    if cfg.k.iter().all(|&v| v == 0) {
        return Err(CliError::Config("`rotation.k` must be nonzero".into()));
    }
    Ok(cfg.k.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys_with_defaults() {
        let cfg = parse_config("# demo\nsystem.name = pendulum\nenergy.M = 3.5\nrotation.k = 1\n")
            .unwrap();
        assert_eq!(cfg.system, "pendulum");
        assert_eq!(cfg.k, vec![1]);
        assert_eq!(cfg.delta, 0.3);
        assert_eq!(cfg.that, ThatMode::Auto);
        assert!(cfg.sign_sweep);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn rejects_zero_that_and_unknown_keys() {
        let bad = parse_config("system.name = pendulum\nenergy.M = 3.5\nsolver.that = 0\n");
        assert!(matches!(bad, Err(CliError::Config(_))));
        let unk = parse_config("system.name = pendulum\nenergy.M = 3.5\nsolver.bogus = 1\n");
        assert!(matches!(unk, Err(CliError::Config(_))));
    }

    #[test]
    fn parses_sweep_and_vector_k() {
        let cfg = parse_config(
            "system.name = coupled_pendulum\nenergy.M = 4.5\nrotation.k = 1,0\nsolver.that = 10.5, -10.5\n",
        )
        .unwrap();
        assert_eq!(cfg.k, vec![1, 0]);
        assert_eq!(cfg.that, ThatMode::Sweep(vec![10.5, -10.5]));
    }
}
