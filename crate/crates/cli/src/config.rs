//! Flat `key = value` configuration files.
//!
//! ```text
//! # comment
//! radii = 4, 10, 14, 20
//! lambda = 0.1
//! constraint_gradient = exact
//! ```

use cvxseg::{ConstraintGradient, LengthPad, SolverConfig};

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn boolean(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

fn list(v: &str) -> Result<Vec<f64>, String> {
    let inner = v.trim_matches(|c| matches!(c, '[' | ']' | '{' | '}' | '(' | ')'));
    inner
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(num)
        .collect()
}

fn apply(cfg: &mut SolverConfig, key: &str, v: &str) -> Result<(), String> {
    match key {
        "radii" => cfg.radii = list(v)?,
        "lambda" => cfg.lambda = num(v)?,
        "w0" => cfg.w0 = num(v)?,
        "w1" => cfg.w1 = num(v)?,
        "tau" => cfg.tau = num(v)?,
        "theta" => cfg.theta = num(v)?,
        "rho" | "band_threshold" => cfg.band_threshold = num(v)?,
        "r0" | "band_radius" => cfg.band_radius = num(v)?,
        "gaussian_size" => cfg.gaussian_size = num(v)?,
        "gaussian_sigma" | "sigma" => cfg.gaussian_sigma = num(v)?,
        "s" | "background_margin" => cfg.background_margin = num(v)?,
        "epsilon" | "tolerance" => cfg.tolerance = num(v)?,
        "T" | "max_iterations" => cfg.max_iterations = num(v)?,
        "force_refresh_period" => cfg.force_refresh_period = num(v)?,
        "variation_period" => cfg.variation_period = num(v)?,
        "n0" | "fg_components" => cfg.fg_components = num(v)?,
        "n1" | "bg_components" => cfg.bg_components = num(v)?,
        "gamma0" => cfg.gamma0 = num(v)?,
        "gamma1" => cfg.gamma1 = num(v)?,
        "p_floor" => cfg.p_floor = num(v)?,
        "seed" => cfg.seed = num(v)?,
        "em_max_iterations" => cfg.em_max_iterations = num(v)?,
        "em_tolerance" => cfg.em_tolerance = num(v)?,
        "constraint_gradient" => {
            cfg.constraint_gradient = match v {
                "verbatim" => ConstraintGradient::Verbatim,
                "exact" => ConstraintGradient::Exact,
                _ => return Err(format!("expected verbatim or exact, got {v:?}")),
            }
        }
        "length_prefactor" => cfg.length_prefactor = boolean(v)?,
        "constraint_pad" => cfg.constraint_pad = num(v)?,
        "length_pad" => {
            cfg.length_pad = match v {
                "replicate" => LengthPad::Replicate,
                _ => LengthPad::Constant(num(v)?),
            }
        }
        "half_boundary" => cfg.half_boundary = boolean(v)?,
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

/// Applies the overrides in `text` on top of `base`.
pub fn parse_config(text: &str, base: SolverConfig) -> Result<SolverConfig, ConfigError> {
    let mut cfg = base;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ConfigError { line: n + 1, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected key = value".into()))?;
        apply(&mut cfg, key.trim(), value.trim()).map_err(err)?;
    }
    cfg.validate().map_err(|e| ConfigError {
        line: 0,
        message: e.to_string(),
    })?;
    Ok(cfg)
}
