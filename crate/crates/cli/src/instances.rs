//! Problem and schedule construction from config keys.

use crate::config::{Config, ConfigError};
use shuffleopt_core::problems::{make_double_well, make_power, make_quadratic, FiniteSumProblem};
use shuffleopt_core::rng::SplitMix64;
use shuffleopt_core::schedules::StepSchedule;

pub const PROBLEM_NAMES: [&str; 3] = ["quadratic", "power", "double_well"];

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64)
        .collect()
}

fn random_rows(seed: u64, rows: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    let mut rng = SplitMix64::new(seed);
    (0..rows)
        .map(|_| (0..dim).map(|_| rng.next_range(-scale, scale)).collect())
        .collect()
}

/// Random offset rows whose columns sum to zero exactly: the last row
/// balances the rest.
fn random_offsets(seed: u64, rows: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    let mut out = random_rows(seed, rows.saturating_sub(1), dim, scale);
    let mut balance = vec![0.0; dim];
    for row in &out {
        for (b, v) in balance.iter_mut().zip(row) {
            *b += v;
        }
    }
    out.push(balance.into_iter().map(|v| -v).collect());
    out
}

/// Build a problem whose parameters live under `<prefix>.`; `name` selects
/// the family.
pub fn build_problem(
    cfg: &Config,
    prefix: &str,
    name: &str,
) -> Result<FiniteSumProblem, ConfigError> {
    let key = |suffix: &str| format!("{prefix}.{suffix}");
    let n = cfg.get_usize(&key("n"))?;
    let num_components = cfg.get_usize(&key("N"))?;
    let built = match name {
        "quadratic" => {
            let eigenvalues = if cfg.has(&key("eigenvalues")) {
                cfg.get_f64_list(&key("eigenvalues"))?
            } else {
                linspace(
                    cfg.get_f64(&key("eig_min"))?,
                    cfg.get_f64(&key("eig_max"))?,
                    n,
                )
            };
            let anchors = if cfg.has(&key("anchors")) {
                cfg.get_rows(&key("anchors"))?
            } else {
                let seed = cfg.get_u64_opt(&key("anchor_seed"))?.unwrap_or(42);
                let scale = cfg.get_f64_or(&key("anchor_scale"), 1.0)?;
                random_rows(seed, num_components, n, scale)
            };
            make_quadratic(n, num_components, &anchors, &eigenvalues)
        }
        "power" => {
            let p = cfg.get_usize(&key("p"))? as u32;
            let radius = cfg.get_f64(&key("radius"))?;
            let offsets = offsets_from(cfg, &key, num_components, n)?;
            make_power(n, num_components, p, &offsets, radius)
        }
        "double_well" => {
            let radius = cfg.get_f64(&key("radius"))?;
            let offsets = offsets_from(cfg, &key, num_components, n)?;
            make_double_well(n, num_components, &offsets, radius)
        }
        other => {
            return Err(ConfigError(format!(
                "unknown problem '{other}' (expected one of {})",
                PROBLEM_NAMES.join(", ")
            )))
        }
    };
    built.map_err(|e| ConfigError(format!("problem '{name}': {e}")))
}

fn offsets_from(
    cfg: &Config,
    key: &impl Fn(&str) -> String,
    rows: usize,
    dim: usize,
) -> Result<Vec<Vec<f64>>, ConfigError> {
    if cfg.has(&key("offsets")) {
        cfg.get_rows(&key("offsets"))
    } else {
        let seed = cfg.get_u64_opt(&key("offset_seed"))?.unwrap_or(42);
        let scale = cfg.get_f64_or(&key("offset_scale"), 0.5)?;
        Ok(random_offsets(seed, rows, dim, scale))
    }
}

/// Resolve a step scale specification: a plain number, `auto` for the
/// stability bound `1/(√2·L·N)`, or `auto:<factor>` for a multiple of it.
pub fn resolve_alpha(raw: &str, problem: &FiniteSumProblem) -> Result<f64, String> {
    let auto =
        1.0 / (std::f64::consts::SQRT_2 * problem.lipschitz() * problem.num_components() as f64);
    if raw == "auto" {
        return Ok(auto);
    }
    if let Some(factor) = raw.strip_prefix("auto:") {
        let f: f64 = factor
            .trim()
            .parse()
            .map_err(|_| format!("bad auto factor '{factor}'"))?;
        if f <= 0.0 || f.is_nan() {
            return Err(format!("auto factor must be positive, got {f}"));
        }
        return Ok(f * auto);
    }
    raw.parse::<f64>()
        .map_err(|_| format!("expected a number, 'auto' or 'auto:<factor>', got '{raw}'"))
}

pub fn schedule_from(
    cfg: &Config,
    prefix: &str,
    problem: &FiniteSumProblem,
) -> Result<StepSchedule, ConfigError> {
    let key = |suffix: &str| format!("{prefix}.{suffix}");
    let alpha_raw = cfg.get_string(&key("alpha"))?;
    let alpha = resolve_alpha(&alpha_raw, problem)
        .map_err(|m| ConfigError(format!("key '{}': {m}", key("alpha"))))?;
    let beta = cfg.get_f64_or(&key("beta"), 0.0)?;
    let gamma = cfg.get_f64(&key("gamma"))?;
    StepSchedule::new(alpha, beta, gamma).map_err(|e| ConfigError(format!("schedule: {e}")))
}

/// Initial point: omitted means the origin, a single number broadcasts,
/// otherwise a full coordinate list.
pub fn x0_from(cfg: &Config, key: &str, dim: usize) -> Result<Vec<f64>, ConfigError> {
    match cfg.raw(key) {
        None => Ok(vec![0.0; dim]),
        Some(raw) => {
            let values: Vec<f64> = raw
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| ConfigError(format!("key '{key}': expected numbers, got '{raw}'")))?;
            if values.len() == 1 {
                Ok(vec![values[0]; dim])
            } else if values.len() == dim {
                Ok(values)
            } else {
                Err(ConfigError(format!(
                    "key '{key}': expected 1 or {dim} coordinates, got {}",
                    values.len()
                )))
            }
        }
    }
}
