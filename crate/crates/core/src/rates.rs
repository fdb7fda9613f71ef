//! Theoretical rate exponents and empirical rate estimation.
//!
//! For step sizes `α/(t+β)^γ` with `γ ∈ (½, 1]` and Łojasiewicz exponent
//! `θ ∈ [0, 1)` at the limit point, the distance `‖xᵗ − x*‖` decays like
//! `t^{−ψ}` with
//!
//! ```text
//! ψ = 2γ − 1                      if θ <  γ/(3γ−1)
//! ψ = (1−θ)(1−γ)/(2θ−1)           if θ ≥ γ/(3γ−1), (θ,γ) ≠ (½,1)
//! ψ = 1   (needs α > 2c²/N)       if (θ,γ) = (½,1)
//! ```
//!
//! The two branch formulas agree on the boundary curve `θ = γ/(3γ−1)`.
//! The empirical counterpart fits a line to `log‖xᵗ − x*‖` against
//! `log(t+β)` over the tail of a recorded run. Exponent comparisons are
//! one-sided: the theory gives upper bounds on the error, so decaying
//! faster than predicted is consistent with it.

use crate::linalg;
use crate::optim::Trajectory;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RateError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("insufficient data: {usable} usable points, need at least {needed}")]
    InsufficientData { usable: usize, needed: usize },
}

/// Iterates closer to the reference than this multiple of machine epsilon
/// are excluded from log-log fits.
pub const DISTANCE_FLOOR: f64 = 100.0 * f64::EPSILON;

/// The theoretical decay exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiExponent {
    pub exponent: f64,
    /// Set only for `(θ, γ) = (½, 1)`: the `O(t⁻¹)` rate there additionally
    /// requires the base step scale to satisfy `α > 2c²/N`.
    pub needs_alpha_condition: bool,
}

pub fn psi_rate(theta: f64, gamma: f64) -> Result<PsiExponent, RateError> {
    if !(0.0..1.0).contains(&theta) {
        return Err(RateError::InvalidParameter(format!(
            "theta must lie in [0,1), got {theta}"
        )));
    }
    if !(gamma > 0.5 && gamma <= 1.0) {
        return Err(RateError::InvalidParameter(format!(
            "gamma must lie in (1/2,1], got {gamma}"
        )));
    }
    if theta == 0.5 && gamma == 1.0 {
        return Ok(PsiExponent {
            exponent: 1.0,
            needs_alpha_condition: true,
        });
    }
    let boundary = gamma / (3.0 * gamma - 1.0);
    let exponent = if theta < boundary {
        2.0 * gamma - 1.0
    } else {
        (1.0 - theta) * (1.0 - gamma) / (2.0 * theta - 1.0)
    };
    Ok(PsiExponent {
        exponent,
        needs_alpha_condition: false,
    })
}

/// An empirical rate fit paired with its theoretical counterpart.
#[derive(Clone, Debug)]
pub struct RateReport {
    /// Magnitude of the fitted log-log slope.
    pub fitted_exponent: f64,
    /// Epoch window `(t_lo, t_hi)` the fit used.
    pub fit_window: (usize, usize),
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub theoretical_exponent: Option<f64>,
    pub reference_point: Vec<f64>,
}

impl RateReport {
    pub fn with_theoretical(mut self, psi: f64) -> Self {
        self.theoretical_exponent = Some(psi);
        self
    }
}

/// Ordinary least squares of `log‖xᵗ − x*‖` against `log(t+β)` over the
/// last `window_fraction` of epochs, excluding iterates at the floating
/// point floor. The fitted exponent is the negated slope.
pub fn estimate_rate(
    traj: &Trajectory,
    reference: &[f64],
    window_fraction: f64,
) -> Result<RateReport, RateError> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(RateError::InvalidParameter(format!(
            "window fraction must lie in (0,1], got {window_fraction}"
        )));
    }
    if reference.len() != traj.meta.dim {
        return Err(RateError::InvalidParameter(
            "reference point has wrong dimension".into(),
        ));
    }
    let epochs = traj.epochs();
    if epochs < 100 {
        return Err(RateError::InsufficientData {
            usable: epochs,
            needed: 100,
        });
    }
    let t_lo = (epochs - (window_fraction * epochs as f64).floor() as usize + 1).max(1);
    let beta = traj.meta.schedule.beta;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in t_lo..=epochs {
        let d = linalg::dist(&traj.outer[t], reference);
        if d > DISTANCE_FLOOR {
            xs.push((t as f64 + beta).ln());
            ys.push(d.ln());
        }
    }
    if xs.len() < 10 {
        return Err(RateError::InsufficientData {
            usable: xs.len(),
            needed: 10,
        });
    }

    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mean_x) * (y - mean_y);
        var += (x - mean_x) * (x - mean_x);
    }
    if var == 0.0 {
        return Err(RateError::InsufficientData {
            usable: 1,
            needed: 10,
        });
    }
    let slope = cov / var;
    let intercept = mean_y - slope * mean_x;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    Ok(RateReport {
        fitted_exponent: -slope,
        fit_window: (t_lo, epochs),
        residual: (rss / n).sqrt(),
        theoretical_exponent: None,
        reference_point: reference.to_vec(),
    })
}

/// Cumulative-sum streams behind the finite-length property: the path
/// length `Σ ‖xᵗ − xᵗ⁻¹‖` and the weighted gradient series
/// `Σ α_t ‖∇f(xᵗ⁻¹)‖`, both indexed by epoch.
#[derive(Clone, Debug)]
pub struct PathSums {
    pub movement: Vec<f64>,
    pub weighted_grad: Vec<f64>,
}

pub fn finite_length_check(traj: &Trajectory) -> PathSums {
    let epochs = traj.epochs();
    let mut movement = Vec::with_capacity(epochs);
    let mut weighted = Vec::with_capacity(epochs);
    let (mut m, mut w) = (0.0, 0.0);
    for t in 1..=epochs {
        m += linalg::dist(&traj.outer[t], &traj.outer[t - 1]);
        w += traj.steps[t - 1] * traj.grad_norms[t - 1];
        movement.push(m);
        weighted.push(w);
    }
    PathSums {
        movement,
        weighted_grad: weighted,
    }
}

/// Fraction of a partial-sum stream's total mass accumulated over its last
/// `fraction` of epochs, the empirical Cauchy proxy. Zero total counts as
/// fully flattened.
pub fn tail_mass_fraction(partial_sums: &[f64], fraction: f64) -> f64 {
    assert!((0.0..=1.0).contains(&fraction));
    let total = match partial_sums.last() {
        Some(&v) => v,
        None => return 0.0,
    };
    if total == 0.0 {
        return 0.0;
    }
    let cut = ((partial_sums.len() as f64) * (1.0 - fraction)).floor() as usize;
    let at_cut = if cut == 0 { 0.0 } else { partial_sums[cut - 1] };
    (total - at_cut) / total
}
