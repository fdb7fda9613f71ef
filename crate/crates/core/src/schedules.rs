//! Diminishing step sizes `α_t = α / (t+β)^γ` and the series constants
//! derived from them.
//!
//! Everything downstream of the schedule is an infinite series in `α_t`:
//! the growth bound `G`, the accumulated-noise sequence `u_t`, and the
//! bracketed tail series that controls summability of `Σ α_t u_{t-1}^θ`.
//! All series are evaluated by truncation plus an integral-comparison
//! remainder, and every result carries its enclosure width so callers can
//! fold the evaluation error into their tolerances.

use crate::linalg::KahanSum;
use crate::optim::Variant;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("series Σ α_t³ diverges for γ = {gamma} (needs γ > 1/3)")]
    DivergentSeries { gamma: f64 },
    #[error(
        "decay window violated: γ = {gamma} must exceed (1+θ)/(1+3θ) = {threshold} for θ = {theta}"
    )]
    WindowViolation {
        gamma: f64,
        theta: f64,
        threshold: f64,
    },
}

/// The three-parameter step-size family `α_t = α/(t+β)^γ`, `t ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl StepSchedule {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, ScheduleError> {
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(ScheduleError::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if beta < 0.0 || !beta.is_finite() {
            return Err(ScheduleError::InvalidParameter(format!(
                "beta must be nonnegative, got {beta}"
            )));
        }
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(ScheduleError::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Ok(StepSchedule { alpha, beta, gamma })
    }

    /// `α_t` for `t ≥ 1`. Panics if `t == 0`: the schedule starts at the
    /// first epoch.
    #[inline]
    pub fn step_size(&self, t: usize) -> f64 {
        assert!(t >= 1, "step sizes are indexed from t = 1");
        self.alpha / (t as f64 + self.beta).powf(self.gamma)
    }

    fn cube(&self, t: usize) -> f64 {
        let a = self.step_size(t);
        a * a * a
    }
}

/// Smallest `t ≥ 1` with `α_t ≤ 1/(√2·L·N)`. From this epoch on the
/// per-epoch recursions bind; earlier epochs are outside their hypotheses.
///
/// Returns `usize::MAX` when the crossing lies beyond any representable
/// epoch (absurdly large `α` with slow decay).
pub fn first_valid_iteration(
    schedule: &StepSchedule,
    lipschitz: f64,
    num_components: usize,
) -> usize {
    let bound = 1.0 / (std::f64::consts::SQRT_2 * lipschitz * num_components as f64);
    if schedule.step_size(1) <= bound {
        return 1;
    }
    // exponential search for an admissible epoch, then bisect the crossing
    let mut hi = 2usize;
    while schedule.step_size(hi) > bound {
        match hi.checked_mul(2) {
            Some(next) => hi = next,
            None => {
                if schedule.step_size(usize::MAX) > bound {
                    return usize::MAX;
                }
                hi = usize::MAX;
                break;
            }
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if schedule.step_size(mid) <= bound {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Which step-size windows a schedule satisfies. Advisory only: the
/// optimizers run with any positive schedule, but trajectories should be
/// interpreted against the windows their schedule lands in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionReport {
    /// `γ ∈ (1/3, 1]`: `Σ α_t = ∞` and `Σ α_t³ < ∞`.
    pub weak_convergence_window: bool,
    /// `γ ∈ (1/2, 1]`: the window for limit-point convergence and rates.
    pub kl_window: bool,
    /// `γ ∈ ((1+θ)/(1+3θ), 1]` for the supplied exponent: tail-series
    /// summability.
    pub tail_window: Option<bool>,
}

pub fn check_conditions(schedule: &StepSchedule, theta: Option<f64>) -> ConditionReport {
    let g = schedule.gamma;
    ConditionReport {
        weak_convergence_window: g > 1.0 / 3.0 && g <= 1.0,
        kl_window: g > 0.5 && g <= 1.0,
        tail_window: theta.map(|th| g > (1.0 + th) / (1.0 + 3.0 * th) && g <= 1.0),
    }
}

/// A truncated series evaluation: the midpoint of a rigorous enclosure and
/// the enclosure width. `|value − exact| ≤ remainder / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub remainder: f64,
}

impl SeriesValue {
    fn from_enclosure(lo: f64, hi: f64) -> Self {
        SeriesValue {
            value: 0.5 * (lo + hi),
            remainder: hi - lo,
        }
    }
}

pub const DEFAULT_SERIES_HORIZON: usize = 1_000_000;

/// Precomputed prefix sums of `Σ α_j³`, giving O(1) tail evaluations
/// `Σ_{j=k}^∞ α_j³` for any `k`.
pub struct CubeSeries {
    schedule: StepSchedule,
    horizon: usize,
    /// `prefix[k] = Σ_{j=1}^{k} α_j³` (compensated summation).
    prefix: Vec<f64>,
    far_tail: SeriesValue,
}

impl CubeSeries {
    pub fn new(schedule: &StepSchedule) -> Result<Self, ScheduleError> {
        Self::with_horizon(schedule, DEFAULT_SERIES_HORIZON)
    }

    pub fn with_horizon(schedule: &StepSchedule, horizon: usize) -> Result<Self, ScheduleError> {
        if schedule.gamma * 3.0 <= 1.0 {
            return Err(ScheduleError::DivergentSeries {
                gamma: schedule.gamma,
            });
        }
        let mut prefix = Vec::with_capacity(horizon + 1);
        prefix.push(0.0);
        let mut acc = KahanSum::default();
        for t in 1..=horizon {
            acc.add(schedule.cube(t));
            prefix.push(acc.value());
        }
        let far_tail = Self::integral_tail(schedule, horizon + 1);
        Ok(CubeSeries {
            schedule: *schedule,
            horizon,
            prefix,
            far_tail,
        })
    }

    /// Enclosure of `Σ_{j=k}^∞ α_j³` by the integral comparison test alone.
    fn integral_tail(schedule: &StepSchedule, k: usize) -> SeriesValue {
        let g3 = 3.0 * schedule.gamma;
        let a3 = schedule.alpha.powi(3);
        let lo = a3 / ((g3 - 1.0) * (k as f64 + schedule.beta).powf(g3 - 1.0));
        SeriesValue::from_enclosure(lo, lo + schedule.cube(k))
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    /// `Σ_{j=1}^∞ α_j³`.
    pub fn total(&self) -> SeriesValue {
        SeriesValue {
            value: self.prefix[self.horizon] + self.far_tail.value,
            remainder: self.far_tail.remainder,
        }
    }

    /// `Σ_{j=from}^∞ α_j³` for `from ≥ 1`.
    pub fn tail(&self, from: usize) -> SeriesValue {
        assert!(from >= 1);
        if from <= self.horizon + 1 {
            SeriesValue {
                value: self.prefix[self.horizon] - self.prefix[from - 1] + self.far_tail.value,
                remainder: self.far_tail.remainder,
            }
        } else {
            Self::integral_tail(&self.schedule, from)
        }
    }
}

/// The growth bound `G = gap · exp(κ L³N³ Σ_{j≥1} α_j³)` on the function
/// value along a run started with gap `f(x⁰) − f̄_min`. The reshuffled
/// gradient variants carry κ = 2, the proximal variant κ = 6.
#[derive(Clone, Copy, Debug)]
pub struct GrowthBound {
    /// `κ L³N³ Σ α_j³` with its evaluation enclosure.
    pub exponent: SeriesValue,
    /// `exp(exponent)`, the multiplier on the initial gap.
    pub factor: f64,
    /// The bound `G` itself.
    pub value: f64,
}

pub fn g_constant(
    schedule: &StepSchedule,
    f0_gap: f64,
    variant: Variant,
    lipschitz: f64,
    num_components: usize,
) -> Result<GrowthBound, ScheduleError> {
    if f0_gap < 0.0 || f0_gap.is_nan() {
        return Err(ScheduleError::InvalidParameter(format!(
            "initial gap must be nonnegative, got {f0_gap}"
        )));
    }
    let series = CubeSeries::new(schedule)?.total();
    let scale = variant.noise_kappa() * lipschitz.powi(3) * (num_components as f64).powi(3);
    let exponent = SeriesValue {
        value: scale * series.value,
        remainder: scale * series.remainder,
    };
    let factor = exponent.value.exp();
    let value = if f0_gap == 0.0 { 0.0 } else { f0_gap * factor };
    Ok(GrowthBound {
        exponent,
        factor,
        value,
    })
}

/// The accumulated-noise sequence `u_t = 2 G L³N³ Σ_{j=t+1}^∞ α_j³`,
/// the allowance that makes `f(xᵗ) + u_t` monotone.
pub struct NoiseSequence {
    coefficient: f64,
    series: CubeSeries,
}

impl NoiseSequence {
    pub fn new(
        schedule: &StepSchedule,
        g: f64,
        lipschitz: f64,
        num_components: usize,
    ) -> Result<Self, ScheduleError> {
        if g < 0.0 || !g.is_finite() {
            return Err(ScheduleError::InvalidParameter(format!(
                "G must be finite and nonnegative, got {g}"
            )));
        }
        Ok(NoiseSequence {
            coefficient: 2.0 * g * lipschitz.powi(3) * (num_components as f64).powi(3),
            series: CubeSeries::new(schedule)?,
        })
    }

    /// `u_t` for `t ≥ 0`.
    pub fn u(&self, t: usize) -> SeriesValue {
        let tail = self.series.tail(t + 1);
        SeriesValue {
            value: self.coefficient * tail.value,
            remainder: self.coefficient * tail.remainder,
        }
    }
}

/// Two-sided bracket on the tail series `Σ_{t≥k} α_t (Σ_{j≥t} α_j³)^θ`:
/// closed-form endpoints `a̲_θ/(k+β)^ν ≤ · ≤ ā_θ/(k+β)^ν` against a
/// truncated evaluation of the double series itself.
#[derive(Clone, Copy, Debug)]
pub struct TailBracket {
    /// Decay exponent `ν = (1+3θ)γ − (1+θ)`.
    pub nu: f64,
    pub a_lower: f64,
    pub a_upper: f64,
    pub lower: f64,
    pub upper: f64,
    pub empirical: f64,
    pub empirical_remainder: f64,
}

pub fn tail_series_bracket(
    schedule: &StepSchedule,
    theta: f64,
    k: usize,
) -> Result<TailBracket, ScheduleError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(ScheduleError::InvalidParameter(format!(
            "theta must lie in (0, 1], got {theta}"
        )));
    }
    if k < 1 {
        return Err(ScheduleError::InvalidParameter(
            "k must be at least 1".into(),
        ));
    }
    let (alpha, beta, gamma) = (schedule.alpha, schedule.beta, schedule.gamma);
    let threshold = (1.0 + theta) / (1.0 + 3.0 * theta);
    if gamma <= threshold {
        return Err(ScheduleError::WindowViolation {
            gamma,
            theta,
            threshold,
        });
    }
    let nu = (1.0 + 3.0 * theta) * gamma - (1.0 + theta);

    // closed-form endpoint constants
    let a_theta = alpha.powf(3.0 * theta) / (3.0 * gamma - 1.0).powf(theta);
    let a_lower = a_theta * alpha / nu;
    let a_upper = a_theta * alpha / (1.0 + beta)
        + a_theta * alpha / nu
        + alpha.powf(1.0 + 3.0 * theta) / (1.0 + beta).powf(1.0 + theta)
        + alpha.powf(1.0 + 3.0 * theta)
            / (((1.0 + 3.0 * theta) * gamma - 1.0) * (1.0 + beta).powf(theta));
    let decay = (k as f64 + beta).powf(-nu);
    let lower = a_lower * decay;
    let upper = a_upper * decay;

    // truncated double series with integral-comparison remainders
    let t1 = DEFAULT_SERIES_HORIZON.max(10 * k);
    let cubes = CubeSeries::with_horizon(schedule, t1)?;
    let mut sum = KahanSum::default();
    let mut inner_error = 0.0;
    for t in k..=t1 {
        let step = schedule.step_size(t);
        let tail = cubes.tail(t);
        let powered = tail.value.powf(theta);
        sum.add(step * powered);
        // first-order effect of the inner enclosure on tail^θ
        inner_error += step * theta * powered * (0.5 * tail.remainder) / tail.value;
    }
    // enclosure of the omitted outer tail Σ_{t>T₁} α_t (Σ_{j≥t} α_j³)^θ:
    // below by the integral of the inner lower bound, above term-by-term via
    // (a+b)^θ ≤ a^θ + b^θ
    let next = (t1 + 1) as f64 + beta;
    let r_lo = a_theta * alpha * next.powf(-nu) / nu;
    let p13 = 1.0 + 3.0 * theta;
    let r_up = (alpha / next.powf(gamma)).powf(p13)
        + alpha.powf(p13) * next.powf(1.0 - p13 * gamma) / (p13 * gamma - 1.0)
        + a_theta * alpha * next.powf(-(nu + 1.0))
        + r_lo;
    let empirical = sum.value() + 0.5 * (r_lo + r_up);
    let empirical_remainder = (r_up - r_lo) + 2.0 * inner_error;

    Ok(TailBracket {
        nu,
        a_lower,
        a_upper,
        lower,
        upper,
        empirical,
        empirical_remainder,
    })
}
