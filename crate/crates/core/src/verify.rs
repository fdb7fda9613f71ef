//! Numerical certification of per-epoch inequalities on recorded runs.
//!
//! Every check compares a left side against a right side per epoch (or per
//! sample point) and records the signed slack `lhs − rhs`. A record passes
//! when `lhs ≤ rhs + tol·max(1, |rhs|)`, with any series-evaluation
//! remainder folded into the tolerance for that record. Checks with no
//! admissible epochs or points report [`CheckStatus::Vacuous`] rather than
//! passing silently.
//!
//! Epochs before the first admissible one (step size above `1/(√2LN)`) are
//! excluded: the per-epoch recursions only bind from there on.

use crate::linalg;
use crate::optim::{Trajectory, Variant};
use crate::problems::{FiniteSumProblem, KlDescriptor};
use crate::schedules::{
    first_valid_iteration, g_constant, GrowthBound, NoiseSequence, StepSchedule,
};
use std::io::{self, Write};
use thiserror::Error;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("trajectory has no inner iterates (record_inner was off)")]
    MissingInnerIterates,
    #[error("schedule mismatch at epoch {epoch}: trajectory recorded {recorded}, schedule gives {expected}")]
    ScheduleMismatch {
        epoch: usize,
        recorded: f64,
        expected: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Schedule(#[from] crate::schedules::ScheduleError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// No admissible epochs/points, deliberately distinct from a pass.
    Vacuous,
}

/// One comparison: `lhs ≤ rhs` expected, `slack = lhs − rhs`. For sampled
/// checks the `epoch` field is the sample index instead.
#[derive(Clone, Copy, Debug)]
pub struct CheckRecord {
    pub epoch: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Absolute tolerance for this record (relative part already applied,
    /// plus any series remainder).
    pub tolerance: f64,
}

#[derive(Clone, Debug)]
pub struct ViolationReport {
    pub name: String,
    pub tolerance: f64,
    pub checks: Vec<CheckRecord>,
    /// Worst positive slack over all records (0 when every slack is ≤ 0).
    pub max_violation: f64,
    pub status: CheckStatus,
}

impl ViolationReport {
    fn new(name: &str, tolerance: f64, checks: Vec<CheckRecord>) -> Self {
        let status = if checks.is_empty() {
            CheckStatus::Vacuous
        } else if checks.iter().any(|c| c.slack > c.tolerance) {
            CheckStatus::Fail
        } else {
            CheckStatus::Pass
        };
        let max_violation = checks.iter().map(|c| c.slack).fold(0.0f64, f64::max);
        ViolationReport {
            name: name.to_string(),
            tolerance,
            checks,
            max_violation,
            status,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn is_vacuous(&self) -> bool {
        self.status == CheckStatus::Vacuous
    }

    /// Records that exceed their tolerance.
    pub fn violations(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| c.slack > c.tolerance)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        use crate::optim::format_float as ff;
        writeln!(w, "check,epoch,lhs,rhs,slack")?;
        for c in &self.checks {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.name,
                c.epoch,
                ff(c.lhs),
                ff(c.rhs),
                ff(c.slack)
            )?;
        }
        Ok(())
    }

    pub fn summary_line(&self) -> String {
        match self.status {
            CheckStatus::Vacuous => format!("{}: VACUOUS (no admissible checks)", self.name),
            CheckStatus::Pass => format!(
                "{}: PASS ({} checks, worst slack {:.3e}, tol {:.1e})",
                self.name,
                self.checks.len(),
                self.checks
                    .iter()
                    .map(|c| c.slack)
                    .fold(f64::NEG_INFINITY, f64::max),
                self.tolerance
            ),
            CheckStatus::Fail => format!(
                "{}: FAIL ({} of {} checks violated, worst {:.3e}, tol {:.1e})",
                self.name,
                self.violations().count(),
                self.checks.len(),
                self.max_violation,
                self.tolerance
            ),
        }
    }
}

fn rel_tol(tolerance: f64, rhs: f64) -> f64 {
    tolerance * 1.0f64.max(rhs.abs())
}

/// Epoch range on which the recursion hypotheses hold, after validating the
/// recorded steps against the schedule.
fn admissible_epochs(
    traj: &Trajectory,
    schedule: &StepSchedule,
    lipschitz: f64,
) -> Result<std::ops::RangeInclusive<usize>, VerifyError> {
    for (k, &recorded) in traj.steps.iter().enumerate() {
        let expected = schedule.step_size(k + 1);
        if (recorded - expected).abs() > 1e-12 * expected.abs() {
            return Err(VerifyError::ScheduleMismatch {
                epoch: k + 1,
                recorded,
                expected,
            });
        }
    }
    let start = first_valid_iteration(schedule, lipschitz, traj.meta.num_components);
    Ok(start..=traj.epochs())
}

/// Per-epoch recursion on the function-value gap:
/// `f(xᵗ) − f̄ ≤ (1 + κL³N³α³)(f(xᵗ⁻¹) − f̄) − (Nα/2)‖∇f(xᵗ⁻¹)‖²
///  − ((1−LNα)/(2Nα))‖xᵗ−xᵗ⁻¹‖²`, κ = 2 for gradient variants, 6 for the
/// proximal one.
pub fn verify_epoch_recursion(
    traj: &Trajectory,
    problem: &FiniteSumProblem,
    schedule: &StepSchedule,
    variant: Variant,
) -> Result<ViolationReport, VerifyError> {
    let tol = DEFAULT_TOLERANCE;
    let l = problem.lipschitz();
    let n = problem.num_components() as f64;
    let fbar = problem.f_bar_min();
    let kappa = variant.noise_kappa();
    let epochs = admissible_epochs(traj, schedule, l)?;
    let mut checks = Vec::new();
    for t in epochs {
        let a = traj.steps[t - 1];
        let move_sq = {
            let d = linalg::dist(&traj.outer[t], &traj.outer[t - 1]);
            d * d
        };
        let grad_sq = traj.grad_norms[t - 1] * traj.grad_norms[t - 1];
        let lhs = traj.values[t] - fbar;
        let rhs = (1.0 + kappa * l.powi(3) * n.powi(3) * a.powi(3)) * (traj.values[t - 1] - fbar)
            - 0.5 * n * a * grad_sq
            - (1.0 - l * n * a) / (2.0 * n * a) * move_sq;
        checks.push(CheckRecord {
            epoch: t,
            lhs,
            rhs,
            slack: lhs - rhs,
            tolerance: rel_tol(tol, rhs),
        });
    }
    Ok(ViolationReport::new("epoch_recursion", tol, checks))
}

/// Approximate descent with the accumulated-noise allowance:
/// `f(xᵗ) ≤ f(xᵗ⁻¹) − (Nα/2)‖∇f(xᵗ⁻¹)‖² − ((1−LNα)/(2Nα))‖xᵗ−xᵗ⁻¹‖²
///  + 2GL³N³α³`.
pub fn verify_approx_descent(
    traj: &Trajectory,
    problem: &FiniteSumProblem,
    schedule: &StepSchedule,
    growth: &GrowthBound,
) -> Result<ViolationReport, VerifyError> {
    if !growth.value.is_finite() {
        return Err(VerifyError::InvalidParameter(
            "growth bound is not finite; the schedule is too aggressive to certify".into(),
        ));
    }
    let tol = DEFAULT_TOLERANCE;
    let l = problem.lipschitz();
    let n = problem.num_components() as f64;
    let epochs = admissible_epochs(traj, schedule, l)?;
    // enclosure width of G feeds the per-epoch noise term
    let g_uncertainty = growth.value * growth.exponent.remainder;
    let mut checks = Vec::new();
    for t in epochs {
        let a = traj.steps[t - 1];
        let move_sq = {
            let d = linalg::dist(&traj.outer[t], &traj.outer[t - 1]);
            d * d
        };
        let grad_sq = traj.grad_norms[t - 1] * traj.grad_norms[t - 1];
        let noise = 2.0 * growth.value * l.powi(3) * n.powi(3) * a.powi(3);
        let lhs = traj.values[t];
        let rhs = traj.values[t - 1]
            - 0.5 * n * a * grad_sq
            - (1.0 - l * n * a) / (2.0 * n * a) * move_sq
            + noise;
        let extra = 2.0 * g_uncertainty * l.powi(3) * n.powi(3) * a.powi(3);
        checks.push(CheckRecord {
            epoch: t,
            lhs,
            rhs,
            slack: lhs - rhs,
            tolerance: rel_tol(tol, rhs) + extra,
        });
    }
    Ok(ViolationReport::new("approx_descent", tol, checks))
}

/// Inner-deviation bound `V_t = Σᵢ ‖xᵗ⁻¹ − x̃ᵗᵢ₋₁‖² ≤ 4LN³α²(f(xᵗ⁻¹) − f̄)`.
/// Needs inner iterates.
pub fn verify_variance_bound(
    traj: &Trajectory,
    problem: &FiniteSumProblem,
    schedule: &StepSchedule,
) -> Result<ViolationReport, VerifyError> {
    let inner = traj
        .inner
        .as_ref()
        .ok_or(VerifyError::MissingInnerIterates)?;
    let tol = DEFAULT_TOLERANCE;
    let l = problem.lipschitz();
    let n = problem.num_components();
    let fbar = problem.f_bar_min();
    let epochs = admissible_epochs(traj, schedule, l)?;
    let mut checks = Vec::new();
    for t in epochs {
        let a = traj.steps[t - 1];
        // deviations of x̃₀ … x̃_{N−1} from the epoch's starting point
        let v_t: f64 = (0..n)
            .map(|i| {
                let d = linalg::dist(&traj.outer[t - 1], &inner[t - 1][i]);
                d * d
            })
            .sum();
        let rhs = 4.0 * l * (n as f64).powi(3) * a * a * (traj.values[t - 1] - fbar);
        checks.push(CheckRecord {
            epoch: t,
            lhs: v_t,
            rhs,
            slack: v_t - rhs,
            tolerance: rel_tol(tol, rhs),
        });
    }
    Ok(ViolationReport::new("variance_bound", tol, checks))
}

/// Monotonicity of the compensated values: `f(xᵗ) + u_t ≤ f(xᵗ⁻¹) + u_{t−1}`
/// with `u_t = 2GL³N³ Σ_{j>t} α_j³`. The raw values may rise between epochs;
/// the compensated sequence must not.
pub fn verify_lyapunov_monotone(
    traj: &Trajectory,
    schedule: &StepSchedule,
    growth: &GrowthBound,
    lipschitz: f64,
    num_components: usize,
) -> Result<ViolationReport, VerifyError> {
    let tol = DEFAULT_TOLERANCE;
    let noise = NoiseSequence::new(schedule, growth.value, lipschitz, num_components)?;
    let epochs = admissible_epochs(traj, schedule, lipschitz)?;
    let mut checks = Vec::new();
    for t in epochs {
        let u_cur = noise.u(t);
        let u_prev = noise.u(t - 1);
        let lhs = traj.values[t] + u_cur.value;
        let rhs = traj.values[t - 1] + u_prev.value;
        checks.push(CheckRecord {
            epoch: t,
            lhs,
            rhs,
            slack: lhs - rhs,
            tolerance: rel_tol(tol, rhs) + u_cur.remainder + u_prev.remainder,
        });
    }
    Ok(ViolationReport::new("lyapunov_monotone", tol, checks))
}

/// Component-gradient bound `‖∇f(x,i)‖² ≤ 2L(f(x,i) − f̄_min)` at sampled
/// points. The `epoch` field is `point_index * N + i`.
pub fn verify_component_grad_bound(
    problem: &FiniteSumProblem,
    points: &[Vec<f64>],
) -> ViolationReport {
    let tol = DEFAULT_TOLERANCE;
    let l = problem.lipschitz();
    let fbar = problem.f_bar_min();
    let n = problem.num_components();
    let mut checks = Vec::new();
    for (k, x) in points.iter().enumerate() {
        for i in 0..n {
            let g = linalg::norm(&problem.component_gradient(x, i));
            let lhs = g * g;
            let rhs = 2.0 * l * (problem.component_value(x, i) - fbar);
            checks.push(CheckRecord {
                epoch: k * n + i,
                lhs,
                rhs,
                slack: lhs - rhs,
                tolerance: rel_tol(tol, rhs),
            });
        }
    }
    ViolationReport::new("component_grad_bound", tol, checks)
}

/// Smoothness upper bound per component over sampled pairs, as a report.
/// The `epoch` field is `pair_index * N + i`.
pub fn verify_descent_lemma(
    problem: &FiniteSumProblem,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> ViolationReport {
    let tol = DEFAULT_TOLERANCE;
    let l = problem.lipschitz();
    let n = problem.num_components();
    let mut checks = Vec::new();
    for (k, (x, y)) in pairs.iter().enumerate() {
        let step = linalg::sub(y, x);
        let sq = linalg::dot(&step, &step);
        for i in 0..n {
            let g = problem.component_gradient(x, i);
            let lhs = problem.component_value(y, i);
            let rhs = problem.component_value(x, i) + linalg::dot(&g, &step) + 0.5 * l * sq;
            checks.push(CheckRecord {
                epoch: k * n + i,
                lhs,
                rhs,
                slack: lhs - rhs,
                tolerance: rel_tol(tol, rhs),
            });
        }
    }
    ViolationReport::new("descent_lemma", tol, checks)
}

/// Łojasiewicz inequality `|f(x) − f*|^θ ≤ c(1−θ)‖∇f(x)‖` at the sampled
/// points whose gap lies in `(0, η)`. Points outside the band are skipped;
/// if none qualify the report is vacuous.
pub fn kl_inequality_check(
    problem: &FiniteSumProblem,
    kl: &KlDescriptor,
    points: &[Vec<f64>],
) -> ViolationReport {
    let tol = DEFAULT_TOLERANCE;
    let mut checks = Vec::new();
    for (k, x) in points.iter().enumerate() {
        let gap = (problem.full_value(x) - kl.f_star).abs();
        if !(gap > 0.0 && gap < kl.eta) {
            continue;
        }
        let lhs = gap.powf(kl.theta);
        let rhs = kl.c * (1.0 - kl.theta) * linalg::norm(&problem.full_gradient(x));
        checks.push(CheckRecord {
            epoch: k,
            lhs,
            rhs,
            slack: lhs - rhs,
            tolerance: rel_tol(tol, rhs),
        });
    }
    ViolationReport::new("kl_inequality", tol, checks)
}

/// Damping regimes for the scalar recursion oracle.
#[derive(Clone, Copy, Debug)]
pub enum RecursionMode {
    /// `z_{k+1} = (1 − q/(k+b)) z_k + d/(k+b)^{p+1}` with `q > p > 0`;
    /// then `(k+b)^p · z_k → d/(q−p)`.
    LinearDamping { q: f64, p: f64 },
    /// `z_{k+1} = (1 − q/(k+b)^s) z_k + d/(k+b)^τ` with `s ∈ (0,1)`,
    /// `τ > s`, `q > 0`; then `(k+b)^{τ−s} · z_k → d/q`.
    PowerDamping { q: f64, s: f64, tau: f64 },
}

#[derive(Clone, Debug)]
pub struct RecursionOracle {
    /// `z_1 … z_K`.
    pub z: Vec<f64>,
    /// `z_K` rescaled by the predicted decay power.
    pub limit_estimate: f64,
    /// The closed-form asymptote the estimate should approach.
    pub predicted_limit: f64,
}

/// Simulate the extremal (equality) case of the damped scalar recursions
/// and report the rescaled terminal value against its closed-form limit.
pub fn polyak_recursion_oracle(
    mode: RecursionMode,
    b: f64,
    d: f64,
    z1: f64,
    horizon: usize,
) -> Result<RecursionOracle, VerifyError> {
    if b < 0.0 || b.is_nan() {
        return Err(VerifyError::InvalidParameter(format!(
            "b must be nonnegative, got {b}"
        )));
    }
    if d < 0.0 || d.is_nan() {
        return Err(VerifyError::InvalidParameter(format!(
            "d must be nonnegative, got {d}"
        )));
    }
    if horizon < 2 {
        return Err(VerifyError::InvalidParameter(
            "horizon must be at least 2".into(),
        ));
    }
    match mode {
        RecursionMode::LinearDamping { q, p } => {
            if !(q > p && p > 0.0) {
                return Err(VerifyError::InvalidParameter(format!(
                    "linear damping needs q > p > 0, got q = {q}, p = {p}"
                )));
            }
        }
        RecursionMode::PowerDamping { q, s, tau } => {
            if !(s > 0.0 && s < 1.0) {
                return Err(VerifyError::InvalidParameter(format!(
                    "s must lie in (0,1), got {s}"
                )));
            }
            if tau <= s || tau.is_nan() {
                return Err(VerifyError::InvalidParameter(format!(
                    "tau must exceed s, got tau = {tau}, s = {s}"
                )));
            }
            if q <= 0.0 || q.is_nan() {
                return Err(VerifyError::InvalidParameter(format!(
                    "q must be positive, got {q}"
                )));
            }
        }
    }

    let mut z = Vec::with_capacity(horizon);
    z.push(z1);
    let mut cur = z1;
    for k in 1..horizon {
        let kb = k as f64 + b;
        cur = match mode {
            RecursionMode::LinearDamping { q, p } => (1.0 - q / kb) * cur + d / kb.powf(p + 1.0),
            RecursionMode::PowerDamping { q, s, tau } => {
                (1.0 - q / kb.powf(s)) * cur + d / kb.powf(tau)
            }
        };
        z.push(cur);
    }
    let kb = horizon as f64 + b;
    let (limit_estimate, predicted_limit) = match mode {
        RecursionMode::LinearDamping { q, p } => (cur * kb.powf(p), d / (q - p)),
        RecursionMode::PowerDamping { q, s, tau } => (cur * kb.powf(tau - s), d / q),
    };
    Ok(RecursionOracle {
        z,
        limit_estimate,
        predicted_limit,
    })
}

/// Everything the suite needs to sample check points deterministically.
#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub grad_bound_points: usize,
    pub descent_lemma_pairs: usize,
    pub kl_points: usize,
    pub sample_seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            grad_bound_points: 1000,
            descent_lemma_pairs: 200,
            kl_points: 1000,
            sample_seed: 7,
        }
    }
}

/// Run the whole inequality suite over a recorded trajectory: the two
/// per-epoch recursions, the inner-deviation bound (when inner iterates are
/// present), compensated-value monotonicity, and the sampled pointwise
/// bounds.
pub fn full_suite(
    problem: &FiniteSumProblem,
    traj: &Trajectory,
    options: &SuiteOptions,
) -> Result<Vec<ViolationReport>, VerifyError> {
    let schedule = traj.meta.schedule;
    let variant = traj.meta.variant;
    let l = problem.lipschitz();
    let n = problem.num_components();
    // Schedules outside the summability window (or with an overflowing
    // growth bound) leave G undefined; the checks that depend on it are
    // then reported vacuous while everything else still runs.
    let growth = match g_constant(
        &schedule,
        traj.values[0] - problem.f_bar_min(),
        variant,
        l,
        n,
    ) {
        Ok(g) if g.value.is_finite() => Some(g),
        Ok(_) => None,
        Err(crate::schedules::ScheduleError::DivergentSeries { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let vacuous = |name: &str| ViolationReport::new(name, DEFAULT_TOLERANCE, Vec::new());
    let mut reports = vec![verify_epoch_recursion(traj, problem, &schedule, variant)?];
    match &growth {
        Some(g) => reports.push(verify_approx_descent(traj, problem, &schedule, g)?),
        None => reports.push(vacuous("approx_descent")),
    }
    if traj.inner.is_some() {
        reports.push(verify_variance_bound(traj, problem, &schedule)?);
    } else {
        // no inner iterates recorded: surface the skipped check as vacuous
        // instead of dropping it silently
        reports.push(vacuous("variance_bound"));
    }
    match &growth {
        Some(g) => reports.push(verify_lyapunov_monotone(traj, &schedule, g, l, n)?),
        None => reports.push(vacuous("lyapunov_monotone")),
    }

    let mut rng = crate::rng::SplitMix64::new(options.sample_seed);
    let points: Vec<Vec<f64>> = (0..options.grad_bound_points)
        .map(|_| rng.point_in_ball(problem.dim(), problem.working_radius()))
        .collect();
    reports.push(verify_component_grad_bound(problem, &points));

    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..options.descent_lemma_pairs)
        .map(|_| {
            (
                rng.point_in_ball(problem.dim(), problem.working_radius()),
                rng.point_in_ball(problem.dim(), problem.working_radius()),
            )
        })
        .collect();
    reports.push(verify_descent_lemma(problem, &pairs));

    if let (Some(kl), Some(x_star)) = (problem.kl(), problem.minimizer()) {
        // rejection-sample the validity band around the minimizer, shrinking
        // the proposal radius if acceptance is poor
        let mut radius = problem.working_radius();
        let mut kl_points = Vec::new();
        let mut attempts = 0usize;
        while kl_points.len() < options.kl_points && attempts < 200_000 {
            attempts += 1;
            if attempts.is_multiple_of(20_000) {
                radius *= 0.5;
            }
            let mut x = rng.point_in_ball(problem.dim(), radius);
            linalg::axpy(&mut x, 1.0, x_star);
            let gap = (problem.full_value(&x) - kl.f_star).abs();
            if gap > 0.0 && gap < kl.eta {
                kl_points.push(x);
            }
        }
        reports.push(kl_inequality_check(problem, kl, &kl_points));
    }
    Ok(reports)
}
