//! Epoch-structured optimizers over a finite-sum problem.
//!
//! One epoch processes all `N` components sequentially in a permuted order:
//! starting from `x̃₀ = x^{t−1}`, either gradient steps
//! `x̃ᵢ = x̃ᵢ₋₁ − α_t ∇f(x̃ᵢ₋₁, σᵢ)` (reshuffled/incremental gradient) or
//! proximal steps `x̃ᵢ = argmin f(·, σᵢ) + ‖· − x̃ᵢ₋₁‖²/(2α_t)` (shuffled
//! proximal point), with `x^t = x̃_N`.
//!
//! A run is a pure function of `(problem, x0, schedule, epochs, seed,
//! variant)`; permutation streams are counter-based per epoch, so identical
//! seeds give bitwise identical trajectories.

mod trajectory;

pub use trajectory::{format_float, RunMeta, Trajectory, TrajectoryIoError};

use crate::linalg;
use crate::problems::FiniteSumProblem;
use crate::rng::SplitMix64;
use crate::schedules::StepSchedule;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inner solver tolerance on the implicit prox identity
/// `x̃ᵢ = x̃ᵢ₋₁ − α ∇f(x̃ᵢ, σᵢ)`.
pub const PROX_RESIDUAL_TOL: f64 = 1e-10;
const PROX_MAX_ITERS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Random reshuffling: a fresh uniform permutation every epoch.
    Rr,
    /// Incremental gradient: the identity permutation every epoch.
    Ig,
    /// Shuffled proximal point: exact proximal steps per component.
    Sppm,
}

impl Variant {
    /// Coefficient κ in the per-epoch noise factor `1 + κ L³N³ α_t³`.
    pub fn noise_kappa(self) -> f64 {
        match self {
            Variant::Rr | Variant::Ig => 2.0,
            Variant::Sppm => 6.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Rr => "rr",
            Variant::Ig => "ig",
            Variant::Sppm => "sppm",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rr" => Ok(Variant::Rr),
            "ig" => Ok(Variant::Ig),
            "sppm" => Ok(Variant::Sppm),
            other => Err(format!(
                "unknown variant '{other}' (expected rr, ig or sppm)"
            )),
        }
    }
}

/// Where each epoch's component order comes from.
#[derive(Clone, Debug)]
pub enum PermutationSource {
    /// Fresh uniform permutation per epoch, derived from `(seed, epoch)`.
    UniformRandom { seed: u64 },
    /// The identity order every epoch.
    FixedIdentity,
    /// A pre-specified list, one permutation per epoch.
    ExplicitList(Vec<Vec<usize>>),
}

#[derive(Debug, Error)]
pub enum PermutationError {
    #[error("explicit permutation list exhausted at epoch {epoch} ({available} entries)")]
    ListExhausted { epoch: usize, available: usize },
    #[error("explicit entry for epoch {epoch} is not a permutation of 0..{n}")]
    NotAPermutation { epoch: usize, n: usize },
}

impl PermutationSource {
    /// The order `σᵗ` for epoch `t ≥ 1` over components `0..n`.
    pub fn sample(&self, t: usize, n: usize) -> Result<Vec<usize>, PermutationError> {
        assert!(t >= 1, "epochs are indexed from t = 1");
        match self {
            PermutationSource::UniformRandom { seed } => {
                Ok(SplitMix64::for_epoch(*seed, t).permutation(n))
            }
            PermutationSource::FixedIdentity => Ok((0..n).collect()),
            PermutationSource::ExplicitList(list) => {
                let perm = list
                    .get(t - 1)
                    .ok_or(PermutationError::ListExhausted {
                        epoch: t,
                        available: list.len(),
                    })?
                    .clone();
                let mut seen = vec![false; n];
                let valid = perm.len() == n
                    && perm
                        .iter()
                        .all(|&i| i < n && !std::mem::replace(&mut seen[i], true));
                if !valid {
                    return Err(PermutationError::NotAPermutation { epoch: t, n });
                }
                Ok(perm)
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            PermutationSource::UniformRandom { seed } => Some(*seed),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone)]
pub enum EpochError {
    #[error("non-finite gradient at inner step {position} (component {component})")]
    NonFiniteGradient { position: usize, component: usize },
    #[error("non-finite iterate produced at inner step {position}")]
    NonFiniteIterate { position: usize },
    #[error(
        "prox solver did not converge at inner step {position} (component {component}), residual {residual:.3e}"
    )]
    ProxDidNotConverge {
        position: usize,
        component: usize,
        residual: f64,
    },
}

/// What one epoch abort looks like from the outside: the epoch, the inner
/// step, and the partially recorded trajectory up to `x^{t-1}`.
#[derive(Debug, Error)]
#[error("epoch {epoch} failed: {failure}")]
pub struct RunError {
    pub epoch: usize,
    pub failure: RunFailure,
    pub partial: Trajectory,
}

#[derive(Debug, Error)]
pub enum RunFailure {
    #[error(transparent)]
    Permutation(#[from] PermutationError),
    #[error(transparent)]
    Epoch(#[from] EpochError),
}

pub struct EpochResult {
    pub next: Vec<f64>,
    /// All `N+1` inner iterates `x̃₀ … x̃_N` when recording is on.
    pub inner: Option<Vec<Vec<f64>>>,
}

/// One reshuffled-gradient epoch from `x` with step `alpha` in order `perm`.
pub fn rr_epoch(
    problem: &FiniteSumProblem,
    x: &[f64],
    alpha: f64,
    perm: &[usize],
    record_inner: bool,
) -> Result<EpochResult, EpochError> {
    assert!(alpha > 0.0, "step size must be positive");
    debug_assert_eq!(perm.len(), problem.num_components());
    let mut cur = x.to_vec();
    let mut inner = record_inner.then(|| vec![cur.clone()]);
    for (pos, &i) in perm.iter().enumerate() {
        let g = problem.component_gradient(&cur, i);
        if !linalg::all_finite(&g) {
            return Err(EpochError::NonFiniteGradient {
                position: pos,
                component: i,
            });
        }
        linalg::axpy(&mut cur, -alpha, &g);
        if !linalg::all_finite(&cur) {
            return Err(EpochError::NonFiniteIterate { position: pos });
        }
        if let Some(list) = inner.as_mut() {
            list.push(cur.clone());
        }
    }
    Ok(EpochResult { next: cur, inner })
}

/// One shuffled-proximal epoch. Uses the problem's exact prox where
/// available; otherwise solves the subproblem by gradient descent with the
/// fixed step `α/(1+αL)` (the subproblem is `1/α − L` strongly convex for
/// admissible `α`), stopping on the implicit-identity residual.
pub fn sppm_epoch(
    problem: &FiniteSumProblem,
    x: &[f64],
    alpha: f64,
    perm: &[usize],
    record_inner: bool,
) -> Result<EpochResult, EpochError> {
    assert!(alpha > 0.0, "step size must be positive");
    debug_assert_eq!(perm.len(), problem.num_components());
    let mut cur = x.to_vec();
    let mut inner = record_inner.then(|| vec![cur.clone()]);
    for (pos, &i) in perm.iter().enumerate() {
        let next = match problem.component_prox(&cur, i, alpha) {
            Some(z) => z,
            None => fallback_prox(problem, &cur, i, alpha).map_err(|residual| {
                EpochError::ProxDidNotConverge {
                    position: pos,
                    component: i,
                    residual,
                }
            })?,
        };
        if !linalg::all_finite(&next) {
            return Err(EpochError::NonFiniteIterate { position: pos });
        }
        cur = next;
        if let Some(list) = inner.as_mut() {
            list.push(cur.clone());
        }
    }
    Ok(EpochResult { next: cur, inner })
}

fn fallback_prox(
    problem: &FiniteSumProblem,
    anchor: &[f64],
    i: usize,
    alpha: f64,
) -> Result<Vec<f64>, f64> {
    let damping = alpha / (1.0 + alpha * problem.lipschitz());
    let mut z = anchor.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..PROX_MAX_ITERS {
        let g = problem.component_gradient(&z, i);
        // r = z − (anchor − α∇f(z,i)) = α·∇φ(z) for the prox objective φ
        let r: Vec<f64> = z
            .iter()
            .zip(anchor)
            .zip(&g)
            .map(|((zj, aj), gj)| zj - aj + alpha * gj)
            .collect();
        residual = linalg::norm(&r);
        if residual <= PROX_RESIDUAL_TOL {
            return Ok(z);
        }
        linalg::axpy(&mut z, -damping / alpha, &r);
    }
    Err(residual)
}

/// Run `epochs` epochs of the chosen variant, recording the trajectory.
///
/// `Variant::Ig` always uses the identity order; the supplied source only
/// matters for `Rr` and `Sppm`. On a numerical failure the partially
/// recorded trajectory is returned inside the error.
pub fn run(
    problem: &FiniteSumProblem,
    x0: &[f64],
    schedule: &StepSchedule,
    epochs: usize,
    source: &PermutationSource,
    variant: Variant,
    record_inner: bool,
) -> Result<Trajectory, Box<RunError>> {
    assert!(epochs >= 1, "need at least one epoch");
    assert_eq!(x0.len(), problem.dim(), "x0 has wrong dimension");
    assert!(linalg::all_finite(x0), "x0 must be finite");

    let n = problem.num_components();
    let meta = RunMeta {
        problem: problem.id().to_string(),
        variant,
        schedule: *schedule,
        seed: if variant == Variant::Ig {
            None
        } else {
            source.seed()
        },
        epochs,
        dim: problem.dim(),
        num_components: n,
        record_inner,
    };
    let mut traj = Trajectory {
        meta,
        outer: vec![x0.to_vec()],
        inner: record_inner.then(Vec::new),
        values: vec![problem.full_value(x0)],
        grad_norms: vec![linalg::norm(&problem.full_gradient(x0))],
        steps: Vec::new(),
        perms: Vec::new(),
    };

    let identity = PermutationSource::FixedIdentity;
    let effective_source = if variant == Variant::Ig {
        &identity
    } else {
        source
    };

    let mut x = x0.to_vec();
    for t in 1..=epochs {
        let alpha = schedule.step_size(t);
        let abort = |failure: RunFailure, partial: Trajectory| {
            Box::new(RunError {
                epoch: t,
                failure,
                partial,
            })
        };
        let perm = match effective_source.sample(t, n) {
            Ok(p) => p,
            Err(e) => return Err(abort(e.into(), traj)),
        };
        let stepped = match variant {
            Variant::Rr | Variant::Ig => rr_epoch(problem, &x, alpha, &perm, record_inner),
            Variant::Sppm => sppm_epoch(problem, &x, alpha, &perm, record_inner),
        };
        let result = match stepped {
            Ok(r) => r,
            Err(e) => return Err(abort(e.into(), traj)),
        };
        x = result.next;
        let value = problem.full_value(&x);
        let grad_norm = linalg::norm(&problem.full_gradient(&x));
        if !value.is_finite() || !grad_norm.is_finite() {
            return Err(abort(
                EpochError::NonFiniteIterate {
                    position: n.saturating_sub(1),
                }
                .into(),
                traj,
            ));
        }
        traj.outer.push(x.clone());
        traj.values.push(value);
        traj.grad_norms.push(grad_norm);
        traj.steps.push(alpha);
        traj.perms.push(perm);
        if let (Some(all), Some(these)) = (traj.inner.as_mut(), result.inner) {
            all.push(these);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests;
