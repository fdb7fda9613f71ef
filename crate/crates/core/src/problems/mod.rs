//! Finite-sum problem abstraction and built-in test problems.
//!
//! A problem stores only its `N` components; the objective is always the
//! arithmetic mean `f(x) = (1/N) Σᵢ f(x, i)`. Components are indexed
//! `0..N` in code (the math convention `1..N` shifted down by one).
//!
//! Every problem carries the analytic metadata the verification harness
//! needs: a gradient-Lipschitz constant `L` valid on (at least) the working
//! ball, exact per-component lower bounds whose minimum is `f̄_min`, and,
//! where known, the minimizer and a Łojasiewicz descriptor at it.

mod builtins;

pub use builtins::{double_well_stationary_point, make_double_well, make_power, make_quadratic};

use crate::linalg;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Łojasiewicz data at a stationary point: `|f(x) − f*|^θ ≤ c(1−θ)‖∇f(x)‖`
/// for all `x` near the point with `0 < |f(x) − f*| < η`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlDescriptor {
    /// Exponent `θ ∈ [0, 1)`.
    pub theta: f64,
    /// Constant `c > 0`.
    pub c: f64,
    /// Validity threshold on the function-value gap (may be infinite).
    pub eta: f64,
    /// Critical value at the stationary point.
    pub f_star: f64,
}

pub type ValueFn = dyn Fn(&[f64], usize) -> f64 + Send + Sync;
pub type GradientFn = dyn Fn(&[f64], usize) -> Vec<f64> + Send + Sync;
pub type ProxFn = dyn Fn(&[f64], usize, f64) -> Vec<f64> + Send + Sync;

/// A finite-sum problem `min (1/N) Σᵢ f(x, i)`.
///
/// Immutable after construction; all evaluation methods are pure, so a
/// problem may be shared freely across threads.
pub struct FiniteSumProblem {
    id: String,
    dim: usize,
    num_components: usize,
    value: Box<ValueFn>,
    gradient: Box<GradientFn>,
    prox: Option<Box<ProxFn>>,
    lipschitz: f64,
    working_radius: f64,
    component_lower_bounds: Vec<f64>,
    minimizer: Option<Vec<f64>>,
    kl: Option<KlDescriptor>,
}

pub struct ProblemParts {
    pub id: String,
    pub dim: usize,
    pub num_components: usize,
    pub value: Box<ValueFn>,
    pub gradient: Box<GradientFn>,
    /// Exact minimizer of `f(·, i) + ‖· − x‖²/(2α)` where a closed form (or a
    /// solver of equivalent accuracy) exists.
    pub prox: Option<Box<ProxFn>>,
    pub lipschitz: f64,
    pub working_radius: f64,
    pub component_lower_bounds: Vec<f64>,
    pub minimizer: Option<Vec<f64>>,
    pub kl: Option<KlDescriptor>,
}

impl FiniteSumProblem {
    pub fn new(parts: ProblemParts) -> Result<Self, ProblemError> {
        if parts.dim == 0 {
            return Err(ProblemError::InvalidParameter(
                "dimension must be positive".into(),
            ));
        }
        if parts.num_components == 0 {
            return Err(ProblemError::InvalidParameter(
                "component count must be positive".into(),
            ));
        }
        if parts.lipschitz <= 0.0 || parts.lipschitz.is_nan() {
            return Err(ProblemError::InvalidParameter(
                "Lipschitz constant must be positive".into(),
            ));
        }
        if parts.working_radius <= 0.0 || parts.working_radius.is_nan() {
            return Err(ProblemError::InvalidParameter(
                "working radius must be positive".into(),
            ));
        }
        if parts.component_lower_bounds.len() != parts.num_components {
            return Err(ProblemError::InvalidParameter(
                "need one lower bound per component".into(),
            ));
        }
        if let Some(x) = &parts.minimizer {
            if x.len() != parts.dim {
                return Err(ProblemError::InvalidParameter(
                    "minimizer has wrong dimension".into(),
                ));
            }
        }
        Ok(FiniteSumProblem {
            id: parts.id,
            dim: parts.dim,
            num_components: parts.num_components,
            value: parts.value,
            gradient: parts.gradient,
            prox: parts.prox,
            lipschitz: parts.lipschitz,
            working_radius: parts.working_radius,
            component_lower_bounds: parts.component_lower_bounds,
            minimizer: parts.minimizer,
            kl: parts.kl,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn working_radius(&self) -> f64 {
        self.working_radius
    }

    pub fn component_lower_bounds(&self) -> &[f64] {
        &self.component_lower_bounds
    }

    /// `f̄_min`, the minimum of the per-component lower bounds.
    pub fn f_bar_min(&self) -> f64 {
        self.component_lower_bounds
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    pub fn kl(&self) -> Option<&KlDescriptor> {
        self.kl.as_ref()
    }

    pub fn has_prox(&self) -> bool {
        self.prox.is_some()
    }

    /// `f(x, i)`.
    pub fn component_value(&self, x: &[f64], i: usize) -> f64 {
        debug_assert!(i < self.num_components);
        (self.value)(x, i)
    }

    /// `∇f(x, i)`.
    pub fn component_gradient(&self, x: &[f64], i: usize) -> Vec<f64> {
        debug_assert!(i < self.num_components);
        (self.gradient)(x, i)
    }

    /// Exact proximal step on component `i`, if the problem provides one.
    pub fn component_prox(&self, x: &[f64], i: usize, alpha: f64) -> Option<Vec<f64>> {
        debug_assert!(alpha > 0.0);
        self.prox.as_ref().map(|p| p(x, i, alpha))
    }

    /// `f(x) = (1/N) Σᵢ f(x, i)`.
    pub fn full_value(&self, x: &[f64]) -> f64 {
        let n = self.num_components;
        (0..n).map(|i| self.component_value(x, i)).sum::<f64>() / n as f64
    }

    /// `∇f(x) = (1/N) Σᵢ ∇f(x, i)`.
    pub fn full_gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.num_components;
        let mut g = vec![0.0; self.dim];
        for i in 0..n {
            linalg::axpy(&mut g, 1.0, &self.component_gradient(x, i));
        }
        for gi in &mut g {
            *gi /= n as f64;
        }
        g
    }
}

impl std::fmt::Debug for FiniteSumProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteSumProblem")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("num_components", &self.num_components)
            .field("lipschitz", &self.lipschitz)
            .field("working_radius", &self.working_radius)
            .field("has_prox", &self.prox.is_some())
            .finish()
    }
}

/// Worst violation of the smoothness upper bound
/// `f(y,i) ≤ f(x,i) + ⟨∇f(x,i), y−x⟩ + (L/2)‖x−y‖²`
/// over the given pairs and all components. A nonpositive result (up to
/// tolerance) certifies the declared `L` on the sampled pairs.
pub fn descent_lemma_check(
    problem: &FiniteSumProblem,
    sample_pairs: &[(Vec<f64>, Vec<f64>)],
) -> f64 {
    let l = problem.lipschitz();
    let mut worst = f64::NEG_INFINITY;
    for (x, y) in sample_pairs {
        let step = linalg::sub(y, x);
        let sq = linalg::dot(&step, &step);
        for i in 0..problem.num_components() {
            let g = problem.component_gradient(x, i);
            let violation = problem.component_value(y, i)
                - problem.component_value(x, i)
                - linalg::dot(&g, &step)
                - 0.5 * l * sq;
            worst = worst.max(violation);
        }
    }
    worst
}

#[cfg(test)]
mod tests;
