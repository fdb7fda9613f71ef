//! Built-in test problems with analytically known structure.
//!
//! Each constructor fills in every piece of metadata the verification
//! harness relies on: an exact gradient-Lipschitz constant, exact
//! per-component lower bounds, the minimizer and a certified Łojasiewicz
//! descriptor.
//!
//! The nonconvex instances (`power`, `double_well`) blend their unbounded
//! tails C¹-smoothly into quadratics outside the declared radius, matching
//! value and gradient on the boundary. The blended functions are
//! gradient-Lipschitz on the whole space, so the smoothness assumption the
//! optimizers need holds globally, while the stationary-point structure and
//! Łojasiewicz exponents inside the ball are untouched.

use super::{FiniteSumProblem, KlDescriptor, ProblemError, ProblemParts};
use crate::linalg;

const KL_SCAN_POINTS: usize = 200_000;
/// Headroom factor on scanned Łojasiewicz constants.
const KL_HEADROOM: f64 = 1.1;

fn validate_rows(
    name: &str,
    rows: &[Vec<f64>],
    n_rows: usize,
    dim: usize,
) -> Result<(), ProblemError> {
    if rows.len() != n_rows {
        return Err(ProblemError::InvalidParameter(format!(
            "{name}: expected {n_rows} rows, got {}",
            rows.len()
        )));
    }
    for (k, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(ProblemError::InvalidParameter(format!(
                "{name}: row {k} has length {}, expected {dim}",
                row.len()
            )));
        }
        if !linalg::all_finite(row) {
            return Err(ProblemError::InvalidParameter(format!(
                "{name}: row {k} is not finite"
            )));
        }
    }
    Ok(())
}

fn validate_zero_column_sums(offsets: &[Vec<f64>], dim: usize) -> Result<(), ProblemError> {
    let scale = offsets
        .iter()
        .flat_map(|r| r.iter())
        .fold(1.0f64, |a, &b| a.max(b.abs()));
    for j in 0..dim {
        let s: f64 = offsets.iter().map(|r| r[j]).sum();
        if s.abs() > 1e-12 * scale {
            return Err(ProblemError::InvalidParameter(format!(
                "offset column {j} sums to {s}, expected 0"
            )));
        }
    }
    Ok(())
}

/// Quadratic components `f(x, i) = ½ (x − aᵢ)ᵀ D (x − aᵢ)` with a shared
/// positive diagonal `D`. The mean is minimized at the anchor average; every
/// component is bounded below by 0 exactly.
pub fn make_quadratic(
    n: usize,
    num_components: usize,
    anchors: &[Vec<f64>],
    eigenvalues: &[f64],
) -> Result<FiniteSumProblem, ProblemError> {
    validate_rows("anchors", anchors, num_components, n)?;
    if eigenvalues.len() != n {
        return Err(ProblemError::InvalidParameter(format!(
            "expected {n} eigenvalues, got {}",
            eigenvalues.len()
        )));
    }
    for &d in eigenvalues {
        if d <= 0.0 || !d.is_finite() {
            return Err(ProblemError::InvalidParameter(format!(
                "nonpositive eigenvalue {d}"
            )));
        }
    }
    let lipschitz = eigenvalues.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mu = eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));

    let mut x_star = vec![0.0; n];
    for a in anchors {
        linalg::axpy(&mut x_star, 1.0 / num_components as f64, a);
    }

    let anchors_v = anchors.to_vec();
    let eig_v = eigenvalues.to_vec();
    let (a1, e1) = (anchors_v.clone(), eig_v.clone());
    let value = move |x: &[f64], i: usize| -> f64 {
        0.5 * x
            .iter()
            .zip(&a1[i])
            .zip(&e1)
            .map(|((xj, aj), dj)| dj * (xj - aj) * (xj - aj))
            .sum::<f64>()
    };
    let (a2, e2) = (anchors_v.clone(), eig_v.clone());
    let gradient = move |x: &[f64], i: usize| -> Vec<f64> {
        x.iter()
            .zip(&a2[i])
            .zip(&e2)
            .map(|((xj, aj), dj)| dj * (xj - aj))
            .collect()
    };
    // argmin of f(·,i) + ‖· − x‖²/(2α) is (I + αD)⁻¹ (x + αD aᵢ), diagonal D
    let (a3, e3) = (anchors_v.clone(), eig_v.clone());
    let prox = move |x: &[f64], i: usize, alpha: f64| -> Vec<f64> {
        x.iter()
            .zip(&a3[i])
            .zip(&e3)
            .map(|((xj, aj), dj)| (xj + alpha * dj * aj) / (1.0 + alpha * dj))
            .collect()
    };

    let max_anchor_norm = anchors_v
        .iter()
        .map(|a| linalg::norm(a))
        .fold(0.0f64, f64::max);
    let f_star = {
        let xs = &x_star;
        (0..num_components).map(|i| value(xs, i)).sum::<f64>() / num_components as f64
    };

    FiniteSumProblem::new(ProblemParts {
        id: "quadratic".into(),
        dim: n,
        num_components,
        value: Box::new(value),
        gradient: Box::new(gradient),
        prox: Some(Box::new(prox)),
        lipschitz,
        working_radius: 2.0 * (1.0 + max_anchor_norm),
        component_lower_bounds: vec![0.0; num_components],
        minimizer: Some(x_star),
        kl: Some(KlDescriptor {
            theta: 0.5,
            c: (2.0 / mu).sqrt(),
            eta: f64::INFINITY,
            f_star,
        }),
    })
}

/// The radial profile of the blended monomial: `r^{2p}/(2p)` inside the
/// radius, a value- and slope-matched quadratic outside.
#[derive(Clone, Copy)]
struct PowerProfile {
    p: i32,
    radius: f64,
    /// Curvature of the outer quadratic, `R^{2p−2}`.
    outer: f64,
    /// Constant term of the outer quadratic.
    shift: f64,
}

impl PowerProfile {
    fn new(p: u32, radius: f64) -> Self {
        let p = p as i32;
        let outer = radius.powi(2 * p - 2);
        let shift = radius.powi(2 * p) * (1.0 / (2.0 * p as f64) - 0.5);
        PowerProfile {
            p,
            radius,
            outer,
            shift,
        }
    }

    fn value(&self, r: f64) -> f64 {
        if r <= self.radius {
            r.powi(2 * self.p) / (2.0 * self.p as f64)
        } else {
            0.5 * self.outer * r * r + self.shift
        }
    }

    /// `g'(r) / r`, the factor multiplying `x` in the gradient.
    fn slope_over_r(&self, r: f64) -> f64 {
        if r <= self.radius {
            r.powi(2 * self.p - 2)
        } else {
            self.outer
        }
    }

    fn slope(&self, r: f64) -> f64 {
        self.slope_over_r(r) * r
    }
}

/// Monotone bisection: smallest-interval root of `f(z) = target` on
/// `[lo, hi]`, assuming `f` is nondecreasing with `f(lo) ≤ target ≤ f(hi)`.
fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Blended monomial components `f(x, i) = h_p(x) + offsetsᵢᵀx` where
/// `h_p(x) = ‖x‖^{2p}/(2p)` inside the radius. Offsets cancel column-wise,
/// so the mean equals `h_p` with a flat minimum at the origin and
/// Łojasiewicz exponent `1 − 1/(2p)` there.
pub fn make_power(
    n: usize,
    num_components: usize,
    p: u32,
    offsets: &[Vec<f64>],
    radius: f64,
) -> Result<FiniteSumProblem, ProblemError> {
    if p < 2 {
        return Err(ProblemError::InvalidParameter(format!(
            "power p must be >= 2, got {p}"
        )));
    }
    if radius <= 0.0 || !radius.is_finite() {
        return Err(ProblemError::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    validate_rows("offsets", offsets, num_components, n)?;
    validate_zero_column_sums(offsets, n)?;

    let profile = PowerProfile::new(p, radius);
    let lipschitz = (2.0 * p as f64 - 1.0) * radius.powi(2 * p as i32 - 2);
    let offsets_v = offsets.to_vec();

    let o1 = offsets_v.clone();
    let value = move |x: &[f64], i: usize| -> f64 {
        profile.value(linalg::norm(x)) + linalg::dot(&o1[i], x)
    };
    let o2 = offsets_v.clone();
    let gradient = move |x: &[f64], i: usize| -> Vec<f64> {
        let s = profile.slope_over_r(linalg::norm(x));
        x.iter().zip(&o2[i]).map(|(xj, oj)| s * xj + oj).collect()
    };
    // prox reduces to the radial scalar equation ρ + α g'(ρ) = ‖x − α oᵢ‖,
    // whose left side is strictly increasing
    let o3 = offsets_v.clone();
    let prox = move |x: &[f64], i: usize, alpha: f64| -> Vec<f64> {
        let v: Vec<f64> = x
            .iter()
            .zip(&o3[i])
            .map(|(xj, oj)| xj - alpha * oj)
            .collect();
        let nv = linalg::norm(&v);
        if nv == 0.0 {
            return vec![0.0; v.len()];
        }
        let boundary = profile.radius + alpha * profile.slope(profile.radius);
        let rho = if nv <= boundary {
            bisect_increasing(
                |r| r + alpha * profile.slope(r),
                0.0,
                profile.radius.min(nv),
                nv,
            )
        } else {
            // outer branch is linear in ρ
            nv / (1.0 + alpha * profile.outer)
        };
        v.iter().map(|vj| vj * rho / nv).collect()
    };

    // exact global minimum of g(‖x‖) + oᵀx, attained along the direction −o
    let lower_bounds: Vec<f64> = offsets_v
        .iter()
        .map(|o| {
            let on = linalg::norm(o);
            if on == 0.0 {
                return 0.0;
            }
            let r0 = if on <= radius.powi(2 * p as i32 - 1) {
                on.powf(1.0 / (2.0 * p as f64 - 1.0))
            } else {
                on / profile.outer
            };
            profile.value(r0) - on * r0
        })
        .collect();

    let theta = 1.0 - 1.0 / (2.0 * p as f64);
    let eta = profile.value(radius);
    // certify c on a dense radial grid of the validity region
    let mut max_ratio = 0.0f64;
    for k in 1..KL_SCAN_POINTS {
        let r = radius * k as f64 / KL_SCAN_POINTS as f64;
        let f = profile.value(r);
        let g = profile.slope(r);
        if f > 0.0 && g > 0.0 {
            max_ratio = max_ratio.max(f.powf(theta) / g);
        }
    }
    let c = KL_HEADROOM * max_ratio / (1.0 - theta);

    FiniteSumProblem::new(ProblemParts {
        id: "power".into(),
        dim: n,
        num_components,
        value: Box::new(value),
        gradient: Box::new(gradient),
        prox: Some(Box::new(prox)),
        lipschitz,
        working_radius: radius,
        component_lower_bounds: lower_bounds,
        minimizer: Some(vec![0.0; n]),
        kl: Some(KlDescriptor {
            theta,
            c,
            eta,
            f_star: 0.0,
        }),
    })
}

/// Scalar double-well profile `¼(z² − 1)²`, blended to a quadratic of
/// curvature `3R² − 1` outside `|z| > R`.
#[derive(Clone, Copy)]
struct WellProfile {
    radius: f64,
    /// Outer curvature, `3R² − 1`; also the global second-derivative bound.
    outer: f64,
}

impl WellProfile {
    fn new(radius: f64) -> Self {
        WellProfile {
            radius,
            outer: 3.0 * radius * radius - 1.0,
        }
    }

    fn value(&self, z: f64) -> f64 {
        let az = z.abs();
        if az <= self.radius {
            let q = z * z - 1.0;
            0.25 * q * q
        } else {
            let r = self.radius;
            let wr = 0.25 * (r * r - 1.0) * (r * r - 1.0);
            wr + (r * r * r - r) * (az - r) + 0.5 * self.outer * (az - r) * (az - r)
        }
    }

    fn slope(&self, z: f64) -> f64 {
        let az = z.abs();
        if az <= self.radius {
            z * z * z - z
        } else {
            let r = self.radius;
            z.signum() * ((r * r * r - r) + self.outer * (az - r))
        }
    }

    /// Exact global minimum of `z ↦ value(z) + o·z`.
    ///
    /// The global minimum sits at a stationary point: a root of the cubic
    /// `z³ − z + o` inside `[−R, R]` (found by bisection on its monotone
    /// pieces, split at ±1/√3) or a stationary point of one of the outer
    /// quadratic branches.
    fn min_with_linear(&self, o: f64) -> f64 {
        let r = self.radius;
        let q = |z: f64| z * z * z - z + o;
        let mut candidates: Vec<f64> = Vec::new();
        let split = (1.0f64 / 3.0).sqrt();
        let knots = [-r, -split, split, r];
        for w in knots.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (qlo, qhi) = (q(lo), q(hi));
            if qlo == 0.0 {
                candidates.push(lo);
            }
            if qlo * qhi < 0.0 {
                if qlo < 0.0 {
                    candidates.push(bisect_increasing(q, lo, hi, 0.0));
                } else {
                    candidates.push(-bisect_increasing(|z| -q(-z), -hi, -lo, 0.0));
                }
            }
        }
        if q(r) == 0.0 {
            candidates.push(r);
        }
        let wr_slope = r * r * r - r;
        if o < -wr_slope {
            // right outer branch: slope(z) + o = 0 at z > R
            candidates.push(r + (-o - wr_slope) / self.outer);
        }
        if o > wr_slope {
            candidates.push(-(r + (o - wr_slope) / self.outer));
        }
        candidates
            .into_iter()
            .map(|z| self.value(z) + o * z)
            .fold(f64::INFINITY, f64::min)
    }

    /// Scalar proximal step: minimize `value(z) + o·z + (z − x)²/(2α)`.
    fn prox(&self, x: f64, o: f64, alpha: f64) -> f64 {
        let v = x - alpha * o;
        let r = self.radius;
        let m_r = r + alpha * (r * r * r - r);
        if alpha < 1.0 {
            // z + α·slope(z) is strictly increasing, single root
            if v > m_r {
                (v - alpha * ((r * r * r - r) - self.outer * r)) / (1.0 + alpha * self.outer)
            } else if v < -m_r {
                (v + alpha * ((r * r * r - r) - self.outer * r)) / (1.0 + alpha * self.outer)
            } else {
                bisect_increasing(|z| z + alpha * (z * z * z - z), -r, r, v)
            }
        } else {
            // subproblem may be nonconvex; enumerate stationary candidates
            let cubic = |z: f64| alpha * z * z * z + (1.0 - alpha) * z - v;
            let mut candidates = vec![-r, r];
            let steps = 512;
            let mut prev = cubic(-r);
            for k in 1..=steps {
                let z = -r + 2.0 * r * k as f64 / steps as f64;
                let cur = cubic(z);
                if prev * cur <= 0.0 && prev != cur {
                    let lo = -r + 2.0 * r * (k - 1) as f64 / steps as f64;
                    if prev < 0.0 {
                        candidates.push(bisect_increasing(cubic, lo, z, 0.0));
                    } else {
                        candidates.push(-bisect_increasing(|u| -cubic(-u), -z, -lo, 0.0));
                    }
                }
                prev = cur;
            }
            let right =
                (v - alpha * ((r * r * r - r) - self.outer * r)) / (1.0 + alpha * self.outer);
            if right > r {
                candidates.push(right);
            }
            let left =
                (v + alpha * ((r * r * r - r) - self.outer * r)) / (1.0 + alpha * self.outer);
            if left < -r {
                candidates.push(left);
            }
            let objective = |z: f64| self.value(z) + o * z + (z - x) * (z - x) / (2.0 * alpha);
            candidates
                .into_iter()
                .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
                .unwrap()
        }
    }
}

/// Separable double-well components `f(x, i) = Σⱼ ¼(xⱼ² − 1)² + offsetsᵢᵀx`,
/// blended to quadratic growth outside `|xⱼ| > R` per coordinate. The mean
/// has `3ⁿ` stationary points (coordinates in {−1, 0, 1}); the `2ⁿ`
/// minimizers are nondegenerate, so the local Łojasiewicz exponent is ½.
pub fn make_double_well(
    n: usize,
    num_components: usize,
    offsets: &[Vec<f64>],
    radius: f64,
) -> Result<FiniteSumProblem, ProblemError> {
    if radius <= 1.0 || !radius.is_finite() {
        return Err(ProblemError::InvalidParameter(format!(
            "double-well radius must exceed 1 so the wells lie inside it, got {radius}"
        )));
    }
    validate_rows("offsets", offsets, num_components, n)?;
    validate_zero_column_sums(offsets, n)?;

    let profile = WellProfile::new(radius);
    let lipschitz = profile.outer;
    let offsets_v = offsets.to_vec();

    let o1 = offsets_v.clone();
    let value = move |x: &[f64], i: usize| -> f64 {
        x.iter().map(|&z| profile.value(z)).sum::<f64>() + linalg::dot(&o1[i], x)
    };
    let o2 = offsets_v.clone();
    let gradient = move |x: &[f64], i: usize| -> Vec<f64> {
        x.iter()
            .zip(&o2[i])
            .map(|(&z, oj)| profile.slope(z) + oj)
            .collect()
    };
    let o3 = offsets_v.clone();
    let prox = move |x: &[f64], i: usize, alpha: f64| -> Vec<f64> {
        x.iter()
            .zip(&o3[i])
            .map(|(&z, &oj)| profile.prox(z, oj, alpha))
            .collect()
    };

    let lower_bounds: Vec<f64> = offsets_v
        .iter()
        .map(|o| o.iter().map(|&oj| profile.min_with_linear(oj)).sum())
        .collect();

    // Validity threshold: keep the sublevel band strictly below the barrier
    // at 0 and below the blend boundary, so every admissible point has all
    // coordinates inside a well.
    let eta = 0.5 * 0.25f64.min(profile.value(radius));
    let theta = 0.5;
    // coordinates with well value < η live in (z_lo, z_hi) around ±1
    let half_width = 2.0 * eta.sqrt();
    let z_lo = (1.0 - half_width).sqrt();
    let z_hi = (1.0 + half_width).sqrt();
    let mut max_ratio = 0.0f64;
    for k in 0..=KL_SCAN_POINTS {
        let z = z_lo + (z_hi - z_lo) * k as f64 / KL_SCAN_POINTS as f64;
        let w = profile.value(z);
        let s = profile.slope(z).abs();
        if w > 0.0 && s > 0.0 {
            // per-coordinate √w/|w'| bounds the n-dimensional ratio because
            // both sides aggregate as sums of squares when θ = ½
            max_ratio = max_ratio.max(w.sqrt() / s);
        }
    }
    let c = KL_HEADROOM * max_ratio / (1.0 - theta);

    FiniteSumProblem::new(ProblemParts {
        id: "double_well".into(),
        dim: n,
        num_components,
        value: Box::new(value),
        gradient: Box::new(gradient),
        prox: Some(Box::new(prox)),
        lipschitz,
        working_radius: radius,
        component_lower_bounds: lower_bounds,
        minimizer: Some(vec![1.0; n]),
        kl: Some(KlDescriptor {
            theta,
            c,
            eta,
            f_star: 0.0,
        }),
    })
}

/// Nearest stationary point of the double-well mean: each coordinate snapped
/// to the closest of {−1, 0, 1}.
pub fn double_well_stationary_point(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&z| {
            if z > 0.5 {
                1.0
            } else if z < -0.5 {
                -1.0
            } else {
                0.0
            }
        })
        .collect()
}
