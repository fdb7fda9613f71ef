use super::*;
use crate::rng::SplitMix64;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1.0f64.max(b.abs())
}

/// Central finite differences of a component value.
fn fd_gradient(p: &FiniteSumProblem, x: &[f64], i: usize, h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let fp = p.component_value(&xp, i);
        xp[j] = x[j] - h;
        let fm = p.component_value(&xp, i);
        xp[j] = x[j];
        g[j] = (fp - fm) / (2.0 * h);
    }
    g
}

fn two_anchor_quadratic() -> FiniteSumProblem {
    make_quadratic(1, 2, &[vec![1.0], vec![-1.0]], &[1.0]).unwrap()
}

fn sample_power() -> FiniteSumProblem {
    let offsets = vec![vec![0.5, 0.0], vec![-0.25, 0.25], vec![-0.25, -0.25]];
    make_power(2, 3, 2, &offsets, 1.5).unwrap()
}

fn sample_double_well() -> FiniteSumProblem {
    let offsets = vec![
        vec![0.3, -0.1],
        vec![-0.2, 0.4],
        vec![0.1, -0.5],
        vec![-0.2, 0.2],
    ];
    make_double_well(2, 4, &offsets, 1.5).unwrap()
}

#[test]
fn quadratic_two_anchor_metadata() {
    let p = two_anchor_quadratic();
    // f(0) is the mean of ½·1 and ½·1
    let brute = (0..2).map(|i| p.component_value(&[0.0], i)).sum::<f64>() / 2.0;
    assert_eq!(brute, 0.5);
    assert_eq!(p.minimizer().unwrap(), &[0.0]);
    assert_eq!(p.kl().unwrap().f_star, 0.5);
    assert_eq!(p.full_value(&[0.0]), 0.5);
    assert_eq!(p.full_gradient(&[0.0]), vec![0.0]);
}

#[test]
fn quadratic_single_centered() {
    let p = make_quadratic(1, 1, &[vec![0.0]], &[1.0]).unwrap();
    assert_eq!(p.minimizer().unwrap(), &[0.0]);
    let kl = p.kl().unwrap();
    assert_eq!(kl.f_star, 0.0);
    assert_eq!(kl.theta, 0.5);
    assert!(close(kl.c, 2f64.sqrt(), 1e-15));
    assert_eq!(p.lipschitz(), 1.0);
    // mean of one component equals the component
    assert_eq!(p.full_value(&[0.3]), p.component_value(&[0.3], 0));
}

#[test]
fn quadratic_anchor_mean_and_lipschitz() {
    let anchors = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]];
    let p = make_quadratic(2, 3, &anchors, &[2.0, 2.0]).unwrap();
    assert_eq!(p.minimizer().unwrap(), &[0.0, 0.0]);
    assert_eq!(p.lipschitz(), 2.0);
}

#[test]
fn quadratic_rejects_nonpositive_eigenvalue() {
    let err = make_quadratic(1, 1, &[vec![0.0]], &[0.0]).unwrap_err();
    assert!(matches!(err, ProblemError::InvalidParameter(_)));
    assert!(make_quadratic(1, 1, &[vec![0.0]], &[-1.0]).is_err());
}

#[test]
fn power_exponent_and_pure_quartic() {
    let p = sample_power();
    assert_eq!(p.kl().unwrap().theta, 0.75);
    // 1-D with offsets (b, −b): the mean is x⁴/4 inside the ball
    let q = make_power(1, 2, 2, &[vec![0.3], vec![-0.3]], 2.0).unwrap();
    for x in [-1.5, -0.3, 0.0, 0.8, 1.9] {
        assert!(close(q.full_value(&[x]), x.powi(4) / 4.0, 1e-14), "x={x}");
    }
    // value ¼ and gradient 1 at x = 1 with zero offsets
    let z = make_power(1, 2, 2, &[vec![0.0], vec![0.0]], 2.0).unwrap();
    assert!(close(z.full_value(&[1.0]), 0.25, 1e-15));
    assert!(close(z.full_gradient(&[1.0])[0], 1.0, 1e-15));
}

#[test]
fn power_component_gradient_formula_inside_ball() {
    let p = sample_power();
    let offsets = [vec![0.5, 0.0], vec![-0.25, 0.25], vec![-0.25, -0.25]];
    let x = [0.6, -0.4];
    let r2 = linalg::dot(&x, &x);
    for (i, offset) in offsets.iter().enumerate() {
        let g = p.component_gradient(&x, i);
        for j in 0..2 {
            assert!(close(g[j], r2 * x[j] + offset[j], 1e-14));
        }
    }
}

#[test]
fn power_rejects_uncancelled_offsets() {
    let err = make_power(1, 2, 2, &[vec![0.5], vec![0.1]], 1.0).unwrap_err();
    assert!(matches!(err, ProblemError::InvalidParameter(_)));
    assert!(
        make_power(1, 2, 1, &[vec![0.0], vec![0.0]], 1.0).is_err(),
        "p < 2"
    );
}

#[test]
fn double_well_scalar_structure() {
    let p = make_double_well(1, 2, &[vec![0.0], vec![0.0]], 1.5).unwrap();
    // stationary points of the mean: gradient vanishes at −1, 0, 1
    for s in [-1.0, 0.0, 1.0] {
        assert!(p.full_gradient(&[s])[0].abs() < 1e-15);
    }
    assert_eq!(p.full_value(&[1.0]), 0.0);
    assert_eq!(p.full_value(&[-1.0]), 0.0);
    // hand-derived slope at 0.5: (0.25 − 1)·0.5
    assert!(close(p.full_gradient(&[0.5])[0], -0.375, 1e-15));
    // nondegenerate minima: curvature 3z² − 1 = 2 at ±1
    let h = 1e-5;
    let curv = (p.full_gradient(&[1.0 + h])[0] - p.full_gradient(&[1.0 - h])[0]) / (2.0 * h);
    assert!(close(curv, 2.0, 1e-8));
    assert_eq!(p.kl().unwrap().theta, 0.5);
}

#[test]
fn double_well_rejects_bad_radius() {
    assert!(make_double_well(1, 1, &[vec![0.0]], 1.0).is_err());
    assert!(make_double_well(1, 1, &[vec![0.0]], 0.5).is_err());
}

#[test]
fn stationary_point_snapping() {
    assert_eq!(
        double_well_stationary_point(&[0.93, -1.1, 0.2]),
        vec![1.0, -1.0, 0.0]
    );
}

#[test]
fn gradients_match_finite_differences() {
    let problems = [two_anchor_quadratic(), sample_power(), sample_double_well()];
    let mut rng = SplitMix64::new(17);
    for p in &problems {
        for _ in 0..100 {
            let x = rng.point_in_ball(p.dim(), 0.9 * p.working_radius());
            for i in 0..p.num_components() {
                let g = p.component_gradient(&x, i);
                let fd = fd_gradient(p, &x, i, 1e-6);
                for j in 0..p.dim() {
                    let scale = 1.0f64.max(g[j].abs());
                    assert!(
                        (g[j] - fd[j]).abs() <= 1e-6 * scale,
                        "{} comp {i} coord {j}: grad {} vs fd {}",
                        p.id(),
                        g[j],
                        fd[j]
                    );
                }
            }
        }
    }
}

#[test]
fn component_gradient_bound_in_working_ball() {
    // ‖∇f(x,i)‖² ≤ 2L(f(x,i) − f̄_min) at 1000 sampled points
    let problems = [two_anchor_quadratic(), sample_power(), sample_double_well()];
    let mut rng = SplitMix64::new(23);
    for p in &problems {
        let fbar = p.f_bar_min();
        for _ in 0..1000 {
            let x = rng.point_in_ball(p.dim(), p.working_radius());
            for i in 0..p.num_components() {
                let g = linalg::norm(&p.component_gradient(&x, i));
                let lhs = g * g;
                let rhs = 2.0 * p.lipschitz() * (p.component_value(&x, i) - fbar);
                assert!(
                    lhs <= rhs + 1e-10 * 1.0f64.max(rhs.abs()),
                    "{}: {lhs} > {rhs}",
                    p.id()
                );
            }
        }
    }
}

#[test]
fn component_gradients_are_lipschitz_with_declared_constant() {
    // ‖∇f(x,i) − ∇f(y,i)‖ ≤ L‖x−y‖ over sampled pairs in the working ball
    let problems = [two_anchor_quadratic(), sample_power(), sample_double_well()];
    let mut rng = SplitMix64::new(59);
    for p in &problems {
        for _ in 0..500 {
            let x = rng.point_in_ball(p.dim(), p.working_radius());
            let y = rng.point_in_ball(p.dim(), p.working_radius());
            let step = linalg::dist(&x, &y);
            for i in 0..p.num_components() {
                let gap =
                    linalg::dist(&p.component_gradient(&x, i), &p.component_gradient(&y, i));
                assert!(
                    gap <= p.lipschitz() * step * (1.0 + 1e-12),
                    "{} component {i}: gradient gap {gap} over step {step}",
                    p.id()
                );
            }
        }
    }
}

#[test]
fn component_values_respect_lower_bounds() {
    let problems = [two_anchor_quadratic(), sample_power(), sample_double_well()];
    let mut rng = SplitMix64::new(29);
    for p in &problems {
        for _ in 0..1000 {
            let x = rng.point_in_ball(p.dim(), p.working_radius());
            for i in 0..p.num_components() {
                assert!(
                    p.component_value(&x, i) >= p.component_lower_bounds()[i] - 1e-12,
                    "{} component {i}",
                    p.id()
                );
            }
        }
    }
}

#[test]
fn lojasiewicz_inequality_near_minimizer() {
    let problems = [two_anchor_quadratic(), sample_power(), sample_double_well()];
    // sampling radius around the minimizer per problem
    let radii = [2.0, 1.4, 0.25];
    let mut rng = SplitMix64::new(31);
    for (p, &rho) in problems.iter().zip(&radii) {
        let kl = p.kl().unwrap();
        let xstar = p.minimizer().unwrap().to_vec();
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < 1000 && attempts < 100_000 {
            attempts += 1;
            let mut x = rng.point_in_ball(p.dim(), rho);
            linalg::axpy(&mut x, 1.0, &xstar);
            let gap = (p.full_value(&x) - kl.f_star).abs();
            if gap <= 0.0 || gap >= kl.eta {
                continue;
            }
            accepted += 1;
            let lhs = gap.powf(kl.theta);
            let rhs = kl.c * (1.0 - kl.theta) * linalg::norm(&p.full_gradient(&x));
            assert!(
                lhs <= rhs + 1e-10 * 1.0f64.max(rhs.abs()),
                "{}: |f-f*|^θ = {lhs} > c(1-θ)‖∇f‖ = {rhs}",
                p.id()
            );
        }
        assert!(
            accepted == 1000,
            "{}: only {accepted} admissible samples",
            p.id()
        );
    }
}

#[test]
fn quadratic_identity_hessian_kl_is_tight() {
    // D = I: |f − f*|^½ equals c(1−θ)‖∇f‖ with c = √2 everywhere
    let p = make_quadratic(2, 2, &[vec![1.0, 0.0], vec![-1.0, 0.0]], &[1.0, 1.0]).unwrap();
    let kl = p.kl().unwrap();
    let mut rng = SplitMix64::new(37);
    for _ in 0..100 {
        let x = rng.point_in_ball(2, 3.0);
        let gap = (p.full_value(&x) - kl.f_star).abs();
        if gap == 0.0 {
            continue;
        }
        let lhs = gap.sqrt();
        let rhs = kl.c * 0.5 * linalg::norm(&p.full_gradient(&x));
        assert!(close(lhs, rhs, 1e-12));
    }
}

#[test]
fn prox_satisfies_implicit_identity() {
    let problems = [two_anchor_quadratic(), sample_power(), sample_double_well()];
    let mut rng = SplitMix64::new(41);
    for p in &problems {
        let alpha = 1.0 / (2f64.sqrt() * p.lipschitz() * p.num_components() as f64);
        for _ in 0..200 {
            let x = rng.point_in_ball(p.dim(), p.working_radius());
            for i in 0..p.num_components() {
                let z = p.component_prox(&x, i, alpha).unwrap();
                let g = p.component_gradient(&z, i);
                let mut expect = x.clone();
                linalg::axpy(&mut expect, -alpha, &g);
                assert!(
                    linalg::dist(&z, &expect) <= 1e-10,
                    "{} comp {i}: residual {}",
                    p.id(),
                    linalg::dist(&z, &expect)
                );
            }
        }
    }
}

#[test]
fn double_well_prox_handles_nonconvex_subproblems() {
    // with α ≥ 1 the scalar subproblem can have several stationary points;
    // the prox must return the global argmin (checked by dense scan)
    let p = sample_double_well();
    let alpha = 1.5;
    let mut rng = SplitMix64::new(61);
    for _ in 0..50 {
        let x = rng.point_in_ball(2, 2.0);
        for i in 0..p.num_components() {
            let z = p.component_prox(&x, i, alpha).unwrap();
            let objective = |y: &[f64]| {
                p.component_value(y, i) + linalg::dist(y, &x).powi(2) / (2.0 * alpha)
            };
            let got = objective(&z);
            // coordinate-wise scan (the subproblem is separable)
            let mut best = f64::INFINITY;
            let mut probe = z.clone();
            for j in 0..2 {
                for k in 0..=40_000 {
                    probe[j] = -4.0 + 8.0 * k as f64 / 40_000.0;
                    best = best.min(objective(&probe));
                }
                probe[j] = z[j];
            }
            assert!(got <= best + 1e-6, "prox value {got} vs scanned {best}");
        }
    }
}

#[test]
fn offsets_do_not_change_the_mean() {
    let with = sample_power();
    let without = make_power(2, 3, 2, &vec![vec![0.0; 2]; 3], 1.5).unwrap();
    let dwith = sample_double_well();
    let dwithout = make_double_well(2, 4, &vec![vec![0.0; 2]; 4], 1.5).unwrap();
    let mut rng = SplitMix64::new(43);
    for _ in 0..200 {
        let x = rng.point_in_ball(2, 1.4);
        assert!((with.full_value(&x) - without.full_value(&x)).abs() <= 1e-12);
        assert!(linalg::dist(&with.full_gradient(&x), &without.full_gradient(&x)) <= 1e-12);
        assert!((dwith.full_value(&x) - dwithout.full_value(&x)).abs() <= 1e-12);
        assert!(linalg::dist(&dwith.full_gradient(&x), &dwithout.full_gradient(&x)) <= 1e-12);
    }
}

#[test]
fn descent_lemma_holds_with_declared_lipschitz() {
    let problems = [two_anchor_quadratic(), sample_power(), sample_double_well()];
    let mut rng = SplitMix64::new(47);
    for p in &problems {
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..200)
            .map(|_| {
                (
                    rng.point_in_ball(p.dim(), p.working_radius()),
                    rng.point_in_ball(p.dim(), p.working_radius()),
                )
            })
            .collect();
        let worst = descent_lemma_check(p, &pairs);
        assert!(worst <= 1e-10, "{}: violation {worst}", p.id());
    }
}

#[test]
fn descent_lemma_degenerate_pair_is_zero() {
    let p = two_anchor_quadratic();
    let x = vec![0.4];
    assert_eq!(descent_lemma_check(&p, &[(x.clone(), x)]), 0.0);
}

#[test]
fn descent_lemma_flags_understated_lipschitz() {
    // same quadratic components but L declared at half its true value;
    // a pair along the top eigendirection must show a positive violation
    let anchors = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
    let eig = vec![1.0, 2.0];
    let (a1, e1) = (anchors.clone(), eig.clone());
    let (a2, e2) = (anchors.clone(), eig.clone());
    let p = FiniteSumProblem::new(ProblemParts {
        id: "understated".into(),
        dim: 2,
        num_components: 2,
        value: Box::new(move |x: &[f64], i: usize| {
            0.5 * x
                .iter()
                .zip(&a1[i])
                .zip(&e1)
                .map(|((xj, aj), dj)| dj * (xj - aj) * (xj - aj))
                .sum::<f64>()
        }),
        gradient: Box::new(move |x: &[f64], i: usize| {
            x.iter()
                .zip(&a2[i])
                .zip(&e2)
                .map(|((xj, aj), dj)| dj * (xj - aj))
                .collect()
        }),
        prox: None,
        lipschitz: 1.0, // true constant is 2
        working_radius: 4.0,
        component_lower_bounds: vec![0.0, 0.0],
        minimizer: None,
        kl: None,
    })
    .unwrap();
    let pairs = vec![(vec![0.0, 0.0], vec![0.0, 1.0])];
    assert!(descent_lemma_check(&p, &pairs) > 0.1);
}

#[test]
fn power_lower_bounds_are_attained_infima() {
    // minimize f(·,i) numerically along −offset and compare
    let p = sample_power();
    let offsets = [vec![0.5, 0.0], vec![-0.25, 0.25], vec![-0.25, -0.25]];
    for (i, offset) in offsets.iter().enumerate() {
        let on = linalg::norm(offset);
        let dir: Vec<f64> = offset.iter().map(|o| -o / on).collect();
        let mut best = f64::INFINITY;
        for k in 0..200_000 {
            let r = 3.0 * k as f64 / 200_000.0;
            let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
            best = best.min(p.component_value(&x, i));
        }
        let lb = p.component_lower_bounds()[i];
        assert!(best >= lb - 1e-12, "component {i}: {best} < {lb}");
        assert!(best - lb < 1e-6, "bound {lb} not tight, scan found {best}");
    }
}

#[test]
fn double_well_lower_bounds_are_attained_infima() {
    let p = sample_double_well();
    let mut rng = SplitMix64::new(53);
    for i in 0..4 {
        let lb = p.component_lower_bounds()[i];
        let mut best = f64::INFINITY;
        for _ in 0..200_000 {
            let x = rng.point_in_ball(2, 3.0);
            best = best.min(p.component_value(&x, i));
        }
        assert!(best >= lb - 1e-12, "component {i}: {best} < {lb}");
        assert!(best - lb < 1e-3, "bound {lb} far from scan minimum {best}");
    }
}
