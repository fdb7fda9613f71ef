use super::*;
use crate::problems::{make_quadratic, FiniteSumProblem, ProblemParts};
use crate::schedules::StepSchedule;

fn two_anchor_quadratic() -> FiniteSumProblem {
    make_quadratic(1, 2, &[vec![1.0], vec![-1.0]], &[1.0]).unwrap()
}

/// Quadratic components without a prox closure, to force the fallback
/// solver.
fn proxless_quadratic() -> FiniteSumProblem {
    let anchors = [1.0, -1.0];
    FiniteSumProblem::new(ProblemParts {
        id: "proxless".into(),
        dim: 1,
        num_components: 2,
        value: Box::new(move |x: &[f64], i: usize| 0.5 * (x[0] - anchors[i]).powi(2)),
        gradient: Box::new(move |x: &[f64], i: usize| vec![x[0] - anchors[i]]),
        prox: None,
        lipschitz: 1.0,
        working_radius: 4.0,
        component_lower_bounds: vec![0.0, 0.0],
        minimizer: Some(vec![0.0]),
        kl: None,
    })
    .unwrap()
}

#[test]
fn single_component_permutation() {
    let src = PermutationSource::UniformRandom { seed: 9 };
    for t in 1..50 {
        assert_eq!(src.sample(t, 1).unwrap(), vec![0]);
    }
}

#[test]
fn identical_seeds_identical_permutations() {
    let a = PermutationSource::UniformRandom { seed: 123 };
    let b = PermutationSource::UniformRandom { seed: 123 };
    for t in 1..200 {
        assert_eq!(a.sample(t, 6).unwrap(), b.sample(t, 6).unwrap());
    }
}

#[test]
fn explicit_list_errors() {
    let src = PermutationSource::ExplicitList(vec![vec![1, 0]]);
    assert_eq!(src.sample(1, 2).unwrap(), vec![1, 0]);
    assert!(matches!(
        src.sample(2, 2),
        Err(PermutationError::ListExhausted { .. })
    ));
    let bad = PermutationSource::ExplicitList(vec![vec![0, 0]]);
    assert!(matches!(
        bad.sample(1, 2),
        Err(PermutationError::NotAPermutation { .. })
    ));
}

#[test]
fn identity_source() {
    let src = PermutationSource::FixedIdentity;
    assert_eq!(src.sample(7, 4).unwrap(), vec![0, 1, 2, 3]);
}

#[test]
fn rr_epoch_single_component_is_gradient_step() {
    let p = make_quadratic(1, 1, &[vec![0.0]], &[1.0]).unwrap();
    let out = rr_epoch(&p, &[1.0], 0.1, &[0], false).unwrap();
    assert!((out.next[0] - 0.9).abs() < 1e-15);
}

#[test]
fn rr_epoch_order_dependence_hand_trace() {
    // f(·,0) = ½(x−1)², f(·,1) = ½(x+1)², x = 0, α = 0.1:
    // order (0,1): x̃₁ = 0.1, result −0.01; order (1,0): x̃₁ = −0.1, result 0.01
    let p = two_anchor_quadratic();
    let a = rr_epoch(&p, &[0.0], 0.1, &[0, 1], true).unwrap();
    let inner = a.inner.unwrap();
    assert!((inner[1][0] - 0.1).abs() < 1e-15);
    assert!((a.next[0] + 0.01).abs() < 1e-15);
    let b = rr_epoch(&p, &[0.0], 0.1, &[1, 0], true).unwrap();
    assert!((b.inner.unwrap()[1][0] + 0.1).abs() < 1e-15);
    assert!((b.next[0] - 0.01).abs() < 1e-15);
}

#[test]
fn sppm_epoch_closed_form_quadratic() {
    // prox of ½(x−1)² from 0 with α = 1 is (0 + 1·1)/(1 + 1) = 0.5
    let p = make_quadratic(1, 1, &[vec![1.0]], &[1.0]).unwrap();
    let out = sppm_epoch(&p, &[0.0], 1.0, &[0], false).unwrap();
    assert!((out.next[0] - 0.5).abs() < 1e-15);
}

#[test]
fn sppm_prox_of_stationary_point_is_fixed() {
    let p = make_quadratic(1, 1, &[vec![0.7]], &[2.0]).unwrap();
    let out = sppm_epoch(&p, &[0.7], 0.3, &[0], false).unwrap();
    assert!((out.next[0] - 0.7).abs() < 1e-15);
}

#[test]
fn sppm_implicit_identity_residual() {
    let p = two_anchor_quadratic();
    let alpha = 0.25;
    let out = sppm_epoch(&p, &[0.4], alpha, &[0, 1], true).unwrap();
    let inner = out.inner.unwrap();
    for (pos, &i) in [0usize, 1].iter().enumerate() {
        let g = p.component_gradient(&inner[pos + 1], i);
        let residual = (inner[pos + 1][0] - (inner[pos][0] - alpha * g[0])).abs();
        assert!(residual <= 1e-10, "step {pos}: residual {residual}");
    }
}

#[test]
fn fallback_prox_matches_closed_form() {
    let with = two_anchor_quadratic();
    let without = proxless_quadratic();
    let alpha = 0.3;
    let a = sppm_epoch(&with, &[0.9], alpha, &[0, 1], false).unwrap();
    let b = sppm_epoch(&without, &[0.9], alpha, &[0, 1], false).unwrap();
    assert!(
        (a.next[0] - b.next[0]).abs() < 1e-9,
        "closed form {} vs fallback {}",
        a.next[0],
        b.next[0]
    );
}

#[test]
fn rr_and_sppm_agree_to_second_order_in_alpha() {
    let p = two_anchor_quadratic();
    let x = [0.6];
    let gap = |alpha: f64| {
        let a = rr_epoch(&p, &x, alpha, &[0, 1], false).unwrap().next[0];
        let b = sppm_epoch(&p, &x, alpha, &[0, 1], false).unwrap().next[0];
        (a - b).abs()
    };
    let mut alpha = 0.2;
    for _ in 0..4 {
        let ratio = gap(alpha) / gap(alpha / 2.0);
        assert!(ratio >= 3.5, "halving α shrank the gap only {ratio:.2}×");
        alpha /= 2.0;
    }
}

#[test]
fn runs_with_equal_seeds_are_bitwise_identical() {
    let p = two_anchor_quadratic();
    let s = StepSchedule::new(0.3, 0.0, 1.0).unwrap();
    let src = PermutationSource::UniformRandom { seed: 42 };
    let a = run(&p, &[0.7], &s, 50, &src, Variant::Rr, true).unwrap();
    let b = run(&p, &[0.7], &s, 50, &src, Variant::Rr, true).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ig_runs_are_deterministic_without_seed() {
    let p = two_anchor_quadratic();
    let s = StepSchedule::new(0.3, 0.0, 1.0).unwrap();
    // source is irrelevant for IG
    let a = run(
        &p,
        &[0.7],
        &s,
        30,
        &PermutationSource::UniformRandom { seed: 1 },
        Variant::Ig,
        false,
    )
    .unwrap();
    let b = run(
        &p,
        &[0.7],
        &s,
        30,
        &PermutationSource::UniformRandom { seed: 2 },
        Variant::Ig,
        false,
    )
    .unwrap();
    assert_eq!(a, b);
    assert_eq!(a.meta.seed, None);
    for perm in &a.perms {
        assert_eq!(perm, &vec![0, 1]);
    }
}

#[test]
fn gradient_norms_fall_on_the_quadratic() {
    let p = two_anchor_quadratic();
    let alpha = 1.0 / (2f64.sqrt() * 2.0);
    let s = StepSchedule::new(alpha, 0.0, 1.0).unwrap();
    let src = PermutationSource::UniformRandom { seed: 3 };
    let traj = run(&p, &[0.7], &s, 10_000, &src, Variant::Rr, false).unwrap();
    let min_grad = traj
        .grad_norms
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    assert!(min_grad < 1e-3, "min gradient norm {min_grad}");
}

#[test]
fn trajectory_lengths_and_stitching() {
    let p = two_anchor_quadratic();
    let s = StepSchedule::new(0.2, 1.0, 0.75).unwrap();
    let src = PermutationSource::UniformRandom { seed: 5 };
    for variant in [Variant::Rr, Variant::Sppm] {
        let traj = run(&p, &[0.3], &s, 40, &src, variant, true).unwrap();
        traj.check_consistent().unwrap();
        assert_eq!(traj.outer.len(), 41);
        assert_eq!(traj.values.len(), 41);
        assert_eq!(traj.grad_norms.len(), 41);
        assert_eq!(traj.steps.len(), 40);
        let inner = traj.inner.as_ref().unwrap();
        for t in 1..=40 {
            assert_eq!(inner[t - 1][0], traj.outer[t - 1]);
            assert_eq!(inner[t - 1][2], traj.outer[t]);
        }
    }
}

#[test]
fn weak_convergence_quartile_proxy_on_builtins() {
    use crate::problems::{make_double_well, make_power};
    let quad = two_anchor_quadratic();
    let power = make_power(
        2,
        3,
        2,
        &[vec![0.5, 0.0], vec![-0.25, 0.25], vec![-0.25, -0.25]],
        1.5,
    )
    .unwrap();
    let dw = make_double_well(
        2,
        4,
        &[
            vec![0.3, -0.1],
            vec![-0.2, 0.4],
            vec![0.1, -0.5],
            vec![-0.2, 0.2],
        ],
        1.5,
    )
    .unwrap();
    // the flat quartic minimum needs the slower decay to make progress
    // visible across quartiles
    for (p, x0, gamma) in [
        (&quad, vec![0.7], 0.75),
        (&power, vec![0.8, 0.6], 0.5),
        (&dw, vec![0.3, -0.4], 0.75),
    ] {
        let alpha = 1.0 / (2f64.sqrt() * p.lipschitz() * p.num_components() as f64);
        let s = StepSchedule::new(alpha, 0.0, gamma).unwrap();
        let src = PermutationSource::UniformRandom { seed: 11 };
        let traj = run(p, &x0, &s, 4000, &src, Variant::Rr, false).unwrap();
        let quarter = traj.grad_norms.len() / 4;
        let first: f64 = traj.grad_norms[..quarter]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let last: f64 = traj.grad_norms[3 * quarter..]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(
            last <= 0.5 * first,
            "{}: first-quartile min {first}, last {last}",
            p.id()
        );
    }
}

#[test]
fn non_finite_gradient_aborts_with_context() {
    let p = FiniteSumProblem::new(ProblemParts {
        id: "poison".into(),
        dim: 1,
        num_components: 2,
        value: Box::new(|x: &[f64], _| x[0]),
        // poisoned only on a narrow window that inner steps cross but outer
        // iterates skip over
        gradient: Box::new(|x: &[f64], i: usize| {
            if i == 1 && x[0] > -1.2 && x[0] < -1.0 {
                vec![f64::NAN]
            } else {
                vec![1.0]
            }
        }),
        prox: None,
        lipschitz: 1.0,
        working_radius: 1.0,
        component_lower_bounds: vec![-10.0, -10.0],
        minimizer: None,
        kl: None,
    })
    .unwrap();
    let s = StepSchedule::new(0.4, 0.0, 0.5).unwrap();
    let err = run(
        &p,
        &[0.0],
        &s,
        50,
        &PermutationSource::FixedIdentity,
        Variant::Rr,
        false,
    )
    .unwrap_err();
    assert!(matches!(
        err.failure,
        RunFailure::Epoch(EpochError::NonFiniteGradient { component: 1, .. })
    ));
    assert!(err.epoch >= 1);
    // partial trajectory covers everything before the failed epoch
    assert_eq!(err.partial.outer.len(), err.epoch);
}

#[test]
fn explicit_list_exhaustion_aborts_run() {
    let p = two_anchor_quadratic();
    let s = StepSchedule::new(0.1, 0.0, 1.0).unwrap();
    let src = PermutationSource::ExplicitList(vec![vec![0, 1], vec![1, 0]]);
    let err = run(&p, &[0.5], &s, 5, &src, Variant::Rr, false).unwrap_err();
    assert_eq!(err.epoch, 3);
    assert!(matches!(
        err.failure,
        RunFailure::Permutation(PermutationError::ListExhausted { .. })
    ));
}

#[test]
fn csv_shape_and_roundtrip() {
    let p = two_anchor_quadratic();
    let s = StepSchedule::new(0.1, 0.0, 1.0).unwrap();
    let src = PermutationSource::UniformRandom { seed: 8 };
    let traj = run(&p, &[0.5], &s, 12, &src, Variant::Rr, true).unwrap();

    let mut buf = Vec::new();
    traj.write_csv(&mut buf, Some(&[0.0])).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,alpha_t,f,grad_norm,dist_to_ref");
    assert_eq!(lines.len(), 1 + 13);
    assert!(
        lines[1].starts_with("0,,"),
        "row 0 keeps the step field empty: {}",
        lines[1]
    );
    // α₁ = 0.1 printed with 17 significant digits
    assert!(
        lines[2].starts_with("1,1.0000000000000001e-1,"),
        "{}",
        lines[2]
    );

    let dir = std::env::temp_dir().join(format!("shuffleopt-traj-{}", std::process::id()));
    traj.write_dir(&dir, Some(&[0.0])).unwrap();
    let back = Trajectory::read_dir(&dir).unwrap();
    assert_eq!(back, traj);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn variant_string_roundtrip() {
    for v in [Variant::Rr, Variant::Ig, Variant::Sppm] {
        assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
    }
    assert!("sgd".parse::<Variant>().is_err());
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn float_formatting_roundtrips_exactly(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let text = format_float(v);
            let back: f64 = text.parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits(), "{}", text);
        }

        #[test]
        fn epochs_apply_steps_in_permutation_order(
            x0 in -2.0f64..2.0,
            alpha in 1e-3f64..0.3,
            swap in any::<bool>(),
        ) {
            let p = two_anchor_quadratic();
            let perm = if swap { vec![1, 0] } else { vec![0, 1] };
            let out = rr_epoch(&p, &[x0], alpha, &perm, false).unwrap();
            // manual fold of the same two gradient steps
            let mut x = x0;
            for &i in &perm {
                let g = p.component_gradient(&[x], i)[0];
                x -= alpha * g;
            }
            prop_assert_eq!(out.next[0].to_bits(), x.to_bits());
        }
    }
}
