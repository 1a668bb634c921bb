//! Balancing solves: convergence, fixed points and the κ conventions.

use shrinker_glue::balance::*;
use shrinker_glue::Error;

fn solve(two_big_j: u32, m: u32) -> NewtonReport {
    newton_solve(m, ParamVector::zero(two_big_j).unwrap(), NewtonOptions { max_iter: 20, ..Default::default() }).unwrap()
}

#[test]
fn half_at_64_converges_fast() {
    let rep = solve(1, 64);
    assert!(*rep.history.last().unwrap() < 1e-6);
    assert!(rep.history.len() - 1 <= 12, "{:?}", rep.history);
    assert!(rep.pv.in_ball(DEFAULT_C1));
    assert!(rep.final_mismatch.residual() < 1e-6);
    assert_eq!(rep.derived.m, 64);
}

#[test]
fn converged_parameters_are_a_fixed_point() {
    let rep = solve(2, 64);
    let again = newton_solve(64, rep.pv.clone(), NewtonOptions::default()).unwrap();
    assert!(again.history.len() - 1 <= 1, "{:?}", again.history);
    let d: f64 = rep.pv.to_flat().iter().zip(again.pv.to_flat()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(d < 1e-5, "moved by {d}");
}

#[test]
fn kappa_conventions_hold_in_the_output() {
    let rep = solve(2, 64);
    assert_eq!(rep.pv.kappa_at(0), (0.0, 0.0));
    let (p, q) = (rep.pv.kappa_at(2), rep.pv.kappa_at(-2));
    assert_eq!((p.0 + q.0, p.1 + q.1), (0.0, 0.0));
}

#[test]
fn converged_heights_stay_antisymmetric() {
    let rep = solve(3, 96);
    let dp = &rep.derived;
    for (i, &l) in dp.two_ell.iter().enumerate() {
        let j = dp.two_ell.iter().position(|&x| x == -l).unwrap();
        assert!((dp.tau_ell[i] - dp.tau_ell[j]).abs() < 1e-12 * dp.tau_ell[i]);
        assert!((dp.h_ell[i] + dp.h_ell[j]).abs() < 1e-12 * dp.tau_ell[i]);
    }
}

#[test]
fn alpha_only_changes_the_gluing_radius() {
    let pv = ParamVector::from_flat(2, &[0.3, -0.2, 0.1, 0.4]).unwrap();
    let a = derive_params_alpha(&pv, 64, 0.05).unwrap();
    let b = derive_params_alpha(&pv, 64, 0.1).unwrap();
    assert_eq!(a.tau_ell, b.tau_ell);
    assert_eq!(a.h_ell, b.h_ell);
    assert_eq!(a.r_ell, b.r_ell);
    assert_ne!(a.delta_prime_ell, b.delta_prime_ell);
}

#[test]
fn seeds_outside_the_ball_are_rejected() {
    let far = ParamVector::from_flat(1, &[100.0, 0.0]).unwrap();
    assert!(matches!(newton_solve(64, far, NewtonOptions::default()), Err(Error::OutOfBall(_))));
}

#[test]
fn too_few_iterations_report_the_trace() {
    let opts = NewtonOptions { max_iter: 1, tol: 1e-14, ..Default::default() };
    match newton_solve(96, ParamVector::zero(3).unwrap(), opts) {
        Err(Error::NoConvergence { iters, trace }) => {
            assert_eq!(iters, 1);
            assert!(!trace.is_empty());
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn toeplitz_small_cases() {
    let e = toeplitz_eigs(3).unwrap();
    let want = [2f64.sqrt(), 0.0, -(2f64.sqrt())];
    for (a, b) in e.values.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}
