//! Randomised invariants across modules.

use std::f64::consts::PI;

use proptest::prelude::*;

use shrinker_glue::balance::{derive_params, predicted_mismatch, trig_balance_check, ParamVector};
use shrinker_glue::geometry::{fermi_map_detailed, gaussian_weight, AmbientPoint};
use shrinker_glue::ld::{build_ld, cutoff, psi_base, SingularLattice, DEFAULT_MODES};
use shrinker_glue::rld::{admissible_window, h_hat, h_hat_inv, phi_one};
use shrinker_glue::specfun::{gamma_fn, kummer_m, kummer_tricomi_wronskian, tricomi_u};

fn pv_strategy(two_big_j: u32) -> impl Strategy<Value = ParamVector> {
    let dim = ParamVector::zero(two_big_j).unwrap().dim();
    prop::collection::vec(-3.0f64..3.0, dim).prop_map(move |v| ParamVector::from_flat(two_big_j, &v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_recurrence(x in 0.1f64..20.0) {
        let a = gamma_fn(x + 1.0).unwrap();
        let b = x * gamma_fn(x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn kummer_contiguous(a in -3.0f64..6.0, x in 0.05f64..40.0) {
        let b = 1.0;
        let t = [
            (b - a) * kummer_m(a - 1.0, b, x).unwrap().0,
            (2.0 * a - b + x) * kummer_m(a, b, x).unwrap().0,
            -a * kummer_m(a + 1.0, b, x).unwrap().0,
        ];
        let scale = t.iter().map(|v| v.abs()).fold(1e-300, f64::max);
        prop_assert!((t[0] + t[1] + t[2]).abs() <= 1e-9 * scale);
    }

    #[test]
    fn tricomi_wronskian(x in 0.01f64..60.0) {
        let (m, dm) = kummer_m(-0.5, 1.0, x).unwrap();
        let (u, du) = tricomi_u(-0.5, 1.0, x).unwrap();
        let w = kummer_tricomi_wronskian(-0.5, 1.0, x).unwrap();
        prop_assert!((m * du - dm * u - w).abs() <= 1e-8 * w.abs());
    }

    #[test]
    fn h_hat_inverse_roundtrip(t in 0.001f64..0.999) {
        let (lo, hi) = admissible_window();
        let r = lo + t * (hi - lo);
        let y = h_hat(r).unwrap();
        prop_assert!((h_hat_inv(y).unwrap() - r).abs() < 1e-9);
    }

    #[test]
    fn phi_one_is_linear_in_m(r in 0.95f64..2.45, m in 2u32..200) {
        let a = phi_one(r, m).unwrap();
        prop_assert!((phi_one(r, 3 * m).unwrap() - 3.0 * a).abs() <= 1e-13 * a.abs());
    }

    #[test]
    fn cutoff_partition_of_unity(a in -2.0f64..2.0, w in 0.01f64..2.0, t in -5.0f64..5.0) {
        let b = a + w;
        let s = cutoff(a, b, t).unwrap() + cutoff(b, a, t).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-15);
        let (p, _, _) = psi_base(t);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn ld_rotation_invariance(r in 0.3f64..4.0, th in 0.0f64..(2.0 * PI), k in 1u32..16) {
        let m = 16;
        let l0 = SingularLattice::new(0, 1.5, m).unwrap();
        let sol = build_ld(Some(l0), Some(l0.reflected()), 1.0, 0.7, DEFAULT_MODES).unwrap();
        prop_assume!(sol.singular_dist(r, th) > 1e-3);
        let a = sol.value(r, th).unwrap();
        let b = sol.value(r, th + 2.0 * PI * k as f64 / m as f64).unwrap();
        prop_assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
    }

    #[test]
    fn flat_roundtrip(pv in pv_strategy(3)) {
        prop_assert_eq!(ParamVector::from_flat(3, &pv.to_flat()).unwrap(), pv);
    }

    #[test]
    fn predicted_mismatch_is_linear(a in pv_strategy(4), b in pv_strategy(4), s in -2.0f64..2.0) {
        let sum: Vec<f64> = a.to_flat().iter().zip(b.to_flat()).map(|(x, y)| x + s * y).collect();
        let f = predicted_mismatch(&ParamVector::from_flat(4, &sum).unwrap()).to_flat();
        let (fa, fb) = (predicted_mismatch(&a).to_flat(), predicted_mismatch(&b).to_flat());
        for i in 0..f.len() {
            prop_assert!((f[i] - fa[i] - s * fb[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn derived_params_are_positive_and_ordered(pv in pv_strategy(2), m in 16u32..256) {
        let dp = derive_params(&pv, m).unwrap();
        for i in 0..dp.two_ell.len() {
            prop_assert!(dp.tau_ell[i] > 0.0 && dp.r_ell[i] > 0.0);
            prop_assert!(dp.delta_prime_ell[i] > 0.0);
        }
        prop_assert!(dp.h_ell.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn trig_identity(two_big_j in 1u32..=20, k in 0u32..20) {
        let two_j = -(two_big_j as i32) + 2 + 2 * (k % two_big_j) as i32;
        prop_assert!(trig_balance_check(two_big_j, two_j) < 1e-12);
    }

    #[test]
    fn weight_is_rotation_invariant(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -2.0f64..2.0, a in 0.0f64..(2.0 * PI)) {
        let w1 = gaussian_weight(AmbientPoint::new(x, y, z).unwrap()).0;
        let (c, s) = (a.cos(), a.sin());
        let w2 = gaussian_weight(AmbientPoint::new(c * x - s * y, s * x + c * y, z).unwrap()).0;
        prop_assert!((w1 - w2).abs() < 1e-14);
        prop_assert!(w1 <= 0.0);
    }

    #[test]
    fn fermi_speed_is_conserved(
        px in -2.0f64..2.0, py in -2.0f64..2.0,
        vx in -0.5f64..0.5, vy in -0.5f64..0.5, z in -0.5f64..0.5,
    ) {
        let f = fermi_map_detailed([px, py], [vx, vy], z).unwrap();
        prop_assert!(f.speed_drift < 1e-8);
    }
}
