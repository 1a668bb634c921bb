//! Linearized doubling solutions: mismatch extraction, the cylinder limit and
//! the dislocation rate, against frozen regression values and closed forms.

use std::f64::consts::PI;

use shrinker_glue::checks::{cylinder_limit_error, dislocation_change};
use shrinker_glue::ld::*;
use shrinker_glue::rld::{avg_profile, roots};

const P0: LatticePoint = LatticePoint { side: Side::Plus, index: 0 };

fn family1(m: u32) -> LdSolution {
    build_ld(Some(SingularLattice::new(1, roots().r_mu, m).unwrap()), None, 1.0, 0.0, DEFAULT_MODES).unwrap()
}

#[test]
fn mismatch_regression_values_at_r_mu() {
    // (m, μ, μ′) for a unit family-1 lattice at r̲ = r_mu
    let frozen = [(32, 12.94, -0.14006), (64, 23.93, -0.13958), (128, 45.21, -0.13947)];
    for (m, mu, mu_prime) in frozen {
        let a = extract_affine(&family1(m), P0, 1.0, 0.0).unwrap();
        assert!((a.mu - mu).abs() < 5e-3 * mu, "m = {m}: μ = {}", a.mu);
        assert!((a.mu_prime - mu_prime).abs() < 1e-4, "m = {m}: μ′ = {}", a.mu_prime);
        assert!(a.dtheta.abs() < 1e-7, "m = {m}: dθ = {}", a.dtheta);
    }
}

#[test]
fn mismatch_is_insensitive_to_the_extraction_radius() {
    let sol = family1(64);
    let a = extract_affine(&sol, P0, 1.0, 0.0).unwrap();
    for f in [0.5, 0.25] {
        let b = extract_affine_eps(&sol, P0, 1.0, 0.0, f * extraction_radius(64)).unwrap();
        assert!((a.mu - b.mu).abs() < 1e-5 * a.mu.abs());
        assert!((a.mu_prime - b.mu_prime).abs() < 1e-5 * a.mu_prime.abs());
    }
}

#[test]
fn mismatch_scales_with_strength() {
    let lat = SingularLattice::new(0, 1.47, 32).unwrap();
    let one = build_ld(Some(lat), None, 1.0, 0.0, DEFAULT_MODES).unwrap();
    let three = build_ld(Some(lat), None, 3.0, 0.0, DEFAULT_MODES).unwrap();
    let a = extract_affine(&one, P0, 1.0, 0.0).unwrap();
    let b = extract_affine(&three, P0, 3.0, 0.0).unwrap();
    // per-τ quantities: μ′ is unchanged, μ moves only through log(τ/2)
    assert!((b.mu_prime - a.mu_prime).abs() < 1e-9 * a.mu_prime.abs().max(1.0), "{a:?} {b:?}");
    assert!((b.mu - a.mu - 3f64.ln()).abs() < 1e-10 * a.mu.abs());
}

#[test]
fn cylinder_limit_error_decreases_with_m() {
    let e: Vec<f64> = [16, 32, 64].iter().map(|&m| cylinder_limit_error(m).unwrap()).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    // roughly quadratic in 1/m
    assert!(e[1] / e[2] > 3.0, "{e:?}");
}

#[test]
fn dislocation_rate_approaches_prediction() {
    let (a64, p) = dislocation_change(64, 0.5).unwrap();
    let (a128, _) = dislocation_change(128, 0.5).unwrap();
    assert!(((a64 - p) / p).abs() < 0.25);
    assert!(((a128 - p) / p).abs() <= ((a64 - p) / p).abs());
}

#[test]
fn mode_zero_is_the_average_profile() {
    let rbar = 1.43;
    let sol = build_ld(Some(SingularLattice::new(1, rbar, 24).unwrap()), None, 1.0, 0.0, DEFAULT_MODES).unwrap();
    let prof = avg_profile(rbar, 24).unwrap();
    for (i, &r) in prof.r_grid.iter().enumerate().step_by(37) {
        let v = sol.mode0(r).unwrap();
        assert!((v - prof.value[i]).abs() < 1e-9 * prof.value[i].abs().max(1.0), "r = {r}");
        // the angular average of the full solution agrees away from the circle
        if (r - rbar).abs() > 0.3 {
            let n = 64;
            let avg: f64 = (0..n).map(|k| sol.value(r, 2.0 * PI * k as f64 / (24 * n) as f64).unwrap()).sum::<f64>() / n as f64;
            assert!((avg - v).abs() < 1e-6 * v.abs().max(1.0), "r = {r}: {avg} vs {v}");
        }
    }
}

#[test]
fn obstruction_functions_vanish_outside_their_annuli() {
    let lat = SingularLattice::new(0, roots().r_mu, 48).unwrap();
    let ob = obstruction_fns(lat).unwrap();
    let (pr, _) = lat.point(0);
    for k in 0..12 {
        let a = 2.0 * PI * k as f64 / 12.0;
        let at = |d: f64| {
            let (x, y) = (pr + d * a.cos(), d * a.sin());
            (x.hypot(y), y.atan2(x))
        };
        let (r, t) = at(2.5 * ob.delta);
        assert_eq!(ob.v(r, t).unwrap(), 0.0);
        assert_eq!(ob.v_prime(r, t).unwrap(), 0.0);
        let (r, t) = at(0.5 * ob.delta);
        assert_eq!(ob.w(r, t).unwrap(), 0.0);
        assert_eq!(ob.w_prime(r, t).unwrap(), 0.0);
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(SingularLattice::new(0, 0.5, 16).is_err());
    assert!(SingularLattice::new(0, 1.5, 1).is_err());
    assert!(green_cyl(0.0, 2.0 * PI).is_err());
    assert!(build_ld(None, None, 1.0, 1.0, DEFAULT_MODES).is_err());
}
