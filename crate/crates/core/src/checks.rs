//! Invariant suites per module. Each check measures one number and compares
//! it with a fixed threshold; the `check` command and the acceptance target
//! both run these.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::rc::Rc;
use std::time::Instant;

use serde::Serialize;

use crate::balance::{
    actual_mismatch, assemble_z, derive_params, derive_params_alpha, newton_solve, predicted_all_levels,
    predicted_mismatch, sgn_interface, toeplitz_eigs, trig_balance_check, NewtonOptions, NewtonReport, ParamVector,
    DEFAULT_ALPHA, DEFAULT_C1,
};
use crate::error::{Error, Result};
use crate::geometry::bridge::{catenoid_graph, graph_expansion_defect};
use crate::geometry::mesh::build_initial_surface;
use crate::geometry::residual::{residual_report, Region, ResidualReport};
use crate::geometry::surface::{cone_slopes, level_gaps, GeometryMode, DEFAULT_R_OUT};
use crate::geometry::{
    catenoid_point, fermi_map, fermi_map_detailed, gaussian_weight, graph_weighted_mean_curvature,
    weighted_mean_curvature, AmbientPoint, BridgeSpec, InitialSurface,
};
use crate::ld::{
    build_ld, cutoff, extract_affine, extract_affine_eps, extraction_radius, green_cyl, obstruction_fns,
    psi_base, LatticePoint, LdSolution, Side, SingularLattice, DEFAULT_MODES,
};
use crate::rld::{
    avg_profile, find_roots, h_hat, h_hat_inv, phi_m, phi_mu_basis, phi_one, phi_u, roots, solve_jbar,
    solve_phibar, AvgProfile, PhibarClosed,
};
use crate::specfun::{gamma_fn, kummer_m, tricomi_u};

pub const MODULES: [&str; 5] = ["specfun", "rld", "ld", "balance", "geometry"];

/// Bound used for every "bounded by a constant" property.
pub const BOUND_C: f64 = 10.0;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub module: String,
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    /// Human-readable pass condition on `measured`.
    pub condition: String,
    pub detail: String,
    pub seconds: f64,
}

/// What a check computed, before timing is attached.
pub struct Outcome {
    pub passed: bool,
    pub measured: f64,
    pub condition: String,
    pub detail: String,
}

impl Outcome {
    /// Passes when measured < threshold (and is not NaN).
    pub fn below(measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Outcome { passed: measured < threshold, measured, condition: format!("< {threshold:e}"), detail: detail.into() }
    }

    pub fn above(measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Outcome { passed: measured > threshold, measured, condition: format!("> {threshold:e}"), detail: detail.into() }
    }

    pub fn holds(ok: bool, measured: f64, condition: &str, detail: impl Into<String>) -> Self {
        Outcome { passed: ok, measured, condition: condition.into(), detail: detail.into() }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CheckOptions {
    pub alpha: f64,
    pub c1: f64,
    pub n_modes: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub resolution: usize,
    pub r_out: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            alpha: DEFAULT_ALPHA,
            c1: DEFAULT_C1,
            n_modes: DEFAULT_MODES,
            tol: 1e-6,
            max_iter: 20,
            resolution: 32,
            r_out: DEFAULT_R_OUT,
        }
    }
}

/// Shared expensive objects: Newton solutions, surfaces, residual reports.
pub struct Context {
    pub opts: CheckOptions,
    newton: RefCell<HashMap<(u32, u32), Rc<TimedSolve>>>,
    surfaces: RefCell<HashMap<(u32, u32), Rc<InitialSurface>>>,
    residuals: RefCell<HashMap<(u32, u32), Rc<ResidualReport>>>,
}

impl Context {
    pub fn new(opts: CheckOptions) -> Self {
        Context { opts, newton: Default::default(), surfaces: Default::default(), residuals: Default::default() }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.opts.tol,
            max_iter: self.opts.max_iter,
            c1: self.opts.c1,
            n_modes: self.opts.n_modes,
            ..NewtonOptions::default()
        }
    }

    /// Converged solve from pv = 0 and its wall time in seconds.
    pub fn newton(&self, two_big_j: u32, m: u32) -> Result<Rc<TimedSolve>> {
        if let Some(r) = self.newton.borrow().get(&(two_big_j, m)) {
            return Ok(r.clone());
        }
        let t = Instant::now();
        let rep = newton_solve(m, ParamVector::zero(two_big_j)?, self.newton_options())?;
        let r = Rc::new((rep, t.elapsed().as_secs_f64()));
        self.newton.borrow_mut().insert((two_big_j, m), r.clone());
        Ok(r)
    }

    pub fn surface(&self, two_big_j: u32, m: u32) -> Result<Rc<InitialSurface>> {
        if let Some(s) = self.surfaces.borrow().get(&(two_big_j, m)) {
            return Ok(s.clone());
        }
        let n = self.newton(two_big_j, m)?;
        let derived = derive_params_alpha(&n.0.pv, m, self.opts.alpha)?;
        let mut s = InitialSurface::new(&n.0.pv, &derived, self.opts.n_modes)?;
        s.r_out = self.opts.r_out;
        let s = Rc::new(s);
        self.surfaces.borrow_mut().insert((two_big_j, m), s.clone());
        Ok(s)
    }

    pub fn residual(&self, two_big_j: u32, m: u32) -> Result<Rc<ResidualReport>> {
        if let Some(r) = self.residuals.borrow().get(&(two_big_j, m)) {
            return Ok(r.clone());
        }
        let r = Rc::new(residual_report(&*self.surface(two_big_j, m)?)?);
        self.residuals.borrow_mut().insert((two_big_j, m), r.clone());
        Ok(r)
    }
}

type CheckFn = fn(&Context) -> Result<Outcome>;

/// A converged solve and its wall time in seconds.
pub type TimedSolve = (NewtonReport, f64);

/// Every check, in execution order.
pub fn registry() -> Vec<(&'static str, &'static str, CheckFn)> {
    vec![
        ("specfun", "gamma_values", specfun_gamma),
        ("specfun", "kummer_values", specfun_kummer_values),
        ("specfun", "tricomi_values", specfun_tricomi_values),
        ("specfun", "tricomi_large_x", specfun_tricomi_large_x),
        ("specfun", "kummer_contiguous_relation", specfun_contiguous),
        ("specfun", "derivatives_vs_differences", specfun_derivatives),
        ("specfun", "wronskian_k012", specfun_wronskian),
        ("rld", "roots_quoted_values", rld_roots),
        ("rld", "roots_runtime", rld_roots_runtime),
        ("rld", "roots_ordering_and_positivity", rld_roots_order),
        ("rld", "h_hat_root_inverse_monotone", rld_h_hat),
        ("rld", "phi_one_linear_positive", rld_phi_one),
        ("rld", "avg_profile_jump_and_slope", rld_avg),
        ("rld", "profile_ode_residuals", rld_ode_residual),
        ("rld", "phibar_linearity", rld_phibar_linearity),
        ("rld", "decomposition_identity", rld_decomposition),
        ("rld", "basis_monotone_concave", rld_monotone),
        ("ld", "cutoff_identities", ld_cutoff),
        ("ld", "mode0_oracle", ld_mode0),
        ("ld", "dm_invariance", ld_invariance),
        ("ld", "odd_symmetry", ld_odd_symmetry),
        ("ld", "far_field_mode0", ld_far_field),
        ("ld", "cylinder_limit_monotone", ld_cylinder_limit),
        ("ld", "green_cyl_values", ld_green),
        ("ld", "mismatch_tangential_zero", ld_tangential),
        ("ld", "mismatch_radius_halving", ld_halving),
        ("ld", "mu_prime_bounded_at_r_mu", ld_mu_prime_bounded),
        ("ld", "obstruction_supports", ld_obstruction),
        ("ld", "pde_residual", ld_pde_residual),
        ("ld", "strength_linearity", ld_linearity),
        ("ld", "mode_tail", ld_mode_tail),
        ("ld", "dislocation_derivative", ld_dislocation),
        ("balance", "signature_values", balance_signature),
        ("balance", "derived_at_origin", balance_derived_origin),
        ("balance", "origin_antisymmetry", balance_antisymmetry),
        ("balance", "toeplitz_eigenpairs", balance_toeplitz),
        ("balance", "trig_balance_identity", balance_trig),
        ("balance", "a_times_z_identity", balance_az),
        ("balance", "predicted_linearity", balance_predicted_linearity),
        ("balance", "pair_relations", balance_pairs),
        ("balance", "newton_half_64", balance_newton_half_64),
        ("balance", "newton_one_64", balance_newton_one_64),
        ("balance", "newton_three_halves_96", balance_newton_three_halves_96),
        ("balance", "newton_history_decreasing", balance_history),
        ("balance", "newton_idempotent", balance_idempotent),
        ("balance", "kappa_zero_convention", balance_kappa_zero),
        ("balance", "mismatch_consistency", balance_consistency),
        ("geometry", "gaussian_weight_values", geometry_weight),
        ("geometry", "fermi_identity_and_axis", geometry_fermi_identity),
        ("geometry", "fermi_speed_drift", geometry_fermi_drift),
        ("geometry", "geodesic_cubic_bound", geometry_geodesic_cubic),
        ("geometry", "catenoid_waist_and_height", geometry_catenoid),
        ("geometry", "weighted_curvature_models", geometry_curvature_models),
        ("geometry", "tilted_catenoid_expansion", geometry_tilted_expansion),
        ("geometry", "topology_half_8", geometry_topology_half_8),
        ("geometry", "topology_one_8", geometry_topology_one_8),
        ("geometry", "topology_three_halves_6", geometry_topology_three_halves_6),
        ("geometry", "ply_deterministic", geometry_ply_deterministic),
        ("geometry", "residual_graph_decreasing", geometry_residual_graph),
        ("geometry", "residual_bridge_core_bounded", geometry_residual_bridge),
        ("geometry", "residual_gluing_annulus", geometry_residual_gluing),
        ("geometry", "blend_overlap_consistency", geometry_overlap),
        ("geometry", "cone_slopes_one_64", geometry_cone_slopes),
        ("geometry", "cone_slope_middle_zero", geometry_cone_middle),
        ("geometry", "far_field_phi_gl_slope", geometry_far_slope),
        ("geometry", "embeddedness_gap", geometry_embeddedness),
    ]
}

/// Runs the checks of one module, or all when `filter` is None.
pub fn run_checks(filter: Option<&str>, opts: CheckOptions) -> Result<Vec<CheckResult>> {
    run_checks_with(filter, opts, |_| {})
}

/// As `run_checks`, reporting each result as soon as it is known.
pub fn run_checks_with<F: FnMut(&CheckResult)>(
    filter: Option<&str>,
    opts: CheckOptions,
    mut on_result: F,
) -> Result<Vec<CheckResult>> {
    if let Some(f) = filter {
        if !MODULES.contains(&f) {
            return Err(Error::Config(format!("unknown module {f:?}; expected one of {MODULES:?}")));
        }
    }
    let ctx = Context::new(opts);
    let mut out = Vec::new();
    for (module, name, f) in registry() {
        if filter.is_some_and(|x| x != module) {
            continue;
        }
        let t = Instant::now();
        let o = f(&ctx).unwrap_or_else(|e| Outcome {
            passed: false,
            measured: f64::NAN,
            condition: "no error".into(),
            detail: e.to_string(),
        });
        let r = CheckResult {
            module: module.into(),
            name: name.into(),
            passed: o.passed && !o.measured.is_nan(),
            measured: o.measured,
            condition: o.condition,
            detail: o.detail,
            seconds: t.elapsed().as_secs_f64(),
        };
        on_result(&r);
        out.push(r);
    }
    Ok(out)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// JUnit-style XML: one testsuite per module, one testcase per check.
pub fn junit_xml(results: &[CheckResult]) -> String {
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let fails = results.iter().filter(|r| !r.passed).count();
    let total: f64 = results.iter().map(|r| r.seconds).sum();
    let _ = writeln!(s, "<testsuites tests=\"{}\" failures=\"{fails}\" time=\"{total:.3}\">", results.len());
    for module in MODULES {
        let mine: Vec<&CheckResult> = results.iter().filter(|r| r.module == module).collect();
        if mine.is_empty() {
            continue;
        }
        let f = mine.iter().filter(|r| !r.passed).count();
        let t: f64 = mine.iter().map(|r| r.seconds).sum();
        let _ = writeln!(s, "  <testsuite name=\"{module}\" tests=\"{}\" failures=\"{f}\" time=\"{t:.3}\">", mine.len());
        for r in mine {
            let _ = write!(s, "    <testcase classname=\"{module}\" name=\"{}\" time=\"{:.3}\"", r.name, r.seconds);
            let msg = xml_escape(&format!("measured {:e} (want {}); {}", r.measured, r.condition, r.detail));
            if r.passed {
                let _ = writeln!(s, ">\n      <system-out>{msg}</system-out>\n    </testcase>");
            } else {
                let _ = writeln!(s, ">\n      <failure message=\"{msg}\"/>\n    </testcase>");
            }
        }
        let _ = writeln!(s, "  </testsuite>");
    }
    s.push_str("</testsuites>\n");
    s
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------- specfun

fn specfun_gamma(_: &Context) -> Result<Outcome> {
    let pairs = [(1.0, 1.0), (0.5, PI.sqrt()), (5.0, 24.0), (-0.5, -2.0 * PI.sqrt()), (10.5, 1133278.3889487855)];
    let mut worst = 0.0f64;
    for (x, want) in pairs {
        worst = worst.max(rel(gamma_fn(x)?, want));
    }
    let pole = gamma_fn(-2.0).is_err();
    Ok(Outcome::holds(worst < 1e-12 && pole, worst, "< 1e-12 and a pole error at −2", "max relative error"))
}

fn specfun_kummer_values(_: &Context) -> Result<Outcome> {
    let r_m = roots().r_m;
    let a = (kummer_m(-0.5, 1.0, 0.0)?.0 - 1.0).abs();
    let b = rel(kummer_m(1.0, 1.0, 2.0)?.0, 2f64.exp());
    let c = kummer_m(-0.5, 1.0, r_m * r_m / 4.0)?.0.abs();
    let ok = a < 1e-10 && b < 1e-10 && c < 5e-3;
    Ok(Outcome::holds(ok, b.max(a), "< 1e-10; |M(−½,1,r_m²/4)| < 5e-3", format!("M(−½,1,r_m²/4) = {c:e}")))
}

fn specfun_tricomi_values(_: &Context) -> Result<Outcome> {
    let r_u = roots().r_u;
    let v = tricomi_u(-0.5, 1.0, r_u * r_u / 4.0)?.0.abs();
    Ok(Outcome::below(v, 5e-3, "|U(−½,1,r_u²/4)|"))
}

fn specfun_tricomi_large_x(_: &Context) -> Result<Outcome> {
    // U(−½,1,x)/√x = 1 − 1/(4x) + 1/(32x²) + O(x⁻³)
    let mut worst = 0.0f64;
    for x in [100.0, 150.0, 200.0] {
        let q = tricomi_u(-0.5, 1.0, x)?.0 / x.sqrt();
        worst = worst.max((q - (1.0 - 0.25 / x + 1.0 / (32.0 * x * x))).abs());
    }
    Ok(Outcome::below(worst, 1e-7, "|U/√x − three-term asymptotic| at x ∈ {100, 150, 200}"))
}

fn specfun_contiguous(_: &Context) -> Result<Outcome> {
    // (b − a)M(a−1) + (2a − b + x)M(a) − aM(a+1) = 0
    let mut worst = 0.0f64;
    for &a in &[-0.5, 0.5, 3.5, 8.5] {
        for &x in &[0.3, 2.0, 9.0, 30.0] {
            let b = 1.0;
            let t = [
                (b - a) * kummer_m(a - 1.0, b, x)?.0,
                (2.0 * a - b + x) * kummer_m(a, b, x)?.0,
                -a * kummer_m(a + 1.0, b, x)?.0,
            ];
            let scale = t.iter().map(|v| v.abs()).fold(0.0, f64::max);
            worst = worst.max((t[0] + t[1] + t[2]).abs() / scale);
        }
    }
    Ok(Outcome::below(worst, 1e-9, "relative residual of the contiguous relation"))
}

fn specfun_derivatives(_: &Context) -> Result<Outcome> {
    let fd = |f: &dyn Fn(f64) -> Result<f64>, x: f64| -> Result<f64> {
        let h = 1e-5 * x.max(1.0);
        let d1 = (f(x + h)? - f(x - h)?) / (2.0 * h);
        let d2 = (f(x + h / 2.0)? - f(x - h / 2.0)?) / h;
        Ok((4.0 * d2 - d1) / 3.0)
    };
    let mut worst = 0.0f64;
    for i in 0..25 {
        let x = 0.1 * (500f64).powf(i as f64 / 24.0);
        for &a in &[-0.5, 0.5, 3.5] {
            let dm = kummer_m(a, 1.0, x)?.1;
            worst = worst.max(rel(fd(&|t| Ok(kummer_m(a, 1.0, t)?.0), x)?, dm));
        }
        let du = tricomi_u(-0.5, 1.0, x)?.1;
        worst = worst.max(rel(fd(&|t| Ok(tricomi_u(-0.5, 1.0, t)?.0), x)?, du));
    }
    Ok(Outcome::below(worst, 1e-6, "max relative deviation on x ∈ [0.1, 50]"))
}

fn specfun_wronskian(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for k in 0..3 {
        let b = phi_mu_basis(k)?;
        for i in 0..200 {
            let r = 0.1 + 9.9 * i as f64 / 199.0;
            let (m, dm) = b.eval_m(r)?;
            let (u, du) = b.eval_u(r)?;
            worst = worst.max(rel(m * du - u * dm, b.wronskian(r)));
        }
    }
    Ok(Outcome::below(worst, 1e-8, "k ∈ {0,1,2}, 200 radii in [0.1, 10]"))
}

// ---------------------------------------------------------------- rld

fn rld_roots(_: &Context) -> Result<Outcome> {
    let r = find_roots()?;
    let dev = (r.r_m - 2.51).abs().max((r.r_u - 0.88).abs()).max((r.r_mu - 1.52).abs());
    Ok(Outcome::below(dev, 0.01, format!("r_m = {:.6}, r_u = {:.6}, r_mu = {:.6}", r.r_m, r.r_u, r.r_mu)))
}

fn rld_roots_runtime(_: &Context) -> Result<Outcome> {
    let t = Instant::now();
    find_roots()?;
    Ok(Outcome::below(t.elapsed().as_secs_f64(), 1.0, "seconds for a cold root search"))
}

fn rld_roots_order(_: &Context) -> Result<Outcome> {
    let r = roots();
    let pos = phi_m(r.r_mu)?.0.min(phi_u(r.r_mu)?.0);
    let ordered = r.r_u < r.r_mu && r.r_mu < r.r_m;
    Ok(Outcome::holds(ordered && pos > 0.0, pos, "> 0 with r_u < r_mu < r_m", "min(φ_m(r_mu), φ_u(r_mu))"))
}

fn rld_h_hat(_: &Context) -> Result<Outcome> {
    let r = roots().r_mu;
    let at_root = h_hat(r)?.abs();
    let inv0 = (h_hat_inv(0.0)? - r).abs();
    let mut round = 0.0f64;
    for &y in &[-0.19, -0.05, 0.01, 0.2] {
        round = round.max((h_hat(h_hat_inv(y)?)? - y).abs());
    }
    let mut max_diff = f64::NEG_INFINITY;
    let mut prev = h_hat(r - 0.2)?;
    for i in 1..=40 {
        let v = h_hat(r - 0.2 + 0.01 * i as f64)?;
        max_diff = max_diff.max(v - prev);
        prev = v;
    }
    let worst = at_root.max(inv0).max(round);
    let ok = worst < 1e-9 && max_diff < 0.0;
    Ok(Outcome::holds(ok, worst, "< 1e-9 with decreasing samples", format!("largest sampled increment {max_diff:e}")))
}

fn rld_phi_one(_: &Context) -> Result<Outcome> {
    let r = roots().r_mu;
    let pos = phi_one(r, 8)?;
    let a = phi_one(1.37, 32)?;
    let lin = rel(phi_one(1.37, 64)?, 2.0 * a);
    Ok(Outcome::holds(lin < 1e-13 && pos > 0.0, lin, "< 1e-13 and φ_1(r_mu) > 0", format!("φ_1(r_mu, 8) = {pos}")))
}

fn rld_avg(_: &Context) -> Result<Outcome> {
    let mut worst_jump = 0.0f64;
    let mut worst_slope = 0.0f64;
    for &(rbar, m) in &[(roots().r_mu, 16u32), (1.4, 64)] {
        let ap = AvgProfile::new(rbar, m)?;
        let p = ap.profile()?;
        let want = m as f64 * (rbar * rbar / 8.0).exp() / rbar;
        worst_jump = worst_jump.max(rel(p.jump_deriv, want));
        let slope = ap.eval(100.0)?.0 / 100.0;
        let want = PI.sqrt() * m as f64 * phi_m(rbar)?.0 * (-rbar * rbar / 8.0).exp() / 2.0;
        worst_slope = worst_slope.max(rel(slope, want));
    }
    let ok = worst_jump < 1e-8 && worst_slope < 1e-3;
    Ok(Outcome::holds(ok, worst_jump, "< 1e-8; slope error < 1e-3", format!("slope relative error {worst_slope:e}")))
}

fn rld_ode_residual(_: &Context) -> Result<Outcome> {
    let rbar = roots().r_mu;
    let mut worst = 0.0f64;
    for p in [avg_profile(rbar, 32)?, solve_phibar(1.0, 0.0, rbar)?, solve_phibar(0.0, 1.0, rbar)?, solve_jbar(0.7, rbar)?] {
        worst = worst.max(p.ode_residual()?);
    }
    Ok(Outcome::below(worst, 1e-7, "sup one-step defect of avg, φ̄[1,0], φ̄[0,1], j̄"))
}

fn rld_phibar_linearity(_: &Context) -> Result<Outcome> {
    let rbar = 1.45;
    let p10 = solve_phibar(1.0, 0.0, rbar)?;
    let p01 = solve_phibar(0.0, 1.0, rbar)?;
    let pab = solve_phibar(2.5, -1.5, rbar)?;
    let mut worst = 0.0f64;
    for i in 0..pab.r_grid.len() {
        let lin = 2.5 * p10.value[i] - 1.5 * p01.value[i];
        worst = worst.max((pab.value[i] - lin).abs() / (1.0 + lin.abs()));
    }
    Ok(Outcome::below(worst, 1e-9, "φ̄[2.5,−1.5] vs 2.5φ̄[1,0] − 1.5φ̄[0,1]"))
}

fn rld_decomposition(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for &(rbar, m) in &[(1.52, 16u32), (1.4, 64)] {
        let ap = AvgProfile::new(rbar, m)?;
        let pb = solve_phibar(ap.phi1, m as f64 * h_hat(rbar)?, rbar)?;
        let jb = solve_jbar(m as f64 / (2.0 * rbar), rbar)?;
        for i in 0..pb.r_grid.len() {
            let r = pb.r_grid[i];
            if !(0.1..=50.0).contains(&r) {
                continue;
            }
            let a = ap.eval(r)?.0;
            let scale = a.abs() + pb.value[i].abs() + jb.value[i].abs();
            worst = worst.max((a - pb.value[i] - jb.value[i]).abs() / scale);
        }
    }
    Ok(Outcome::below(worst, 1e-7, "relative to |avg| + |φ̄| + |j̄| on r ∈ [0.1, 50]"))
}

fn rld_monotone(_: &Context) -> Result<Outcome> {
    let mut bad = 0usize;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..200 {
        let r = 0.05 + i as f64 * 0.05;
        let dm = phi_m(r)?.1;
        let du = phi_u(r)?.1;
        if !(dm < 0.0 && du > 0.0) {
            bad += 1;
        }
        if let Some((pm, pu)) = prev {
            if !(dm < pm && du < pu) {
                bad += 1;
            }
        }
        prev = Some((dm, du));
    }
    Ok(Outcome::holds(bad == 0, bad as f64, "= 0", "violations of monotonicity or concavity on [0.05, 10]"))
}

// ---------------------------------------------------------------- ld

fn ld_cutoff(_: &Context) -> Result<Outcome> {
    let mut worst = (cutoff(0.0, 1.0, 0.0)? - 0.0).abs().max((cutoff(0.0, 1.0, 1.0)? - 1.0).abs());
    for i in 0..=40 {
        let t = -1.0 + 3.0 * i as f64 / 40.0;
        worst = worst.max((cutoff(0.2, 1.3, t)? + cutoff(1.3, 0.2, t)? - 1.0).abs());
        let s = -4.0 + 8.0 * i as f64 / 40.0;
        worst = worst.max((psi_base(-s).0 - (1.0 - psi_base(s).0)).abs());
    }
    let err = cutoff(1.0, 1.0, 0.5).is_err();
    Ok(Outcome::holds(worst < 1e-15 && err, worst, "< 1e-15 and a = b rejected", "endpoint, complement and odd-part identities"))
}

fn ld_mode0(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for &(m, rbar) in &[(16u32, roots().r_mu), (64, 1.4)] {
        let sol = build_ld(Some(SingularLattice::new(0, rbar, m)?), None, 1.0, 0.0, DEFAULT_MODES)?;
        let prof = avg_profile(rbar, m)?;
        for (i, &r) in prof.r_grid.iter().enumerate() {
            if !(0.1..=50.0).contains(&r) {
                continue;
            }
            worst = worst.max((sol.mode0(r)? - prof.value[i]).abs() / prof.value[i].abs().max(1.0));
        }
    }
    Ok(Outcome::below(worst, 1e-9, "(m, r̲) ∈ {(16, r_mu), (64, 1.4)}, r ∈ [0.1, 50]"))
}

fn two_lattice(m: u32, rbar: f64) -> Result<LdSolution> {
    let l0 = SingularLattice::new(0, rbar, m)?;
    build_ld(Some(l0), Some(l0.reflected()), 1.0, 1.0, DEFAULT_MODES)
}

fn ld_invariance(_: &Context) -> Result<Outcome> {
    let m = 16;
    let sol = two_lattice(m, roots().r_mu)?;
    let mut worst = 0.0f64;
    for i in 0..40 {
        let r = 0.3 + 0.09 * i as f64;
        let th = 0.013 + 0.37 * i as f64;
        let a = sol.value(r, th)?;
        let b = sol.value(r, th + 2.0 * PI / m as f64)?;
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
    }
    Ok(Outcome::below(worst, 1e-12, "value(θ + 2π/m) vs value(θ), m = 16"))
}

fn ld_odd_symmetry(_: &Context) -> Result<Outcome> {
    let m = 16;
    let sol = two_lattice(m, roots().r_mu)?;
    let mut worst = 0.0f64;
    for i in 0..40 {
        let r = 0.3 + 0.09 * i as f64;
        let th = 0.011 + 0.29 * i as f64;
        let a = sol.value(r, th)?;
        let b = sol.value(r, PI / m as f64 - th)?;
        worst = worst.max((a + b).abs() / a.abs().max(1.0));
    }
    Ok(Outcome::below(worst, 1e-9, "value∘σ[π/2m] + value, equal strengths"))
}

fn ld_far_field(_: &Context) -> Result<Outcome> {
    let sol = build_ld(Some(SingularLattice::new(0, roots().r_mu, 16)?), None, 1.0, 0.0, DEFAULT_MODES)?;
    let mut worst = 0.0f64;
    for th in [0.0, 0.1, 0.2] {
        worst = worst.max(rel(sol.value(50.0, th)?, sol.mode0(50.0)?));
    }
    Ok(Outcome::below(worst, 1e-6, "value(50, θ) vs mode 0, m = 16"))
}

/// sup over 0.5 ≤ |(ŝ, θ̃)| ≤ 2 of |e^ω(Φ − φ̄[φ_1, mĥ]) − G_∞|.
pub fn cylinder_limit_error(m: u32) -> Result<f64> {
    let rbar = roots().r_mu;
    let sol = build_ld(Some(SingularLattice::new(0, rbar, m)?), None, 1.0, 0.0, DEFAULT_MODES)?;
    let pb = PhibarClosed::new(phi_one(rbar, m)?, m as f64 * h_hat(rbar)?, rbar)?;
    let mut worst = 0.0f64;
    for i in 0..=12 {
        let rad = 0.5 + 1.5 * i as f64 / 12.0;
        for k in 0..32 {
            let a = 2.0 * PI * (k as f64 + 0.5) / 32.0;
            let (sh, tt) = (rad * a.cos(), rad * a.sin());
            let r = rbar * (sh / m as f64).exp();
            let th = tt / m as f64;
            let e = (-r * r / 8.0).exp();
            let v = e * (sol.value(r, th)? - pb.eval(r)?.0);
            worst = worst.max((v - green_cyl(sh, tt)?).abs());
        }
    }
    Ok(worst)
}

fn ld_cylinder_limit(_: &Context) -> Result<Outcome> {
    let t = Instant::now();
    let errs = [cylinder_limit_error(16)?, cylinder_limit_error(32)?, cylinder_limit_error(64)?];
    let secs = t.elapsed().as_secs_f64();
    let ok = errs[1] < errs[0] && errs[2] < errs[1] && secs < 60.0;
    Ok(Outcome::holds(
        ok,
        errs[2],
        "strictly decreasing over m = 16, 32, 64 within 60 s",
        format!("sup errors {errs:?} in {secs:.1} s"),
    ))
}

fn ld_green(_: &Context) -> Result<Outcome> {
    let h = 1e-3;
    let g = |s: f64| green_cyl(s, PI);
    let d1 = (g(h)? - g(-h)?) / (2.0 * h);
    let d2 = (g(h)? - 2.0 * g(0.0)? + g(-h)?) / (h * h);
    let d2h = (g(h / 2.0)? - 2.0 * g(0.0)? + g(-h / 2.0)?) / (h * h / 4.0);
    let d2 = (4.0 * d2h - d2) / 3.0;
    let worst = (g(0.0)? - 2f64.ln()).abs().max(d1.abs()).max((d2 - 0.25).abs());
    let sing = green_cyl(0.0, 0.0).is_err();
    Ok(Outcome::holds(worst < 1e-8 && sing, worst, "< 1e-8 and singular input rejected", "G(0,π) = log 2, ∂G = 0, ∂²G = 1/4"))
}

fn unit_solution(m: u32, family: u8) -> Result<LdSolution> {
    build_ld(Some(SingularLattice::new(family, roots().r_mu, m)?), None, 1.0, 0.0, DEFAULT_MODES)
}

const P0: LatticePoint = LatticePoint { side: Side::Plus, index: 0 };

fn ld_tangential(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for m in [32, 64] {
        let sol = unit_solution(m, 0)?;
        worst = worst.max(extract_affine_eps(&sol, P0, 1.0, 0.0, extraction_radius(m))?.dtheta.abs());
    }
    Ok(Outcome::below(worst, 1e-7, "|dθ component| at the point on the θ = 0 axis"))
}

fn ld_halving(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for m in [32, 64] {
        let sol = unit_solution(m, 1)?;
        let a = extract_affine(&sol, P0, 1.0, 0.0)?;
        let b = extract_affine_eps(&sol, P0, 1.0, 0.0, extraction_radius(m) / 2.0)?;
        worst = worst.max((a.mu - b.mu).abs() / a.mu.abs().max(1.0));
        worst = worst.max((a.mu_prime - b.mu_prime).abs() / a.mu_prime.abs().max(1e-3));
    }
    Ok(Outcome::below(worst, 1e-5, "relative change of (μ, μ′) when ε halves"))
}

fn ld_mu_prime_bounded(_: &Context) -> Result<Outcome> {
    let mut vals = Vec::new();
    for m in [32, 64, 128] {
        vals.push(extract_affine(&unit_solution(m, 1)?, P0, 1.0, 0.0)?.mu_prime);
    }
    let worst = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(Outcome::below(worst, BOUND_C, format!("μ′ at r̲ = r_mu for m = 32, 64, 128: {vals:?}")))
}

fn ld_obstruction(_: &Context) -> Result<Outcome> {
    let mut worst_support = 0.0f64;
    let mut sups = Vec::new();
    for m in [32u32, 64] {
        let lat = SingularLattice::new(0, roots().r_mu, m)?;
        let ob = obstruction_fns(lat)?;
        let d = ob.delta;
        let (pr, _) = lat.point(0);
        let mut sup_v = 0.0f64;
        for k in 0..16 {
            let a = 2.0 * PI * k as f64 / 16.0;
            let at = |dist: f64| {
                let (x, y) = (pr + dist * a.cos(), dist * a.sin());
                (x.hypot(y), y.atan2(x))
            };
            let (r, t) = at(3.0 * d);
            worst_support = worst_support.max(ob.v(r, t)?.abs()).max(ob.v_prime(r, t)?.abs());
            let (r, t) = at(0.4 * d);
            worst_support = worst_support.max(ob.w(r, t)?.abs()).max(ob.w_prime(r, t)?.abs());
            for f in [0.0, 0.5, 1.0, 1.5] {
                let (r, t) = at(f * d + 1e-12);
                sup_v = sup_v.max(ob.v(r, t)?.abs());
            }
        }
        sups.push(sup_v);
    }
    let bounded = sups.iter().all(|&s| s < BOUND_C);
    Ok(Outcome::holds(
        worst_support == 0.0 && bounded,
        worst_support,
        "= 0 with sup|V| < 10",
        format!("V, V′ at 3δ and W, W′ at 0.4δ; sup|V| for m = 32, 64: {sups:?}"),
    ))
}

fn ld_pde_residual(_: &Context) -> Result<Outcome> {
    let m = 32u32;
    let sol = unit_solution(m, 0)?;
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut i = 0;
    while count < 100 {
        i += 1;
        let r = 0.5 + 2.0 * ((i as f64 * 0.618034) % 1.0);
        let th = 2.0 * PI * ((i as f64 * 0.414214) % 1.0);
        if sol.singular_dist(r, th) < 2.0 / m as f64 {
            continue;
        }
        count += 1;
        let h = 0.05 / m as f64;
        let f = |a: f64, b: f64| sol.value(a, b);
        let u = f(r, th)?;
        let (rp, rp2, rm, rm2) = (f(r + h, th)?, f(r + 2.0 * h, th)?, f(r - h, th)?, f(r - 2.0 * h, th)?);
        let (tp, tp2, tm, tm2) = (f(r, th + h)?, f(r, th + 2.0 * h)?, f(r, th - h)?, f(r, th - 2.0 * h)?);
        let ur = (-rp2 + 8.0 * rp - 8.0 * rm + rm2) / (12.0 * h);
        let urr = (-rp2 + 16.0 * rp - 30.0 * u + 16.0 * rm - rm2) / (12.0 * h * h);
        let utt = (-tp2 + 16.0 * tp - 30.0 * u + 16.0 * tm - tm2) / (12.0 * h * h);
        let terms = [urr, ur / r, utt / (r * r), -r / 2.0 * ur, u / 2.0];
        let res: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        worst = worst.max(res.abs() / scale);
    }
    Ok(Outcome::below(worst, 1e-5, "|𝓛φ| relative to the sum of its term sizes, 100 points, m = 32"))
}

fn ld_linearity(_: &Context) -> Result<Outcome> {
    let m = 16;
    let l0 = SingularLattice::new(0, 1.45, m)?;
    let l1 = SingularLattice::new(1, 1.6, m)?;
    let a = build_ld(Some(l0), Some(l1), 0.7, 0.0, DEFAULT_MODES)?;
    let b = build_ld(Some(l0), Some(l1), 0.0, 1.3, DEFAULT_MODES)?;
    let ab = build_ld(Some(l0), Some(l1), 0.7, 1.3, DEFAULT_MODES)?;
    let mut worst = 0.0f64;
    for i in 0..40 {
        let r = 0.4 + 0.08 * i as f64;
        let th = 0.07 + 0.31 * i as f64;
        let s = a.value(r, th)? + b.value(r, th)?;
        worst = worst.max((ab.value(r, th)? - s).abs() / s.abs().max(1.0));
    }
    Ok(Outcome::below(worst, 1e-10, "build(τa + τb) vs build(τa) + build(τb)"))
}

fn ld_mode_tail(_: &Context) -> Result<Outcome> {
    let m = 32;
    let sol = unit_solution(m, 0)?;
    let part = sol.plus.as_ref().expect("plus lattice");
    let r = part.lattice.rbar + 3.0 / m as f64;
    let mags = part.modes.mode_magnitudes(r);
    let increases = mags.windows(2).skip(1).filter(|w| w[1] > w[0] && w[1] > 1e-300).count();
    let bound = part.modes.tail_bound;
    Ok(Outcome::holds(
        increases == 0 && bound < 1e-8,
        bound,
        "< 1e-8 with |C_n G_n| decreasing for n ≥ 2",
        format!("r = r̲ + 3/m, m = {m}, {increases} increases"),
    ))
}

/// Change of (1/m)∂_r(e^ω φ) at a family-1 point of the family-0 solution
/// when r̲ moves by d/m, as (measured, predicted −d/(4r̲²)).
pub fn dislocation_change(m: u32, d: f64) -> Result<(f64, f64)> {
    let rmu = roots().r_mu;
    let q = (rmu, PI / m as f64);
    let dfun = |rb: f64| -> Result<f64> {
        let s = build_ld(Some(SingularLattice::new(0, rb, m)?), None, 1.0, 0.0, DEFAULT_MODES)?;
        let h = 1e-4 / m as f64;
        Ok((s.weighted(q.0 + h, q.1, None)? - s.weighted(q.0 - h, q.1, None)?) / (2.0 * h) / m as f64)
    };
    Ok((dfun(rmu + d / m as f64)? - dfun(rmu)?, -d / (4.0 * rmu * rmu)))
}

fn ld_dislocation(_: &Context) -> Result<Outcome> {
    let (a64, p) = dislocation_change(64, 0.5)?;
    let (a128, _) = dislocation_change(128, 0.5)?;
    let (e64, e128) = (rel(a64, p), rel(a128, p));
    Ok(Outcome::holds(
        e64 < 0.25 && e128 <= e64,
        e64,
        "< 0.25 at m = 64 and smaller at m = 128",
        format!("Δr̲ = 1/2: relative deviation {e64:.4} (m = 64), {e128:.4} (m = 128)"),
    ))
}

// ---------------------------------------------------------------- balance

fn balance_signature(_: &Context) -> Result<Outcome> {
    let cases = [(0, 0u8), (2, 1), (1, 1), (-1, 0), (-2, 1), (3, 0)];
    let bad = cases.iter().filter(|&&(l, want)| sgn_interface(l) != want).count();
    Ok(Outcome::holds(bad == 0, bad as f64, "= 0", "mismatches among ℓ ∈ {0, 1, ½, −½, −1, 3/2}"))
}

fn balance_derived_origin(_: &Context) -> Result<Outcome> {
    let m = 32;
    let dp = derive_params(&ParamVector::zero(1)?, m)?;
    let mut worst = rel(dp.tau_ell[0], (-dp.phi_j).exp() / m as f64).max(dp.h_ell[0].abs());
    let dp = derive_params(&ParamVector::zero(2)?, m)?;
    worst = worst.max(rel(dp.tau_ell[0], dp.tau_ell[1]));
    worst = worst.max(rel(dp.h_ell[1], dp.tau_ell[0] * dp.phi_j / 2.0)).max(rel(dp.h_ell[0], -dp.h_ell[1]));
    let dp = derive_params(&ParamVector::zero(5)?, m)?;
    for r in &dp.r_ell {
        worst = worst.max(rel(*r, roots().r_mu));
    }
    Ok(Outcome::below(worst, 1e-13, "τ₀ = e^{−φ_J}/m, h₀ = 0, h_{½} = τφ_J/2, r_ℓ = r_mu"))
}

fn balance_antisymmetry(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for tj in 1..=6u32 {
        let dp = derive_params(&ParamVector::zero(tj)?, 64)?;
        for (i, &l) in dp.two_ell.iter().enumerate() {
            let j = dp.two_ell.iter().position(|&x| x == -l).expect("interfaces are symmetric");
            worst = worst.max((dp.h_ell[i] + dp.h_ell[j]).abs() / dp.tau_ell[i]);
            worst = worst.max(rel(dp.tau_ell[i], dp.tau_ell[j])).max((dp.r_ell[i] - dp.r_ell[j]).abs());
        }
    }
    Ok(Outcome::below(worst, 1e-13, "h_ℓ + h_{−ℓ}, τ_ℓ − τ_{−ℓ}, r_ℓ − r_{−ℓ} at pv = 0, 2J ≤ 6"))
}

fn balance_toeplitz(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for n in 1..=20 {
        let e = toeplitz_eigs(n)?;
        worst = worst.max(e.residual);
        for (a, b) in e.values.iter().zip(&e.brute_values) {
            worst = worst.max((a - b).abs());
        }
    }
    let e5 = toeplitz_eigs(5)?;
    let positive = e5.vectors[0].iter().all(|&v| v > 0.0);
    Ok(Outcome::holds(worst < 1e-10 && positive, worst, "< 1e-10 and a positive top eigenvector", "‖Tv − λv‖ and brute-force agreement, N ≤ 20"))
}

fn balance_trig(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for tj in 1..=20u32 {
        let mut two_j = -(tj as i32) + 2;
        while two_j <= tj as i32 {
            worst = worst.max(trig_balance_check(tj, two_j));
            two_j += 2;
        }
    }
    Ok(Outcome::below(worst, 1e-12, "all J ≤ 10 and j ∈ {−J+1, …, J}"))
}

fn balance_az(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut cond = 0.0f64;
    for tj in 1..=5u32 {
        let z = assemble_z(tj)?;
        cond = cond.max(z.condition);
        let n = z.a.len();
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| z.a[i][k] * z.z[k][j]).sum();
                worst = worst.max((s - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    Ok(Outcome::below(worst, 1e-12, format!("2J ≤ 5; largest condition number {cond:.3e}")))
}

fn sample_pv(tj: u32, seed: usize) -> Result<ParamVector> {
    let v: Vec<f64> = (0..2 * tj as usize).map(|i| (((i + seed) * 7 + 3) % 11) as f64 / 5.0 - 1.0).collect();
    ParamVector::from_flat(tj, &v)
}

fn balance_predicted_linearity(_: &Context) -> Result<Outcome> {
    let mut worst = predicted_mismatch(&ParamVector::zero(3)?).to_flat().iter().map(|v| v.abs()).fold(0.0, f64::max);
    for tj in 1..=5u32 {
        let a = sample_pv(tj, 0)?;
        let b = sample_pv(tj, 4)?;
        let sum: Vec<f64> = a.to_flat().iter().zip(b.to_flat()).map(|(x, y)| x + 2.0 * y).collect();
        let fab = predicted_mismatch(&ParamVector::from_flat(tj, &sum)?).to_flat();
        let (fa, fb) = (predicted_mismatch(&a).to_flat(), predicted_mismatch(&b).to_flat());
        for i in 0..fab.len() {
            worst = worst.max((fab[i] - fa[i] - 2.0 * fb[i]).abs());
        }
    }
    Ok(Outcome::below(worst, 1e-14, "F(a + 2b) − F(a) − 2F(b) and F(0)"))
}

fn balance_pairs(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for tj in 1..=5u32 {
        let pv = sample_pv(tj, 0)?;
        let all = predicted_all_levels(&pv);
        let get = |two_j: i32, s: Side| all.iter().find(|(k, _)| *k == (two_j, s)).map(|(_, v)| *v);
        let mut two_j = tj as i32;
        while two_j >= 2 {
            if let (Some(a), Some(b)) = (get(two_j, Side::Plus), get(two_j - 2, Side::Minus)) {
                worst = worst.max((a + b + 2.0 * pv.kappa_at(two_j - 1).0).abs());
            }
            two_j -= 2;
        }
    }
    Ok(Outcome::below(worst, 1e-13, "ν_{j,+} + ν_{j−1,−} + 2κ⊥_{j−½}"))
}

fn newton_check(ctx: &Context, tj: u32, m: u32, max_iters: usize) -> Result<Outcome> {
    let n = ctx.newton(tj, m)?;
    let (rep, secs) = (&n.0, n.1);
    let res = *rep.history.last().expect("history is never empty");
    let iters = rep.history.len() - 1;
    let (zn, kn) = rep.pv.norms();
    let ok = res < ctx.opts.tol && iters <= max_iters && zn.max(kn) <= DEFAULT_C1 && secs < 300.0;
    Ok(Outcome::holds(
        ok,
        res,
        &format!("< {:e} in ≤ {max_iters} iterations, |pv*| ≤ 50, < 300 s", ctx.opts.tol),
        format!("{iters} iterations, |pv*| = ({zn:.4}, {kn:.4}), {secs:.1} s"),
    ))
}

fn balance_newton_half_64(ctx: &Context) -> Result<Outcome> {
    newton_check(ctx, 1, 64, 12)
}

fn balance_newton_one_64(ctx: &Context) -> Result<Outcome> {
    newton_check(ctx, 2, 64, 20)
}

fn balance_newton_three_halves_96(ctx: &Context) -> Result<Outcome> {
    newton_check(ctx, 3, 96, 20)
}

fn balance_history(ctx: &Context) -> Result<Outcome> {
    let mut worst = f64::NEG_INFINITY;
    for (tj, m) in [(1, 64), (2, 64), (3, 96)] {
        let h = &ctx.newton(tj, m)?.0.history;
        for w in h.windows(2).skip(2) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    let worst = if worst == f64::NEG_INFINITY { -1.0 } else { worst };
    Ok(Outcome::below(worst, 0.0, "largest residual increase after iteration 2"))
}

fn balance_idempotent(ctx: &Context) -> Result<Outcome> {
    let n = ctx.newton(1, 64)?;
    let again = newton_solve(64, n.0.pv.clone(), ctx.newton_options())?;
    let iters = again.history.len() - 1;
    Ok(Outcome::holds(iters <= 1, iters as f64, "≤ 1", format!("residual {:e}", again.history.last().unwrap())))
}

fn balance_kappa_zero(ctx: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for (tj, m) in [(1, 64), (2, 64)] {
        let pv = &ctx.newton(tj, m)?.0.pv;
        let (a, b) = pv.kappa_at(0);
        worst = worst.max(a.abs()).max(b.abs());
        for l in 1..tj as i32 {
            let (p, q) = (pv.kappa_at(l), pv.kappa_at(-l));
            worst = worst.max((p.0 + q.0).abs()).max((p.1 + q.1).abs());
        }
    }
    Ok(Outcome::holds(worst == 0.0, worst, "= 0", "κ₀ and κ_ℓ + κ_{−ℓ} in the converged output"))
}

fn balance_consistency(ctx: &Context) -> Result<Outcome> {
    let mut gaps = Vec::new();
    let mut growth = 0.0f64;
    for m in [64u32, 128] {
        let mut gap = 0.0f64;
        for tj in [1u32, 2] {
            let v: Vec<f64> = (0..2 * tj as usize).map(|i| 0.5 - 0.3 * i as f64).collect();
            let eval = |k: f64| -> Result<(Vec<f64>, Vec<f64>)> {
                let pv = ParamVector::from_flat(tj, &v.iter().map(|x| x * k).collect::<Vec<_>>())?;
                let dp = derive_params(&pv, m)?;
                Ok((actual_mismatch(&pv, &dp, ctx.opts.n_modes)?.values.to_flat(), predicted_mismatch(&pv).to_flat()))
            };
            let (a0, _) = eval(0.0)?;
            let (a1, p1) = eval(1.0)?;
            let (a2, p2) = eval(2.0)?;
            for i in 0..a0.len() {
                gap = gap.max((a1[i] - p1[i]).abs());
                // the change under pv → 2pv follows the prediction
                let (da, dpred) = (a2[i] - a1[i], p2[i] - p1[i]);
                if dpred.abs() > 0.0 {
                    growth = growth.max(rel(da, dpred));
                }
            }
        }
        gaps.push(gap);
    }
    let ok = gaps[1] <= 1.1 * gaps[0] && growth < 0.05;
    Ok(Outcome::holds(
        ok,
        gaps[1] / gaps[0],
        "≤ 1.1 (gap bounded as m doubles) with growth deviation < 5%",
        format!("gaps {gaps:?}, growth deviation {growth:.4}"),
    ))
}

// ---------------------------------------------------------------- geometry

fn geometry_weight(_: &Context) -> Result<Outcome> {
    let a = gaussian_weight(AmbientPoint::new(0.0, 0.0, 0.0)?).0.abs();
    let b = (gaussian_weight(AmbientPoint::new(0.0, 2.0, 0.0)?).0 + 0.5).abs();
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    let w1 = gaussian_weight(AmbientPoint::new(1.2, 0.5, 0.3)?).0;
    let w2 = gaussian_weight(AmbientPoint::new(1.2 * c - 0.5 * s, 1.2 * s + 0.5 * c, 0.3)?).0;
    let worst = a.max(b).max((w1 - w2).abs());
    Ok(Outcome::below(worst, 1e-15, "ω(0) = 0, ω at |x| = 2 is −½, rotation invariance"))
}

fn geometry_fermi_identity(_: &Context) -> Result<Outcome> {
    let p = fermi_map([0.7, -0.2], [0.0, 0.0], 0.0)?;
    let mut worst = (p.x1 - 0.7).abs().max((p.x2 + 0.2).abs()).max(p.z.abs());
    for z in [-1.0, 0.3, 2.0] {
        let q = fermi_map([0.0, 0.0], [0.0, 0.0], z)?;
        worst = worst.max(q.x1.abs()).max(q.x2.abs());
    }
    Ok(Outcome::holds(worst == 0.0, worst, "= 0", "v = 0, z = 0 is the identity; the z-axis is invariant"))
}

fn geometry_fermi_drift(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for i in 0..20 {
        let t = i as f64;
        let p = [1.5 * (0.7 * t).cos(), 1.5 * (0.7 * t).sin() * 0.8];
        let v = [0.3 * (1.3 * t).sin(), 0.25 * (0.4 * t).cos()];
        let z = 0.4 * (0.9 * t).sin();
        worst = worst.max(fermi_map_detailed(p, v, z)?.speed_drift);
    }
    Ok(Outcome::below(worst, 1e-8, "relative change of the g_Shr speed along both legs"))
}

fn geometry_geodesic_cubic(_: &Context) -> Result<Outcome> {
    let bases = [[0.0, 0.0], [0.5, 0.0], [1.0, 0.7], [-1.5, 0.4], [0.3, -2.0]];
    let mut worst_spread = 0.0f64;
    let mut worst = 0.0f64;
    for p in bases {
        let w: f64 = -(p[0] * p[0] + p[1] * p[1]) / 8.0;
        let ratios: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&s| Ok(((w.exp() * fermi_map(p, [0.0, 0.0], s)?.z - s) / (s * s * s)).abs()))
            .collect::<Result<_>>()?;
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        worst = worst.max(hi);
        worst_spread = worst_spread.max(hi / lo);
    }
    Ok(Outcome::holds(
        worst < 1.0 && worst_spread < 1.5,
        worst,
        "< 1 with max/min over s below 1.5",
        format!("|e^ω Z_s − s|/s³, s = 0.2 … 0.025 at 5 base points; spread {worst_spread:.4}"),
    ))
}

fn geometry_catenoid(_: &Context) -> Result<Outcome> {
    let rho_max = 6.0 * 1e-3f64.powf(0.2);
    let b = BridgeSpec::new([1.2, 0.5], 1e-3, 0.0, 0.0, 0.0, rho_max)?;
    let mut worst = 0.0f64;
    for i in 0..8 {
        let m = b.model(0.0, 0.7 * i as f64);
        worst = worst.max((m[0].hypot(m[1]) - 1e-3).abs()).max(m[2].abs());
    }
    let b2 = BridgeSpec::new([1.2, 0.5], 1e-3, 2e-3, 0.0, 0.0, rho_max)?;
    for s in [-1.0, 0.3, 1.7] {
        worst = worst.max((b2.model(s, 0.4)[2] - (1e-3 * s + 2e-3)).abs());
    }
    // the Fermi image of the waist stays at g_Shr-distance τ from p to first order
    let p = catenoid_point(&b, 0.0, 0.3)?;
    let conf = (-(1.2f64 * 1.2 + 0.25) / 8.0).exp();
    let d = ((p.x1 - 1.2).hypot(p.x2 - 0.5) * conf - 1e-3).abs() / 1e-3;
    let ok = worst < 1e-17 && d < 1e-3;
    Ok(Outcome::holds(ok, worst, "< 1e-17 and waist image within 0.1%", format!("waist radius relative error {d:e}")))
}

fn geometry_curvature_models(_: &Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for (x, y) in [(0.3, -1.0), (2.0, 5.0)] {
        worst = worst.max(graph_weighted_mean_curvature(|_, _| Ok(0.0), x, y, 0.01)?.h2w.abs());
    }
    let sphere = |t: f64, p: f64| Ok([2.0 * t.sin() * p.cos(), 2.0 * t.sin() * p.sin(), 2.0 * t.cos()]);
    for (t, p) in [(0.7, 0.2), (1.9, -2.5), (1.2, 3.0)] {
        worst = worst.max(weighted_mean_curvature(&sphere, t, p, 1e-3)?.h2w.abs());
    }
    let cat = |s: f64, t: f64| Ok([3.0 + s.cosh() * t.cos(), -2.0 + s.cosh() * t.sin(), 1.0 + s]);
    for (s, t) in [(0.4, 0.1), (-1.2, 2.2)] {
        let c = weighted_mean_curvature(&cat, s, t, 1e-3)?;
        worst = worst.max((c.h2w - 0.5 * c.x_dot_nu).abs());
    }
    Ok(Outcome::below(worst, 1e-8, "plane and radius-2 sphere: H^{2ω} = 0; catenoid: H^{2ω} = ½X·ν"))
}

/// sup |defect| / (m³τ³/r²) over 3τ ≤ r ≤ min(4τ^α, 1) on both sheets of
/// the first bridge of every interface of the converged configuration.
pub fn tilted_expansion_ratio(ctx: &Context, tj: u32, m: u32) -> Result<f64> {
    let n = ctx.newton(tj, m)?;
    let dp = derive_params_alpha(&n.0.pv, m, ctx.opts.alpha)?;
    let mut worst = 0.0f64;
    for (i, &l) in dp.two_ell.iter().enumerate() {
        let (pr, pt) = dp.lattice(l)?.point(0);
        let (kp, k) = n.0.pv.kappa_at(l);
        let tau = dp.tau_ell[i];
        let hi = (4.0 * tau.powf(ctx.opts.alpha)).min(1.0);
        let b = BridgeSpec::new([pr * pt.cos(), pr * pt.sin()], tau, dp.h_ell[i], k, kp, 1.5 * hi)?;
        let scale = (m as f64 * tau).powi(3);
        for sgn in [1.0, -1.0] {
            for a in 0..24 {
                let r = 3.0 * tau * (hi / (3.0 * tau)).powf(a as f64 / 23.0);
                let s = sgn * (r / tau).acosh();
                for t in 0..8 {
                    let th = 2.0 * PI * (t as f64 + 0.5) / 8.0;
                    let (rr, d) = graph_expansion_defect(&b, s, th)?;
                    worst = worst.max(d.abs() * rr * rr / scale);
                }
            }
        }
    }
    Ok(worst)
}

fn geometry_tilted_expansion(ctx: &Context) -> Result<Outcome> {
    let mut vals = Vec::new();
    for (tj, m) in [(2u32, 16u32), (2, 32), (1, 32), (2, 64)] {
        vals.push(tilted_expansion_ratio(ctx, tj, m)?);
    }
    let worst = vals.iter().cloned().fold(0.0, f64::max);
    Ok(Outcome::below(worst, BOUND_C, format!("ratios for (2J, m) = (2,16), (2,32), (1,32), (2,64): {vals:?}")))
}

fn topology_check(ctx: &Context, tj: u32, m: u32) -> Result<Outcome> {
    let s = ctx.surface(tj, m)?;
    let mesh = build_initial_surface(&s, ctx.opts.resolution)?;
    let t = mesh.topology();
    let want_genus = (tj * (m - 1)) as f64;
    let want_loops = tj as usize + 1;
    let sym = mesh.symmetry_defects().iter().map(|d| d.hausdorff).fold(0.0, f64::max);
    let count_ok = t.vertices == mesh.layout.expected_vertex_count(&s);
    let (order, orbits) = mesh.orbit_sizes(7);
    let orbits_ok = order == 4 * m as usize && orbits.iter().all(|&o| order % o == 0);
    let ok = t.genus == want_genus
        && t.boundary_loops == want_loops
        && t.watertight
        && t.consistently_oriented
        && t.components == 1
        && sym <= 1e-9
        && count_ok
        && orbits_ok;
    Ok(Outcome::holds(
        ok,
        t.genus,
        &format!("genus {want_genus}, {want_loops} boundary loops, symmetry ≤ 1e-9"),
        format!(
            "{:?} mode, V = {}, χ = {}, loops {}, watertight {}, oriented {}, symmetry {sym:.2e}, orbits {orbits:?} of {order}",
            s.mode, t.vertices, t.euler, t.boundary_loops, t.watertight, t.consistently_oriented
        ),
    ))
}

fn geometry_topology_half_8(ctx: &Context) -> Result<Outcome> {
    topology_check(ctx, 1, 8)
}

fn geometry_topology_one_8(ctx: &Context) -> Result<Outcome> {
    topology_check(ctx, 2, 8)
}

fn geometry_topology_three_halves_6(ctx: &Context) -> Result<Outcome> {
    topology_check(ctx, 3, 6)
}

fn geometry_ply_deterministic(ctx: &Context) -> Result<Outcome> {
    let s = ctx.surface(1, 8)?;
    let mut a = Vec::new();
    build_initial_surface(&s, ctx.opts.resolution)?.write_ply(&mut a, &[])?;
    let s2 = InitialSurface::new(&s.pv, &s.derived, ctx.opts.n_modes)?;
    let mut b = Vec::new();
    build_initial_surface(&s2, ctx.opts.resolution)?.write_ply(&mut b, &[])?;
    let same = a == b;
    Ok(Outcome::holds(same, a.len() as f64, "byte-identical", "PLY bytes of two independent builds at (½, 8)"))
}

fn geometry_residual_graph(ctx: &Context) -> Result<Outcome> {
    let a32 = ctx.residual(1, 32)?.region(Region::Graph).sup_abs;
    let a64 = ctx.residual(1, 64)?.region(Region::Graph).sup_abs;
    Ok(Outcome::below(a64 / a32, 1.0, format!("sup |H^{{2ω}}| on graph regions: {a32:e} (m = 32), {a64:e} (m = 64)")))
}

fn geometry_residual_bridge(ctx: &Context) -> Result<Outcome> {
    let b32 = ctx.residual(1, 32)?.region(Region::BridgeCore).sup_normalized;
    let b64 = ctx.residual(1, 64)?.region(Region::BridgeCore).sup_normalized;
    Ok(Outcome::below(b32.max(b64), BOUND_C, format!("sup ρ²|H^{{2ω}}| / ρ²(|z| + τ): {b32:.4} (m = 32), {b64:.4} (m = 64)")))
}

fn geometry_residual_gluing(ctx: &Context) -> Result<Outcome> {
    let r = ctx.residual(1, 64)?;
    let g = r.region(Region::GluingAnnulus);
    Ok(Outcome::below(
        g.sup_normalized,
        BOUND_C,
        format!("sup d²|H^{{2ω}}| / τ^{{1+α}} at m = 64; raw sup |H^{{2ω}}| = {:e}", g.sup_abs),
    ))
}

/// sup over the blend annulus of |φ_rest − φ_cat| / τ^{1+α}.
pub fn overlap_ratio(s: &InitialSurface) -> Result<f64> {
    let mut worst = 0.0f64;
    for lev in &s.levels {
        for sd in &lev.sides {
            let it = s.interface(sd.two_ell)?;
            let b = &it.bridges[0];
            for f in [2.0, 2.5, 3.0] {
                for k in 0..8 {
                    let a = 2.0 * PI * (k as f64 + 0.5) / 8.0;
                    let x = [b.p[0] + f * it.delta_prime * a.cos(), b.p[1] + f * it.delta_prime * a.sin()];
                    let cat = catenoid_graph(b, x, sd.side == Side::Plus)?.0;
                    let rest = s.phi_rest(lev.two_j, x[0], x[1])?;
                    worst = worst.max((cat - rest).abs() / it.tau.powf(1.0 + s.derived.alpha));
                }
            }
        }
    }
    Ok(worst)
}

fn geometry_overlap(ctx: &Context) -> Result<Outcome> {
    let s = ctx.surface(1, 64)?;
    if s.mode != GeometryMode::Glued {
        return Err(Error::Domain("(½, 64) is expected to be glued".into()));
    }
    Ok(Outcome::below(overlap_ratio(&s)?, BOUND_C, "sup |φ_rest − φ_cat| / τ^{1+α} on D_p(3δ′) ∖ D_p(2δ′), (½, 64)"))
}

fn geometry_cone_slopes(ctx: &Context) -> Result<Outcome> {
    let s = ctx.surface(2, 64)?;
    let cs = cone_slopes(&s)?;
    let worst = cs.iter().filter(|c| c.closed_form != 0.0).map(|c| c.rel_diff).fold(0.0, f64::max);
    let anti = {
        let get = |j: i32| cs.iter().find(|c| c.two_j == j).map(|c| c.closed_form).unwrap_or(f64::NAN);
        (get(2) + get(-2)).abs() / get(2).abs()
    };
    let table: Vec<String> = cs.iter().map(|c| format!("2j={}: {:.6e}/{:.6e}", c.two_j, c.closed_form, c.numeric)).collect();
    Ok(Outcome::holds(
        worst < 0.02 && anti < 1e-9,
        worst,
        "< 0.02 at every level with slope_{−j} = −slope_j",
        format!("closed/numeric {}; antisymmetry {anti:e}", table.join(", ")),
    ))
}

fn geometry_cone_middle(ctx: &Context) -> Result<Outcome> {
    let s = ctx.surface(2, 64)?;
    let cs = cone_slopes(&s)?;
    let mid = cs.iter().find(|c| c.two_j == 0).ok_or_else(|| Error::Domain("no middle level".into()))?;
    let worst = mid.closed_form.abs().max(mid.numeric.abs());
    Ok(Outcome::below(worst, 1e-9, "|slope_0|, closed form and numeric, (1, 64)"))
}

fn geometry_far_slope(ctx: &Context) -> Result<Outcome> {
    let s = ctx.surface(2, 64)?;
    let cs = cone_slopes(&s)?;
    let mut worst = 0.0f64;
    for c in cs.iter().filter(|c| c.closed_form != 0.0) {
        let v = s.phi_gl(c.two_j, 100.0 * 0.3f64.cos(), 100.0 * 0.3f64.sin())? / 100.0;
        worst = worst.max(rel(v, c.closed_form));
    }
    Ok(Outcome::below(worst, 1e-2, "φ^gl_j(100, θ)/100 vs the closed-form cone slope, (1, 64)"))
}

fn geometry_embeddedness(ctx: &Context) -> Result<Outcome> {
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for (tj, m) in [(1u32, 64u32), (2, 64), (1, 8)] {
        let s = ctx.surface(tj, m)?;
        if s.mode != GeometryMode::Glued {
            continue;
        }
        let mut pts = Vec::new();
        for i in 0..60 {
            let r = 0.2 + 3.6 * i as f64 / 59.0;
            for k in 0..9 {
                let th = PI / s.m as f64 * k as f64 / 8.0;
                pts.push((r * th.cos(), r * th.sin()));
            }
        }
        let bound = 16.0 / 9.0 * s.tau_max();
        for (lo, g) in level_gaps(&s, &pts)? {
            worst = worst.min(g / bound);
            parts.push(format!("({tj}/2, {m}) levels 2j = {lo}, {}: gap {g:.3e} vs {bound:.3e}", lo + 2));
        }
    }
    Ok(Outcome::above(worst, 1.0, format!("min gap / ((16/9)τ_max): {}", parts.join("; "))))
}
