//! Tilted catenoidal bridges pushed through the Fermi map.

use serde::Serialize;

use super::fermi::{fermi_map_detailed, AmbientPoint};
use super::jet::{add3, dot3, partials, scale3, v3_cst, Jet, V3};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BridgeSpec {
    /// Center, Cartesian, in the plane z = 0.
    pub p: [f64; 2],
    pub tau: f64,
    pub h: f64,
    pub kappa: f64,
    pub kappa_perp: f64,
    /// Chart bound: τ cosh s < rho_max (g_Shr-radius in T_p).
    pub rho_max: f64,
}

/// Frame at p: e_r (radial, or e_1 at the origin) and e_θ.
fn frame(p: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let r = p[0].hypot(p[1]);
    let er = if r > 0.0 { [p[0] / r, p[1] / r] } else { [1.0, 0.0] };
    (er, [-er[1], er[0]])
}

impl BridgeSpec {
    pub fn new(p: [f64; 2], tau: f64, h: f64, kappa: f64, kappa_perp: f64, rho_max: f64) -> Result<Self> {
        if !(tau > 0.0 && rho_max > tau) {
            return Err(Error::Domain(format!("bridge needs 0 < τ < ρ_max, got τ = {tau}, ρ_max = {rho_max}")));
        }
        Ok(BridgeSpec { p, tau, h, kappa, kappa_perp, rho_max })
    }

    /// (cos β, sin β) of the tilting rotation, tan β = τκ.
    fn tilt(&self) -> (f64, f64) {
        let t = self.tau * self.kappa;
        let c = 1.0 / (1.0 + t * t).sqrt();
        (c, t * c)
    }

    /// e^{−ω(p)}.
    fn conformal(&self) -> f64 {
        ((self.p[0] * self.p[0] + self.p[1] * self.p[1]) / 8.0).exp()
    }

    pub fn s_max(&self) -> f64 {
        (self.rho_max / self.tau).acosh()
    }

    /// Point of T_pℝ³ in g_Shr|_p-orthonormal (e_r, e_θ, e_z) coordinates:
    /// 𝖱_{τκ}(ρ cos ϑ, ρ sin ϑ, τs + h) + τκ⊥ e_z.
    pub fn model(&self, s: f64, th: f64) -> [f64; 3] {
        let rho = self.tau * s.cosh();
        let m0 = [rho * th.cos(), rho * th.sin(), self.tau * s + self.h];
        let (c, sn) = self.tilt();
        [c * m0[0] - sn * m0[2], m0[1], sn * m0[0] + c * m0[2] + self.tau * self.kappa_perp]
    }

    fn check_s(&self, s: f64) -> Result<()> {
        if !(s.is_finite() && self.tau * s.cosh() < self.rho_max) {
            return Err(Error::Domain(format!("s = {s} outside the bridge chart (τ cosh s < {:e})", self.rho_max)));
        }
        Ok(())
    }

    /// Offset of the bridge point from p, accurate relative to its size.
    pub fn offset(&self, s: f64, th: f64) -> Result<[f64; 3]> {
        self.check_s(s)?;
        let m = self.model(s, th);
        let (er, et) = frame(self.p);
        let k = self.conformal();
        let v = [k * (m[0] * er[0] + m[1] * et[0]), k * (m[0] * er[1] + m[1] * et[1])];
        Ok(fermi_map_detailed(self.p, v, m[2])?.offset)
    }
}

pub fn catenoid_point(spec: &BridgeSpec, s: f64, th: f64) -> Result<AmbientPoint> {
    let o = spec.offset(s, th)?;
    AmbientPoint::new(spec.p[0] + o[0], spec.p[1] + o[1], o[2])
}

/// Height of the upper (s > 0) or lower sheet over the plane point x,
/// with the parameters (s, ϑ) found. Newton on the horizontal components,
/// seeded by the untilted closed form, with the tilted flat-model Jacobian.
pub fn catenoid_graph(spec: &BridgeSpec, x: [f64; 2], upper: bool) -> Result<(f64, f64, f64)> {
    let (er, et) = frame(spec.p);
    let t = [x[0] - spec.p[0], x[1] - spec.p[1]];
    let (a, b) = (t[0] * er[0] + t[1] * er[1], t[0] * et[0] + t[1] * et[1]);
    let lam = spec.conformal();
    let rho0 = a.hypot(b) / lam;
    if !(rho0 > spec.tau) {
        return Err(Error::Domain(format!("point at g_Shr-radius {rho0:e} inside the waist τ = {:e}", spec.tau)));
    }
    let sign = if upper { 1.0 } else { -1.0 };
    let mut s = sign * (rho0 / spec.tau).acosh();
    let mut th = b.atan2(a);
    let (c, sn) = spec.tilt();
    for _ in 0..60 {
        let o = spec.offset(s, th)?;
        let fa = o[0] * er[0] + o[1] * er[1] - a;
        let fb = o[0] * et[0] + o[1] * et[1] - b;
        let rho = spec.tau * s.cosh();
        let rs = spec.tau * s.sinh();
        let j = [
            [lam * (c * rs * th.cos() - sn * spec.tau), -lam * c * rho * th.sin()],
            [lam * rs * th.sin(), lam * rho * th.cos()],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return Err(Error::Domain("bridge not graphical: singular inversion Jacobian".into()));
        }
        let ds = (fa * j[1][1] - fb * j[0][1]) / det;
        let dt = (j[0][0] * fb - j[1][0] * fa) / det;
        s -= ds;
        th -= dt;
        if s * sign <= 0.0 {
            return Err(Error::Domain("bridge not graphical: inversion crossed the waist".into()));
        }
        if ds.abs() + dt.abs() < 1e-13 {
            let o = spec.offset(s, th)?;
            return Ok((o[2], s, th));
        }
    }
    Err(Error::NoConvergence { iters: 60, trace: vec![] })
}

/// Defect of the graph expansion e^{ω}φ^±_cat ∓ τ log(2r/τ) − h − τκ⊥ − τκx̃
/// at the bridge point (s, ϑ). Here r and x̃ are the g_Shr-length and radial
/// component of the model's horizontal part, i.e. of exp_p⁻¹ of the foot
/// point up to the O(z²) drift of the normal leg. Returns (r, defect).
pub fn graph_expansion_defect(spec: &BridgeSpec, s: f64, th: f64) -> Result<(f64, f64)> {
    let mdl = spec.model(s, th);
    let r = mdl[0].hypot(mdl[1]);
    let o = spec.offset(s, th)?;
    let x = [spec.p[0] + o[0], spec.p[1] + o[1]];
    let weight = (-(x[0] * x[0] + x[1] * x[1]) / 8.0).exp();
    let sign = if s > 0.0 { 1.0 } else { -1.0 };
    let lin = spec.tau * (spec.kappa_perp + spec.kappa * mdl[0]);
    Ok((r, weight * o[2] - sign * spec.tau * (2.0 * r / spec.tau).ln() - spec.h - lin))
}

/// Untilted flat-model graph: τ arcosh(ρ/τ) + h.
pub fn phi_cat_model(tau: f64, h: f64, rho: f64, upper: bool) -> f64 {
    let sgn = if upper { 1.0 } else { -1.0 };
    sgn * tau * (rho / tau).acosh() + h
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BridgeCurvature {
    pub s: f64,
    pub theta: f64,
    pub point: [f64; 3],
    /// Euclidean height of the point.
    pub z: f64,
    pub rho: f64,
    pub h_euc: f64,
    pub x_dot_nu: f64,
    pub h2w: f64,
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn lin(a: [f64; 3], ka: f64, b: [f64; 3], kb: f64) -> [f64; 3] {
    [ka * a[0] + kb * b[0], ka * a[1] + kb * b[1], ka * a[2] + kb * b[2]]
}

/// H^{2ω} = H + ½X·ν on a bridge, with H split as (catenoid, exactly 0) plus
/// the perturbation from the Fermi map. The Fermi map is expanded to third
/// order about p (error O(ρ⁴), far below the curvature scale 1/τ on the
/// core), and derivatives are carried by jets, so the cancellation between
/// H ~ −½X·ν = O(1) and the residual O(τ) is resolved.
pub fn bridge_weighted_curvature(spec: &BridgeSpec, s: f64, th: f64) -> Result<BridgeCurvature> {
    spec.check_s(s)?;
    let tau = spec.tau;
    let pr = spec.p[0].hypot(spec.p[1]);
    let ewp = spec.conformal();
    let lam = tau * ewp;
    let (c, sn) = spec.tilt();
    let sj = Jet::var(s, 0);
    let tj = Jet::var(th, 1);
    let ch = sj.cosh();
    let m0 = [ch * tj.cos(), ch * tj.sin(), sj + spec.h / tau];
    // the catenoid in units of τ, g_Shr|_p-orthonormal frame (e_r, e_θ, e_z)
    let bb: V3 = [m0[0] * c - m0[2] * sn, m0[1], m0[0] * sn + m0[2] * c + spec.kappa_perp];
    // third-order Taylor of the two geodesic legs, frame coordinates, p = (pr, 0, 0)
    let zero = Jet::cst(0.0);
    let v: V3 = [bb[0] * lam, bb[1] * lam, zero];
    let zt = bb[2] * tau;
    let g = v3_cst([-pr / 4.0, 0.0, 0.0]);
    let gv = dot3(g, v);
    let vv = dot3(v, v);
    let a = add3(scale3(v, gv * -2.0), scale3(g, vv));
    let ga = dot3(g, a);
    let va = dot3(v, a);
    let b = add3(
        add3(scale3(v, (vv * -0.25 + ga) * -2.0), scale3(a, gv * -2.0)),
        add3(scale3(g, va * 2.0), scale3(v, vv * -0.25)),
    );
    let d = add3(scale3(a, Jet::cst(0.5)), scale3(b, Jet::cst(1.0 / 6.0)));
    let u = add3(v, d);
    let dw = (u[0] * (2.0 * pr) + dot3(u, u)) * 0.125;
    let wz = dw.exp() * ewp;
    let gq = [(u[0] + pr) * -0.25, u[1] * -0.25, u[2] * -0.25];
    let ww = wz * wz;
    let a2 = scale3(gq, ww);
    let b2z = ww * wz * (dot3(gq, gq) * -2.0 + 0.25);
    let zt2 = zt * zt;
    let mut corr = add3(d, scale3(a2, zt2 * 0.5));
    corr[2] = corr[2] + zt * dw.exp_m1() * ewp + b2z * zt2 * zt * (1.0 / 6.0);
    let e = scale3(corr, Jet::cst(1.0 / lam));

    let pb = partials(bb);
    let pe = partials(e);
    let n0v = cross(pb.du, pb.dv);
    let n0n = dot(n0v, n0v).sqrt();
    let dn_v = lin(lin(cross(pb.du, pe.dv), 1.0, cross(pe.du, pb.dv), 1.0), 1.0, cross(pe.du, pe.dv), 1.0);
    let x = (2.0 * dot(n0v, dn_v) + dot(dn_v, dn_v)) / (n0n * n0n);
    let sq = (1.0 + x).sqrt();
    let n0 = lin(n0v, 1.0 / n0n, n0v, 0.0);
    let dn = lin(n0v, -x / (1.0 + sq) / (n0n * sq), dn_v, 1.0 / (n0n * sq));
    let n = lin(n0, 1.0, dn, 1.0);
    let e0 = dot(pb.du, pb.du);
    let g0 = dot(pb.dv, pb.dv);
    let de = 2.0 * dot(pb.du, pe.du) + dot(pe.du, pe.du);
    let dg = 2.0 * dot(pb.dv, pe.dv) + dot(pe.dv, pe.dv);
    let ff = dot(pb.du, pb.dv) + dot(pb.du, pe.dv) + dot(pe.du, pb.dv) + dot(pe.du, pe.dv);
    let l0 = dot(pb.duu, n0);
    let n0c = dot(pb.dvv, n0);
    let dl = dot(pb.duu, dn) + dot(pe.duu, n);
    let dnn = dot(pb.dvv, dn) + dot(pe.dvv, n);
    let mm = dot(pb.duv, n) + dot(pe.duv, n);
    // e₀G₀ + g₀E₀ = 0 for the catenoid; only the perturbation is summed
    let num = l0 * dg + dl * (g0 + dg) + n0c * de + dnn * (e0 + de) - 2.0 * mm * ff;
    let den = (e0 + de) * (g0 + dg) - ff * ff;
    let h_y = num / den;
    let h_euc = h_y / lam;
    let yv = lin(pb.x, 1.0, pe.x, 1.0);
    let x_dot_nu = pr * n[0] + lam * dot(yv, n);
    let (er, et) = frame(spec.p);
    let off = lin(yv, lam, yv, 0.0);
    let point = [
        spec.p[0] + off[0] * er[0] + off[1] * et[0],
        spec.p[1] + off[0] * er[1] + off[1] * et[1],
        off[2],
    ];
    let h2w = h_euc + 0.5 * x_dot_nu;
    if !h2w.is_finite() {
        return Err(Error::Precision("non-finite bridge curvature".into()));
    }
    Ok(BridgeCurvature { s, theta: th, point, z: off[2], rho: tau * s.cosh(), h_euc, x_dot_nu, h2w })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: [f64; 2], tau: f64, h: f64, k: f64, kp: f64) -> BridgeSpec {
        BridgeSpec::new(p, tau, h, k, kp, 6.0 * tau.powf(0.2)).unwrap()
    }

    #[test]
    fn waist_and_linear_height() {
        let b = spec([1.2, 0.5], 1e-3, 0.0, 0.0, 0.0);
        for i in 0..8 {
            let th = i as f64 * 0.7;
            let m = b.model(0.0, th);
            assert!((m[0].hypot(m[1]) - 1e-3).abs() < 1e-18 && m[2] == 0.0);
        }
        let b2 = spec([1.2, 0.5], 1e-3, 2e-3, 0.0, 0.0);
        for s in [-1.0, 0.3, 1.7] {
            assert!((b2.model(s, 0.4)[2] - (1e-3 * s + 2e-3)).abs() < 1e-18);
        }
        // κ = 0 gives the untilted model exactly
        let m = b2.model(0.8, 1.1);
        assert_eq!(m[0], 1e-3 * 0.8f64.cosh() * 1.1f64.cos());
        assert!(catenoid_point(&b, 10.0, 0.0).is_err());
    }

    #[test]
    fn graph_inversion_roundtrip() {
        let b = spec([1.5, 0.0], 2e-4, 1e-4, 0.7, -0.3);
        for (s, th) in [(1.3, 0.2), (-2.0, 2.9), (0.6, -1.4)] {
            let pt = catenoid_point(&b, s, th).unwrap();
            let (z, s2, t2) = catenoid_graph(&b, [pt.x1, pt.x2], s > 0.0).unwrap();
            assert!((s2 - s).abs() < 1e-9 && (t2 - th).abs() < 1e-9, "{s2} {t2}");
            assert!((z - pt.z).abs() < 1e-12 * b.tau);
        }
    }

    #[test]
    fn euclidean_limit_of_the_weighted_curvature() {
        // at p = 0, tiny τ, the bridge is nearly a flat-space catenoid through
        // the origin: H ≈ 0 and X·ν ≈ 0, so H^{2ω} = O(τ)
        let b = spec([0.0, 0.0], 1e-6, 0.0, 0.0, 0.0);
        for s in [-1.0, 0.0, 1.5] {
            let c = bridge_weighted_curvature(&b, s, 0.3).unwrap();
            assert!(c.h2w.abs() < 1e-4, "{c:?}");
        }
    }

    #[test]
    fn taylor_offset_matches_rk4() {
        let b = spec([1.4, 0.3], 3e-5, 1e-5, 0.4, 0.2);
        for (s, th) in [(2.0, 0.1), (-1.0, 2.0)] {
            let c = bridge_weighted_curvature(&b, s, th).unwrap();
            let p = catenoid_point(&b, s, th).unwrap();
            let o = b.offset(s, th).unwrap();
            let rho = b.tau * s.cosh();
            assert!((c.z - o[2]).abs() < 1e-20 + 10.0 * rho.powi(4), "{} {}", c.z, o[2]);
            assert!((c.point[0] - p.x1).abs() < 1e-15 && (c.point[1] - p.x2).abs() < 1e-15);
        }
    }
}
