//! Weighted mean curvature H^{2ω} = H + ½X·ν by finite differences of
//! smooth parametrizations. Convention: H = ΔX·ν for the patch normal
//! ν ∝ X_u × X_v (the round sphere of radius 2 has H^{2ω} = 0).

use crate::error::{Error, Result};

/// A smooth parametrized surface piece.
pub trait Patch {
    fn eval(&self, u: f64, v: f64) -> Result<[f64; 3]>;
}

impl<F: Fn(f64, f64) -> Result<[f64; 3]>> Patch for F {
    fn eval(&self, u: f64, v: f64) -> Result<[f64; 3]> {
        self(u, v)
    }
}

struct D2 {
    x: [f64; 3],
    du: [f64; 3],
    dv: [f64; 3],
    duu: [f64; 3],
    duv: [f64; 3],
    dvv: [f64; 3],
}

fn stencil<P: Patch + ?Sized>(p: &P, u: f64, v: f64, h: f64) -> Result<D2> {
    let f = |a: f64, b: f64| p.eval(u + a * h, v + b * h);
    let c = f(0.0, 0.0)?;
    let (e, w, n, s) = (f(1.0, 0.0)?, f(-1.0, 0.0)?, f(0.0, 1.0)?, f(0.0, -1.0)?);
    let (ne, nw, se, sw) = (f(1.0, 1.0)?, f(-1.0, 1.0)?, f(1.0, -1.0)?, f(-1.0, -1.0)?);
    let mut d = D2 { x: c, du: [0.0; 3], dv: [0.0; 3], duu: [0.0; 3], duv: [0.0; 3], dvv: [0.0; 3] };
    for i in 0..3 {
        d.du[i] = (e[i] - w[i]) / (2.0 * h);
        d.dv[i] = (n[i] - s[i]) / (2.0 * h);
        d.duu[i] = (e[i] - 2.0 * c[i] + w[i]) / (h * h);
        d.dvv[i] = (n[i] - 2.0 * c[i] + s[i]) / (h * h);
        d.duv[i] = (ne[i] - nw[i] - se[i] + sw[i]) / (4.0 * h * h);
    }
    Ok(d)
}

fn richardson(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [(4.0 * b[0] - a[0]) / 3.0, (4.0 * b[1] - a[1]) / 3.0, (4.0 * b[2] - a[2]) / 3.0]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Clone, Copy, Debug)]
pub struct CurvatureSample {
    pub h: f64,
    pub x_dot_nu: f64,
    pub h2w: f64,
    pub normal: [f64; 3],
}

/// Central differences at steps h and h/2, Richardson-combined.
pub fn weighted_mean_curvature<P: Patch + ?Sized>(patch: &P, u: f64, v: f64, step: f64) -> Result<CurvatureSample> {
    if !(step > 1e-12 * (1.0 + u.abs() + v.abs())) {
        return Err(Error::StepUnderflow(step));
    }
    let a = stencil(patch, u, v, step)?;
    let b = stencil(patch, u, v, step / 2.0)?;
    let du = richardson(a.du, b.du);
    let dv = richardson(a.dv, b.dv);
    let duu = richardson(a.duu, b.duu);
    let duv = richardson(a.duv, b.duv);
    let dvv = richardson(a.dvv, b.dvv);
    let nn = cross(du, dv);
    let norm = dot(nn, nn).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Domain("degenerate parametrization".into()));
    }
    let n = [nn[0] / norm, nn[1] / norm, nn[2] / norm];
    let (e, f, g) = (dot(du, du), dot(du, dv), dot(dv, dv));
    let (l, m, nq) = (dot(duu, n), dot(duv, n), dot(dvv, n));
    let h = (l * g - 2.0 * m * f + nq * e) / (e * g - f * f);
    let xn = dot(b.x, n);
    Ok(CurvatureSample { h, x_dot_nu: xn, h2w: h + 0.5 * xn, normal: n })
}

/// Graph z = φ(x, y) with upward normal, differentiating φ alone so that the
/// small heights are never mixed with the O(1) horizontal coordinates.
pub fn graph_weighted_mean_curvature<F: Fn(f64, f64) -> Result<f64>>(
    phi: F,
    x: f64,
    y: f64,
    step: f64,
) -> Result<CurvatureSample> {
    if !(step > 1e-12 * (1.0 + x.abs() + y.abs())) {
        return Err(Error::StepUnderflow(step));
    }
    let st = |h: f64| -> Result<[f64; 6]> {
        let f = |a: f64, b: f64| phi(x + a * h, y + b * h);
        let c = f(0.0, 0.0)?;
        let (e, w, n, s) = (f(1.0, 0.0)?, f(-1.0, 0.0)?, f(0.0, 1.0)?, f(0.0, -1.0)?);
        let (ne, nw, se, sw) = (f(1.0, 1.0)?, f(-1.0, 1.0)?, f(1.0, -1.0)?, f(-1.0, -1.0)?);
        Ok([
            c,
            (e - w) / (2.0 * h),
            (n - s) / (2.0 * h),
            (e - 2.0 * c + w) / (h * h),
            (ne - nw - se + sw) / (4.0 * h * h),
            (n - 2.0 * c + s) / (h * h),
        ])
    };
    let a = st(step)?;
    let b = st(step / 2.0)?;
    let r = |i: usize| (4.0 * b[i] - a[i]) / 3.0;
    let (f, fx, fy, fxx, fxy, fyy) = (b[0], r(1), r(2), r(3), r(4), r(5));
    let w2 = 1.0 + fx * fx + fy * fy;
    let w = w2.sqrt();
    let h = ((1.0 + fy * fy) * fxx - 2.0 * fx * fy * fxy + (1.0 + fx * fx) * fyy) / (w2 * w);
    let xn = (f - x * fx - y * fy) / w;
    Ok(CurvatureSample { h, x_dot_nu: xn, h2w: h + 0.5 * xn, normal: [-fx / w, -fy / w, 1.0 / w] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::bridge::{bridge_weighted_curvature, catenoid_point, BridgeSpec};

    #[test]
    fn plane_sphere_catenoid() {
        let plane = |_: f64, _: f64| Ok(0.0);
        for (x, y) in [(0.3, -1.0), (2.0, 5.0)] {
            assert_eq!(graph_weighted_mean_curvature(plane, x, y, 0.01).unwrap().h2w, 0.0);
        }
        let sphere = |t: f64, p: f64| Ok([2.0 * t.sin() * p.cos(), 2.0 * t.sin() * p.sin(), 2.0 * t.cos()]);
        for (t, p) in [(0.7, 0.2), (1.9, -2.5), (1.2, 3.0)] {
            let c = weighted_mean_curvature(&sphere, t, p, 1e-3).unwrap();
            assert!(c.h2w.abs() < 1e-8, "{c:?}");
            assert!((c.h.abs() - 1.0).abs() < 1e-8);
        }
        let cat = |s: f64, t: f64| Ok([3.0 + s.cosh() * t.cos(), -2.0 + s.cosh() * t.sin(), 1.0 + s]);
        for (s, t) in [(0.4, 0.1), (-1.2, 2.2)] {
            let c = weighted_mean_curvature(&cat, s, t, 1e-3).unwrap();
            assert!(c.h.abs() < 1e-8);
            assert!((c.h2w - 0.5 * c.x_dot_nu).abs() < 1e-8);
        }
        assert!(weighted_mean_curvature(&sphere, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn bridge_jets_match_finite_differences() {
        let b = BridgeSpec::new([1.3, -0.4], 1e-3, 2e-4, 0.5, -0.8, 0.05).unwrap();
        let patch = |s: f64, t: f64| catenoid_point(&b, s, t).map(|p| p.to_array());
        for (s, t) in [(0.5, 0.3), (-1.1, 2.5), (0.0, -1.0)] {
            let fd = weighted_mean_curvature(&patch, s, t, 0.02).unwrap();
            let jet = bridge_weighted_curvature(&b, s, t).unwrap();
            // same orientation: X_s × X_ϑ in both
            // H and ½X·ν are O(1) each and cancel to O(|z| + τ)
            assert!(jet.h_euc.abs() > 0.1);
            assert!((fd.h2w - jet.h2w).abs() < 1e-5, "fd {:?} jet {:?}", fd, jet);
            assert!((fd.x_dot_nu - jet.x_dot_nu).abs() < 1e-6);
        }
    }
}
