//! Gaussian weight, conformal Christoffel symbols and the Fermi exponential
//! map of the plane z = 0 in (ℝ³, g_Shr = e^{2ω} g_Euc).

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AmbientPoint {
    pub x1: f64,
    pub x2: f64,
    pub z: f64,
}

impl AmbientPoint {
    pub fn new(x1: f64, x2: f64, z: f64) -> Result<Self> {
        if !(x1.is_finite() && x2.is_finite() && z.is_finite()) {
            return Err(Error::Domain(format!("non-finite point ({x1}, {x2}, {z})")));
        }
        Ok(AmbientPoint { x1, x2, z })
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        AmbientPoint { x1: a[0], x2: a[1], z: a[2] }
    }
}

/// ω = −|x|²/8 and ∇ω = −x/4.
pub fn gaussian_weight(pt: AmbientPoint) -> (f64, [f64; 3]) {
    let x = pt.to_array();
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    (-r2 / 8.0, [-x[0] / 4.0, -x[1] / 4.0, -x[2] / 4.0])
}

/// Γ^k_{ij} = δ^k_i ∂_jω + δ^k_j ∂_iω − δ_{ij} ∂_kω, indexed [k][i][j].
pub fn christoffel(pt: AmbientPoint) -> [[[f64; 3]; 3]; 3] {
    let (_, dw) = gaussian_weight(pt);
    let mut g = [[[0.0; 3]; 3]; 3];
    for (k, gk) in g.iter_mut().enumerate() {
        for (i, gki) in gk.iter_mut().enumerate() {
            for (j, v) in gki.iter_mut().enumerate() {
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                *v = d(k, i) * dw[j] + d(k, j) * dw[i] - d(i, j) * dw[k];
            }
        }
    }
    g
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// ẍ = −Γ(ẋ, ẋ) = −2(∇ω·ẋ)ẋ + |ẋ|²∇ω at x = base + y.
fn accel(base: [f64; 3], y: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    let g = [-(base[0] + y[0]) / 4.0, -(base[1] + y[1]) / 4.0, -(base[2] + y[2]) / 4.0];
    let gv = dot(g, v);
    let vv = dot(v, v);
    [-2.0 * gv * v[0] + vv * g[0], -2.0 * gv * v[1] + vv * g[1], -2.0 * gv * v[2] + vv * g[2]]
}

fn g_speed(base: [f64; 3], y: [f64; 3], v: [f64; 3]) -> f64 {
    let x = [base[0] + y[0], base[1] + y[1], base[2] + y[2]];
    (-dot(x, x) / 8.0).exp() * dot(v, v).sqrt()
}

/// RK4 on the offset y = x − base over t ∈ [0, 1]; the offset keeps full
/// relative precision even when it is far below the size of `base`.
fn rk4_leg(base: [f64; 3], y0: [f64; 3], v0: [f64; 3], steps: usize) -> ([f64; 3], [f64; 3]) {
    let h = 1.0 / steps as f64;
    let (mut y, mut v) = (y0, v0);
    let ax = |a: [f64; 3], b: [f64; 3], k: f64| [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]];
    for _ in 0..steps {
        let k1y = v;
        let k1v = accel(base, y, v);
        let k2y = ax(v, k1v, h / 2.0);
        let k2v = accel(base, ax(y, k1y, h / 2.0), k2y);
        let k3y = ax(v, k2v, h / 2.0);
        let k3v = accel(base, ax(y, k2y, h / 2.0), k3y);
        let k4y = ax(v, k3v, h);
        let k4v = accel(base, ax(y, k3y, h), k4y);
        for i in 0..3 {
            y[i] += h / 6.0 * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }
    (y, v)
}

pub const FERMI_STEPS: usize = 64;
pub const FERMI_MAX_STEPS: usize = 4096;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FermiResult {
    pub point: AmbientPoint,
    /// Image minus p, accurate relative to its own size.
    pub offset: [f64; 3],
    /// Largest relative change of the g_Shr speed over either leg.
    pub speed_drift: f64,
    /// |y_n − y_{n/2}| / 15 at the final step count n; the returned point is
    /// the extrapolated one.
    pub richardson_err: f64,
}

fn fermi_legs(p: [f64; 2], v: [f64; 2], z: f64, steps: usize) -> ([f64; 3], f64) {
    let base = [p[0], p[1], 0.0];
    let v0 = [v[0], v[1], 0.0];
    let (y1, v1) = rk4_leg(base, [0.0; 3], v0, steps);
    let s0 = g_speed(base, [0.0; 3], v0);
    let drift1 = if s0 > 0.0 { (g_speed(base, y1, v1) - s0).abs() / s0 } else { 0.0 };
    // ω(p) − ω(q) = (2p·y + |y|²)/8 keeps the normal speed exact for tiny legs
    let dw = (2.0 * (p[0] * y1[0] + p[1] * y1[1]) + dot(y1, y1)) / 8.0;
    let w0 = (p[0] * p[0] + p[1] * p[1]) / 8.0 + dw;
    let vz = [0.0, 0.0, z * w0.exp()];
    let (y2, v2) = rk4_leg(base, y1, vz, steps);
    let s1 = g_speed(base, y1, vz);
    let drift2 = if s1 > 0.0 { (g_speed(base, y2, v2) - s1).abs() / s1 } else { 0.0 };
    (y2, drift1.max(drift2))
}

/// Fermi exponential map: the in-plane geodesic exp_p(v) (v a tangent
/// vector, parameter 1), then the unit-speed normal g_Shr-geodesic for
/// signed length z.
pub fn fermi_map_detailed(p: [f64; 2], v: [f64; 2], z: f64) -> Result<FermiResult> {
    if !(p.iter().chain(&v).all(|x| x.is_finite()) && z.is_finite()) {
        return Err(Error::Domain("non-finite Fermi-map input".into()));
    }
    let scale = v[0].hypot(v[1]) + z.abs();
    let mut steps = FERMI_STEPS;
    let (mut yc, _) = fermi_legs(p, v, z, steps / 2);
    let (y, drift, err) = loop {
        let (y, drift) = fermi_legs(p, v, z, steps);
        let err = ((y[0] - yc[0]).powi(2) + (y[1] - yc[1]).powi(2) + (y[2] - yc[2]).powi(2)).sqrt() / 15.0;
        if !(y.iter().all(|c| c.is_finite())) {
            return Err(Error::StepUnderflow(err));
        }
        if err <= 1e-6 * scale.max(1e-300) {
            break (y, drift, err);
        }
        // long legs only: refine until the Richardson estimate is met
        if steps >= FERMI_MAX_STEPS {
            return Err(Error::StepUnderflow(err));
        }
        yc = y;
        steps *= 2;
    };
    let y = [0, 1, 2].map(|i| y[i] + (y[i] - yc[i]) / 15.0);
    Ok(FermiResult {
        point: AmbientPoint { x1: p[0] + y[0], x2: p[1] + y[1], z: y[2] },
        offset: y,
        speed_drift: drift,
        richardson_err: err,
    })
}

pub fn fermi_map(p: [f64; 2], v: [f64; 2], z: f64) -> Result<AmbientPoint> {
    Ok(fermi_map_detailed(p, v, z)?.point)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        assert_eq!(gaussian_weight(AmbientPoint::new(0.0, 0.0, 0.0).unwrap()).0, 0.0);
        let (w, _) = gaussian_weight(AmbientPoint::new(0.0, 2.0, 0.0).unwrap());
        assert!((w + 0.5).abs() < 1e-15);
        let a = gaussian_weight(AmbientPoint::new(1.2, 0.5, 0.0).unwrap()).0;
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let b = gaussian_weight(AmbientPoint::new(1.2 * c - 0.5 * s, 1.2 * s + 0.5 * c, 0.0).unwrap()).0;
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn christoffel_matches_geodesic_acceleration() {
        let pt = AmbientPoint::new(0.4, -1.1, 0.3).unwrap();
        let g = christoffel(pt);
        let v = [0.2, 0.5, -0.9];
        let a = accel(pt.to_array(), [0.0; 3], v);
        for k in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s -= g[k][i][j] * v[i] * v[j];
                }
            }
            assert!((s - a[k]).abs() < 1e-15);
        }
        // Γ^z_zz = ∂_zω
        assert!((g[2][2][2] + 0.3 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn identity_axis_and_speed() {
        let p = fermi_map([0.7, -0.2], [0.0, 0.0], 0.0).unwrap();
        assert_eq!(p.to_array(), [0.7, -0.2, 0.0]);
        for z in [-1.0, 0.3, 2.0] {
            let q = fermi_map([0.0, 0.0], [0.0, 0.0], z).unwrap();
            assert!(q.x1 == 0.0 && q.x2 == 0.0);
        }
        let r = fermi_map_detailed([1.1, 0.4], [0.3, -0.2], 0.25).unwrap();
        assert!(r.speed_drift < 1e-8, "drift {}", r.speed_drift);
        // on the axis the normal leg has g_Shr length ∫₀^z e^{−t²/8} dt = s
        let q = fermi_map_detailed([0.0, 0.0], [0.0, 0.0], 0.5).unwrap().point;
        let s_of = |z: f64| {
            let n = 2000;
            (0..n).map(|i| (-(((i as f64 + 0.5) * z / n as f64).powi(2)) / 8.0).exp() * z / n as f64).sum::<f64>()
        };
        assert!((s_of(q.z) - 0.5).abs() < 1e-8);
    }
}
