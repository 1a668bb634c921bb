//! Small numerical kernels shared by the radial, mode and geometry layers:
//! an adaptive Dormand–Prince integrator, Brent's method, quintic Hermite
//! interpolation and the complex dilogarithm.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// How the local error estimate is scaled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ErrScale {
    /// Each component against its own magnitude.
    Component,
    /// Every component against the sup norm of the state. Needed when a
    /// component passes through zero (oscillating or sign-changing solutions).
    Norm,
}

#[derive(Clone, Copy, Debug)]
pub struct Dopri {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
    pub scale: ErrScale,
}

impl Default for Dopri {
    fn default() -> Self {
        Dopri { rtol: 1e-11, atol: 1e-300, h_max: f64::INFINITY, max_steps: 2_000_000, scale: ErrScale::Component }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* for the embedded fourth-order estimate
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl Dopri {
    pub fn with_rtol(rtol: f64) -> Self {
        Dopri { rtol, ..Default::default() }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
    /// `obs` sees every accepted step as `(t, y, f(t, y))`, including the
    /// initial point. `h` carries the step size between calls; pass 0 to let
    /// the integrator choose.
    pub fn integrate<const N: usize, F, O>(
        &self,
        mut f: F,
        t0: f64,
        y0: [f64; N],
        t1: f64,
        h: &mut f64,
        mut obs: O,
    ) -> Result<[f64; N]>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        O: FnMut(f64, &[f64; N], &[f64; N]),
    {
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let span = (t1 - t0).abs();
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        obs(t, &y, &k1);
        if span == 0.0 {
            return Ok(y);
        }
        let mut hh = if *h > 0.0 { *h } else { (span * 1e-3).min(self.h_max) };
        hh = hh.min(self.h_max).min(span);
        let mut steps = 0usize;
        while (t1 - t) * dir > 0.0 {
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::StepUnderflow(t));
            }
            let remaining = (t1 - t).abs();
            let last = hh >= remaining;
            let hs = if last { remaining } else { hh };
            let hd = hs * dir;
            let k2 = f(t + C2 * hd, &axpy(&y, hd, &[(A21, &k1)]));
            let k3 = f(t + C3 * hd, &axpy(&y, hd, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * hd, &axpy(&y, hd, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(t + C5 * hd, &axpy(&y, hd, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(t + hd, &axpy(&y, hd, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let ynew = axpy(&y, hd, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let t_new = if last { t1 } else { t + hd };
            let k7 = f(t_new, &ynew);
            let norm = match self.scale {
                ErrScale::Norm => {
                    let a = y.iter().chain(ynew.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
                    Some(self.atol + self.rtol * a)
                }
                ErrScale::Component => None,
            };
            let mut err = 0.0f64;
            for i in 0..N {
                let e = hd * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = norm.unwrap_or_else(|| self.atol + self.rtol * y[i].abs().max(ynew[i].abs()));
                err = err.max(e.abs() / sc);
            }
            if !err.is_finite() {
                hh *= 0.25;
                if hh < 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::StepUnderflow(t));
                }
                continue;
            }
            if err <= 1.0 {
                t = t_new;
                y = ynew;
                k1 = k7;
                obs(t, &y, &k1);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    hh = (hs * fac).min(self.h_max);
                } else {
                    hh = (hh.max(hs) * fac.min(1.0)).min(self.h_max);
                }
            } else {
                hh = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if hh < 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::StepUnderflow(t));
                }
            }
        }
        *h = hh;
        Ok(y)
    }

    /// Integrates through an ordered list of output points starting at `t0`,
    /// returning the state at each of them.
    pub fn integrate_to_points<const N: usize, F>(
        &self,
        mut f: F,
        t0: f64,
        y0: [f64; N],
        points: &[f64],
    ) -> Result<Vec<[f64; N]>>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let mut out = Vec::with_capacity(points.len());
        let mut t = t0;
        let mut y = y0;
        let mut h = 0.0;
        for &p in points {
            y = self.integrate(&mut f, t, y, p, &mut h, |_, _, _| {})?;
            t = p;
            out.push(y);
        }
        Ok(out)
    }
}

/// Brent's method on a sign-changing bracket. Stops when the bracket is below
/// `xtol` (absolute) or the function vanishes.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64, what: &str) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) || fa * fb > 0.0 {
        return Err(Error::NoBracket { what: what.to_string(), lo, hi });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(xm) };
        fb = f(b);
    }
    Err(Error::Precision(format!("brent did not converge for {what}")))
}

/// Quintic Hermite interpolation on `[x0, x1]` from value, first and second
/// derivative at both ends. Returns value and first derivative.
pub fn hermite5(x0: f64, x1: f64, a: [f64; 3], b: [f64; 3], x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 0.5 * (t3 - 2.0 * t4 + t5);
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let d0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let d1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let d2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
    let d3 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
    let d4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let d5 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    let v = a[0] * h0 + h * a[1] * h1 + h * h * a[2] * h2 + h * h * b[2] * h3 + h * b[1] * h4 + b[0] * h5;
    let dv = (a[0] * d0 + h * a[1] * d1 + h * h * a[2] * d2 + h * h * b[2] * d3 + h * b[1] * d4 + b[0] * d5) / h;
    (v, dv)
}

/// Tabulated smooth function with value, first and second derivative at
/// each node, interpolated by quintic Hermite polynomials.
#[derive(Clone, Debug, Default)]
pub struct HermiteTable {
    pub x: Vec<f64>,
    pub f: Vec<[f64; 3]>,
}

impl HermiteTable {
    /// Nodes must be strictly monotone; they are stored increasing.
    pub fn from_nodes(mut x: Vec<f64>, mut f: Vec<[f64; 3]>) -> Self {
        if x.len() >= 2 && x[0] > x[x.len() - 1] {
            x.reverse();
            f.reverse();
        }
        HermiteTable { x, f }
    }

    pub fn lo(&self) -> f64 {
        self.x[0]
    }

    pub fn hi(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    /// Value and derivative; `None` outside the table.
    pub fn eval(&self, x: f64) -> Option<(f64, f64)> {
        let n = self.x.len();
        if n < 2 || !(x >= self.x[0] && x <= self.x[n - 1]) {
            return None;
        }
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return Some((self.f[i][0], self.f[i][1])),
            Err(i) => i - 1,
        };
        Some(hermite5(self.x[i], self.x[i + 1], self.f[i], self.f[i + 1], x))
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

// B_{2k}/(2k+1)! for k = 1..
const LI2_COEFF: [f64; 12] = [
    1.0 / 36.0,
    -1.0 / 3600.0,
    1.0 / 211680.0,
    -1.0 / 10886400.0,
    1.0 / 526901760.0,
    -4.064761645144226e-11,
    8.921691020456453e-13,
    -1.993929586072108e-14,
    4.518980029619918e-16,
    -1.035651761218125e-17,
    2.395218621026186e-19,
    -5.581785874325701e-21,
];

/// Dilogarithm Li₂(z) for |z| ≤ 1.
pub fn li2(z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if z == one {
        return Complex64::new(std::f64::consts::PI.powi(2) / 6.0, 0.0);
    }
    if z.norm_sqr() < 1e-30 {
        return z;
    }
    if z.re > 0.5 {
        let w = one - z;
        return -li2_core(w) + std::f64::consts::PI.powi(2) / 6.0 - z.ln() * w.ln();
    }
    li2_core(z)
}

fn li2_core(z: Complex64) -> Complex64 {
    let u = -(Complex64::new(1.0, 0.0) - z).ln();
    let u2 = u * u;
    let mut acc = u - u2 * 0.25;
    let mut p = u * u2;
    for c in LI2_COEFF {
        acc += p * c;
        p *= u2;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dopri_exponential() {
        let d = Dopri::with_rtol(1e-12);
        let mut h = 0.0;
        let y = d.integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 3.0, &mut h, |_, _, _| {}).unwrap();
        assert!((y[0] - 3f64.exp()).abs() < 1e-10 * 3f64.exp());
        let back = d.integrate(|_, y: &[f64; 1]| [y[0]], 3.0, y, 0.0, &mut h, |_, _, _| {}).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn brent_cos() {
        let r = brent(|x| x.cos(), 1.0, 2.0, 1e-14, "cos").unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, "none").is_err());
    }

    #[test]
    fn hermite_reproduces_quintic() {
        let p = |x: f64| [x.powi(5) - 2.0 * x.powi(3) + x, 5.0 * x.powi(4) - 6.0 * x * x + 1.0, 20.0 * x.powi(3) - 12.0 * x];
        for &x in &[0.3, 0.55, 0.91] {
            let (v, d) = hermite5(0.2, 1.1, p(0.2), p(1.1), x);
            assert!((v - p(x)[0]).abs() < 1e-13);
            assert!((d - p(x)[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn li2_reference_values() {
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((li2(Complex64::new(-1.0, 0.0)).re + pi2 / 12.0).abs() < 1e-14);
        let half = li2(Complex64::new(0.5, 0.0)).re;
        assert!((half - (pi2 / 12.0 - 0.5 * 2f64.ln().powi(2))).abs() < 1e-14);
        // Re Li2(e^{iθ}) = π²/6 − θ(2π − θ)/4
        for &th in &[0.3, 1.0, 2.5] {
            let v = li2(Complex64::from_polar(1.0, th)).re;
            assert!((v - (pi2 / 6.0 - th * (2.0 * std::f64::consts::PI - th) / 4.0)).abs() < 1e-13, "{th}");
        }
        // against the power series inside the disk
        let z = Complex64::from_polar(0.7, 2.1);
        let mut s = Complex64::new(0.0, 0.0);
        let mut zn = z;
        for n in 1..400 {
            s += zn / (n * n) as f64;
            zn *= z;
        }
        assert!((li2(z) - s).norm() < 1e-14);
    }
}
