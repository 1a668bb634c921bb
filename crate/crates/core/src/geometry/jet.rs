//! Second-order jets in two variables: value, gradient and Hessian carried
//! through arithmetic exactly (forward mode).

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 2],
    /// [∂₀₀, ∂₀₁, ∂₁₁]
    pub h: [f64; 3],
}

impl Jet {
    pub const fn cst(v: f64) -> Self {
        Jet { v, d: [0.0; 2], h: [0.0; 3] }
    }

    /// The coordinate function x_i at value v.
    pub fn var(v: f64, i: usize) -> Self {
        let mut d = [0.0; 2];
        d[i] = 1.0;
        Jet { v, d, h: [0.0; 3] }
    }

    /// f∘self given f, f', f'' at self.v.
    fn chain(self, f: f64, f1: f64, f2: f64) -> Self {
        let [a, b] = self.d;
        Jet {
            v: f,
            d: [f1 * a, f1 * b],
            h: [f2 * a * a + f1 * self.h[0], f2 * a * b + f1 * self.h[1], f2 * b * b + f1 * self.h[2]],
        }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    /// e^x − 1 with full relative accuracy in the value.
    pub fn exp_m1(self) -> Self {
        let e = self.v.exp();
        self.chain(self.v.exp_m1(), e, e)
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sinh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s)
    }

    pub fn cosh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c)
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn scale(self, k: f64) -> Self {
        Jet { v: k * self.v, d: [k * self.d[0], k * self.d[1]], h: [k * self.h[0], k * self.h[1], k * self.h[2]] }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            d: [self.d[0] + o.d[0], self.d[1] + o.d[1]],
            h: [self.h[0] + o.h[0], self.h[1] + o.h[1], self.h[2] + o.h[2]],
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let (a, b) = (self, o);
        Jet {
            v: a.v * b.v,
            d: [a.d[0] * b.v + a.v * b.d[0], a.d[1] * b.v + a.v * b.d[1]],
            h: [
                a.h[0] * b.v + 2.0 * a.d[0] * b.d[0] + a.v * b.h[0],
                a.h[1] * b.v + a.d[0] * b.d[1] + a.d[1] * b.d[0] + a.v * b.h[1],
                a.h[2] * b.v + 2.0 * a.d[1] * b.d[1] + a.v * b.h[2],
            ],
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, k: f64) -> Jet {
        self.v += k;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, k: f64) -> Jet {
        self.scale(k)
    }
}

pub type V3 = [Jet; 3];

pub fn v3_cst(x: [f64; 3]) -> V3 {
    [Jet::cst(x[0]), Jet::cst(x[1]), Jet::cst(x[2])]
}

pub fn add3(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale3(a: V3, k: Jet) -> V3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

pub fn dot3(a: V3, b: V3) -> Jet {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Value, first and second partials of a jet vector, as plain vectors.
pub struct Partials {
    pub x: [f64; 3],
    pub du: [f64; 3],
    pub dv: [f64; 3],
    pub duu: [f64; 3],
    pub duv: [f64; 3],
    pub dvv: [f64; 3],
}

pub fn partials(a: V3) -> Partials {
    let f = |g: &dyn Fn(&Jet) -> f64| [g(&a[0]), g(&a[1]), g(&a[2])];
    Partials {
        x: f(&|j| j.v),
        du: f(&|j| j.d[0]),
        dv: f(&|j| j.d[1]),
        duu: f(&|j| j.h[0]),
        duv: f(&|j| j.h[1]),
        dvv: f(&|j| j.h[2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_a_composite() {
        // f(u,v) = e^{u v} sin(u) / (1 + v²)
        let (u0, v0) = (0.3, -0.7);
        let f = |u: Jet, v: Jet| (u * v).exp() * u.sin() / ((v * v) + 1.0);
        let j = f(Jet::var(u0, 0), Jet::var(v0, 1));
        let g = |u: f64, v: f64| (u * v).exp() * u.sin() / (1.0 + v * v);
        let h = 1e-4;
        let fu = (g(u0 + h, v0) - g(u0 - h, v0)) / (2.0 * h);
        let fv = (g(u0, v0 + h) - g(u0, v0 - h)) / (2.0 * h);
        let fuu = (g(u0 + h, v0) - 2.0 * g(u0, v0) + g(u0 - h, v0)) / (h * h);
        let fuv = (g(u0 + h, v0 + h) - g(u0 + h, v0 - h) - g(u0 - h, v0 + h) + g(u0 - h, v0 - h)) / (4.0 * h * h);
        let fvv = (g(u0, v0 + h) - 2.0 * g(u0, v0) + g(u0, v0 - h)) / (h * h);
        assert!((j.v - g(u0, v0)).abs() < 1e-15);
        assert!((j.d[0] - fu).abs() < 1e-7 && (j.d[1] - fv).abs() < 1e-7);
        assert!((j.h[0] - fuu).abs() < 1e-6 && (j.h[1] - fuv).abs() < 1e-6 && (j.h[2] - fvv).abs() < 1e-6);
        let k = Jet::var(2.0, 0).sqrt().cosh().sinh().cos() - Jet::var(0.1, 1).exp_m1();
        assert!(k.v.is_finite());
    }
}
