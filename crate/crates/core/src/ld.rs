//! D_m-symmetric linearised-doubling (LD) solutions with logarithmic
//! singularities on one or two circles of m points, their evaluation, and the
//! affine mismatch at a singular point.
//!
//! Every Fourier mode is handled in the conjugated form w = e^{ω}u, ω = −r²/8,
//! where the mode-k equation is w'' + w'/r + (1 − r²/16 − k²/r²) w = 0. Inside
//! the singular circle w = r^k f(r) with f an entire series in r²; outside,
//! η = w'/w + k/r obeys a Riccati equation that is stable when integrated
//! inward and stays O(1/k), so log w is never formed by cancellation.
//!
//! Within |ŝ| ≤ 3 of the circle the mode sum is rewritten around the exact
//! cylinder kernel ½ log(4 sinh²(ŝ/2) + 4 sin²(θ̃/2)): the coefficients
//! β_n = C_n G_n/ρ^{nm} + 1/n decay like 1/(n² m) and the tail beyond N is
//! resummed with Li₂.

use crate::error::{Error, Result};
use crate::numeric::{li2, Dopri, HermiteTable};
use crate::rld::{admissible_window, AvgProfile, PhibarClosed};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

pub const DEFAULT_MODES: usize = 24;
/// Half-width of the near zone in ŝ = m log(r/r̲).
pub const NEAR_ZONE: f64 = 3.0;
/// Radius where the outer mode solutions are started.
const R_OUT: f64 = 40.0;

// ---------------------------------------------------------------- cutoffs

/// Ψ(t) with first and second derivative: 0 for t ≤ −1, 1 for t ≥ 1,
/// Ψ − 1/2 odd, built from e^{−1/s}.
pub fn psi_base(t: f64) -> (f64, f64, f64) {
    let s = 0.5 * (t + 1.0);
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let u = 1.0 - s;
    let a = (-1.0 / s).exp();
    let b = (-1.0 / u).exp();
    let a1 = a / (s * s);
    let a2 = a * (1.0 / s.powi(4) - 2.0 / s.powi(3));
    let b1 = -b / (u * u);
    let b2 = b * (1.0 / u.powi(4) - 2.0 / u.powi(3));
    let sum = a + b;
    let ds = a1 + b1;
    let n = a1 * b - a * b1;
    let dn = a2 * b - a * b2;
    let g = a / sum;
    let g1 = n / (sum * sum);
    let g2 = (dn * sum - 2.0 * n * ds) / sum.powi(3);
    (g, 0.5 * g1, 0.25 * g2)
}

/// ψ_cut[a, b](t) = Ψ(L(t)) with L affine, L(a) = −3, L(b) = 3.
pub fn cutoff(a: f64, b: f64, t: f64) -> Result<f64> {
    Ok(cutoff_derivs(a, b, t)?.0)
}

/// ψ_cut[a, b] and its first two t-derivatives.
pub fn cutoff_derivs(a: f64, b: f64, t: f64) -> Result<(f64, f64, f64)> {
    if a == b {
        return Err(Error::Domain("cutoff needs a ≠ b".into()));
    }
    let slope = 6.0 / (b - a);
    let (p, p1, p2) = psi_base(-3.0 + slope * (t - a));
    Ok((p, p1 * slope, p2 * slope * slope))
}

/// Ψ[a, b; t](f0, f1) = f1 ψ_cut[a,b](t) + f0 ψ_cut[b,a](t).
pub fn blend(a: f64, b: f64, t: f64, f0: f64, f1: f64) -> Result<f64> {
    let c = cutoff(a, b, t)?;
    Ok(f1 * c + f0 * (1.0 - c))
}

// ---------------------------------------------------------------- lattices

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingularLattice {
    /// 0: points at angles 2πn/m; 1: shifted by π/m.
    pub family: u8,
    pub rbar: f64,
    pub m: u32,
}

impl SingularLattice {
    pub fn new(family: u8, rbar: f64, m: u32) -> Result<Self> {
        if family > 1 {
            return Err(Error::Domain(format!("lattice family {family} not in {{0,1}}")));
        }
        if m < 2 {
            return Err(Error::Domain(format!("m = {m} < 2")));
        }
        let (lo, hi) = admissible_window();
        if !(rbar > lo && rbar < hi) {
            return Err(Error::Domain(format!("r̲ = {rbar} outside the admissible window ({lo}, {hi})")));
        }
        Ok(SingularLattice { family, rbar, m })
    }

    pub fn theta0(&self) -> f64 {
        self.family as f64 * PI / self.m as f64
    }

    /// Polar coordinates of the n-th point.
    pub fn point(&self, n: u32) -> (f64, f64) {
        (self.rbar, self.theta0() + 2.0 * PI * (n % self.m) as f64 / self.m as f64)
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.m).map(|n| self.point(n)).collect()
    }

    /// Index of the point nearest to (r, θ) and the Euclidean distance to it.
    pub fn nearest(&self, r: f64, theta: f64) -> (u32, f64) {
        let m = self.m as f64;
        let t = (theta - self.theta0()) * m / (2.0 * PI);
        let n = t.round().rem_euclid(m) as u32;
        let (pr, pt) = self.point(n);
        (n, polar_dist(r, theta, pr, pt))
    }

    /// Euclidean distance to the lattice.
    pub fn dist(&self, r: f64, theta: f64) -> f64 {
        self.nearest(r, theta).1
    }

    /// Image under the reflection θ ↦ π/m − θ, which swaps the families.
    pub fn reflected(&self) -> Self {
        SingularLattice { family: 1 - self.family, ..*self }
    }
}

pub fn polar_dist(r1: f64, t1: f64, r2: f64, t2: f64) -> f64 {
    let dx = r1 * t1.cos() - r2 * t2.cos();
    let dy = r1 * t1.sin() - r2 * t2.sin();
    dx.hypot(dy)
}

// ---------------------------------------------------------------- modes

#[derive(Clone, Debug)]
struct FarSeries {
    /// Coefficients of S(r) = Σ a_j r^{−2j}, u ~ r S(r).
    a: Vec<f64>,
    s_at_r_out: f64,
}

impl FarSeries {
    fn new(k: f64) -> Option<Self> {
        let r2 = R_OUT * R_OUT;
        let mut a = vec![1.0];
        let mut s = 1.0;
        let mut term = 1.0f64;
        for j in 1..400usize {
            let f = (2.0 * j as f64 - 3.0).powi(2) - k * k;
            let next = -a[j - 1] * f / j as f64;
            term = next / r2.powi(j as i32);
            if !term.is_finite() || term.abs() > 1e12 {
                return None;
            }
            a.push(next);
            s += term;
            if next == 0.0 || term.abs() < 1e-17 * s.abs() {
                return Some(FarSeries { a, s_at_r_out: s });
            }
        }
        let _ = term;
        None
    }

    /// (S, S') at r ≥ R_OUT.
    fn eval(&self, r: f64) -> (f64, f64) {
        let q = 1.0 / (r * r);
        let (mut s, mut ds, mut p) = (0.0, 0.0, 1.0);
        for (j, &c) in self.a.iter().enumerate() {
            s += c * p;
            ds += -2.0 * j as f64 * c * p / r;
            p *= q;
        }
        (s, ds)
    }
}

/// Mode n (angular frequency k = nm) of the unit LD solution on a circle.
#[derive(Clone, Debug)]
pub struct Mode {
    pub n: u32,
    pub k: f64,
    /// Coefficient of G_n in e^{ω}Φ, where G_n = w_n/w_n(r̲); ≈ −1/n.
    pub c: f64,
    /// log(−n c).
    log_neg_nc: f64,
    series: Vec<f64>,
    log_f_bar: f64,
    /// Λ = log w + k log r on [r̲, R_OUT], with Λ(r̲) recorded.
    table: HermiteTable,
    lambda_bar: f64,
    /// w'/w at r̲ from inside and outside.
    pub y_in: f64,
    pub y_out: f64,
    far: Option<FarSeries>,
}

impl Mode {
    fn f_series(&self, r: f64) -> (f64, f64) {
        let x = r * r;
        let (mut f, mut df, mut p) = (0.0, 0.0, 1.0);
        for (j, &c) in self.series.iter().enumerate() {
            f += c * p;
            if j > 0 {
                df += 2.0 * j as f64 * c * p / r;
            }
            p *= x;
        }
        (f, df)
    }

    /// log G_n(r) + k |log(r/r̲)|, the slowly varying part of log G_n, for
    /// r̲ e^{−3/m}… up to R_OUT. `None` beyond R_OUT.
    fn log_g_excess(&self, r: f64, rbar: f64) -> Option<f64> {
        if r <= rbar {
            let (f, _) = self.f_series(r);
            Some(f.ln() - self.log_f_bar)
        } else {
            self.table.eval(r).map(|(l, _)| l - self.lambda_bar)
        }
    }

    /// log|G_n(r)|, or `None` beyond R_OUT.
    fn log_g(&self, r: f64, rbar: f64) -> Option<f64> {
        let ex = self.log_g_excess(r, rbar)?;
        Some(ex - self.k * (r / rbar).ln().abs())
    }

    /// Contribution C_n G_n(r) e^{r²/8}·e^{s} to Φ (u-form) with s = 0, or
    /// to e^{ω}Φ with s = −r²/8, for any r > 0.
    fn coef_g(&self, r: f64, rbar: f64, weighted: bool) -> f64 {
        let lw = if weighted { 0.0 } else { r * r / 8.0 };
        match self.log_g(r, rbar) {
            Some(lg) => self.c * (lg + lw).exp(),
            None => {
                // linear-growth continuation u ∝ r S(r) beyond R_OUT
                let Some(far) = &self.far else { return 0.0 };
                let lg_r = -self.k * (R_OUT / rbar).ln() + self.table.eval(R_OUT).unwrap().0 - self.lambda_bar;
                let (s, _) = far.eval(r);
                let ratio = (r * s) / (R_OUT * far.s_at_r_out);
                let lw_r = if weighted { R_OUT * R_OUT / 8.0 - r * r / 8.0 } else { R_OUT * R_OUT / 8.0 };
                self.c * (lg_r + lw_r).exp() * ratio
            }
        }
    }
}

fn build_mode(n: u32, m: u32, rbar: f64) -> Result<Mode> {
    let k = (n * m) as f64;
    // inside: w = r^k f(r), f = Σ c_j r^{2j}
    let x = rbar * rbar;
    let mut series = vec![1.0];
    loop {
        let j = series.len();
        let prev2 = if j >= 2 { series[j - 2] / 16.0 } else { 0.0 };
        let cj = -(series[j - 1] - prev2) / (4.0 * j as f64 * (j as f64 + k));
        series.push(cj);
        if j >= 3 && (cj * x.powi(j as i32)).abs() < 1e-19 && (series[j - 1] * x.powi(j as i32 - 1)).abs() < 1e-18 {
            break;
        }
        if j > 400 {
            return Err(Error::Precision(format!("inner mode series for k = {k} did not converge")));
        }
    }
    let mut mode = Mode {
        n,
        k,
        c: 0.0,
        log_neg_nc: 0.0,
        series,
        log_f_bar: 0.0,
        table: HermiteTable::default(),
        lambda_bar: 0.0,
        y_in: 0.0,
        y_out: 0.0,
        far: None,
    };
    let (f_bar, df_bar) = mode.f_series(rbar);
    if !(f_bar > 0.0) {
        return Err(Error::Precision(format!("inner mode k = {k} vanishes before r̲")));
    }
    mode.log_f_bar = f_bar.ln();

    // outside: start at R_OUT on the linearly growing solution when its
    // asymptotic series is usable, else on the quasi-static Riccati branch
    let far = FarSeries::new(k);
    let eta0 = match &far {
        Some(fs) => {
            let (s, ds) = fs.eval(R_OUT);
            let dlog_u = 1.0 / R_OUT + ds / s;
            dlog_u - R_OUT / 4.0 + k / R_OUT
        }
        None => {
            let b = (2.0 * k - 1.0) / R_OUT;
            let c = R_OUT * R_OUT / 16.0 - 1.0;
            -2.0 * c / (b + (b * b + 4.0 * c).sqrt())
        }
    };
    let rhs = |r: f64, y: &[f64; 2]| [y[1], y[1] * (2.0 * k - 1.0) / r - y[1] * y[1] + r * r / 16.0 - 1.0];
    let d = Dopri { rtol: 1e-12, atol: 1e-14, h_max: 0.05, ..Default::default() };
    let mut xs = Vec::new();
    let mut fs = Vec::new();
    let mut h = 0.0;
    let end = d.integrate(rhs, R_OUT, [0.0, eta0], rbar, &mut h, |r, y, f| {
        xs.push(r);
        fs.push([y[0], y[1], f[1]]);
    })?;
    mode.table = HermiteTable::from_nodes(xs, fs);
    mode.lambda_bar = end[0];
    let eta_bar = end[1];
    if far.is_none() {
        // the mode must then be invisible in the far field
        let lg = -k * (R_OUT / rbar).ln() - mode.lambda_bar + R_OUT * R_OUT / 8.0;
        if lg > -60.0 {
            return Err(Error::Truncation(format!("mode k = {k}: no far-field expansion and not negligible")));
        }
    }
    mode.far = far;

    mode.y_in = k / rbar + df_bar / f_bar;
    mode.y_out = -k / rbar + eta_bar;
    let eps = rbar / (2.0 * k) * (df_bar / f_bar - eta_bar);
    mode.log_neg_nc = -eps.ln_1p();
    mode.c = -(mode.log_neg_nc).exp() / n as f64;
    Ok(mode)
}

/// All modes of the unit LD solution on a circle of radius r̲ with m points.
#[derive(Debug)]
pub struct ModeSet {
    pub rbar: f64,
    pub m: u32,
    pub avg: AvgProfile,
    pub modes: Vec<Mode>,
    /// Bound on the far-zone truncation error Σ_{n>N} |C_n G_n| at |ŝ| ≥ 3.
    pub tail_bound: f64,
}

impl ModeSet {
    fn build(rbar: f64, m: u32, n_modes: usize) -> Result<Self> {
        let avg = AvgProfile::new(rbar, m)?;
        let modes = (1..=n_modes as u32).map(|n| build_mode(n, m, rbar)).collect::<Result<Vec<_>>>()?;
        let mut tail = 0.0;
        for n in n_modes + 1..n_modes + 200 {
            tail += 1.1 / n as f64 * (-NEAR_ZONE * n as f64).exp();
        }
        Ok(ModeSet { rbar, m, avg, modes, tail_bound: tail })
    }

    /// |C_n G_n(r)| of the unit Φ per mode, for truncation diagnostics.
    pub fn mode_magnitudes(&self, r: f64) -> Vec<f64> {
        self.modes.iter().map(|md| md.coef_g(r, self.rbar, false).abs()).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,k,c_n,y_in,y_out")?;
        for md in &self.modes {
            writeln!(w, "{},{},{:.17e},{:.17e},{:.17e}", md.n, md.k, md.c, md.y_in, md.y_out)?;
        }
        Ok(())
    }

    /// e^{ω}Φ of the unit solution with the lattice rotated to θ₀ = 0 (ψ is
    /// the angle from a lattice point). With `subtract`, the nearest
    /// lattice point's log d^{g_Shr} is removed analytically.
    fn weighted(&self, r: f64, psi: f64, subtract: bool) -> f64 {
        let rbar = self.rbar;
        let m = self.m as f64;
        let shat = m * ((r - rbar) / rbar).ln_1p();
        let mode0 = (-r * r / 8.0).exp() * self.avg.eval(r).expect("average profile").0;
        if shat.abs() > NEAR_ZONE {
            let mut acc = mode0;
            let rot = Complex64::from_polar(1.0, m * psi);
            let mut e = Complex64::new(1.0, 0.0);
            for md in &self.modes {
                e *= rot;
                let g = md.coef_g(r, rbar, true);
                if g == 0.0 {
                    continue;
                }
                acc += g * e.re;
                if g.abs() < 1e-18 * acc.abs() {
                    break;
                }
            }
            if subtract {
                acc -= log_d_shr(r, psi, rbar);
            }
            return acc;
        }
        let ttil = m * psi;
        let half = 0.5 * shat;
        let sh = half.sinh();
        let sn = (0.5 * ttil).sin();
        let kernel_arg = 4.0 * sh * sh + 4.0 * sn * sn;
        let log_term = if subtract {
            let (dr_v, v2) = offset(r, psi, rbar);
            if v2 == 0.0 {
                (m / rbar).ln() + rbar * rbar / 8.0
            } else {
                0.5 * (kernel_arg / v2).ln() + rbar * rbar / 8.0 + rbar / 8.0 * dr_v
            }
        } else {
            0.5 * kernel_arg.ln()
        };
        let z = Complex64::from_polar((-shat.abs()).exp(), ttil);
        let mut zn = Complex64::new(1.0, 0.0);
        let mut sum = 0.0;
        let mut partial2 = Complex64::new(0.0, 0.0);
        let mut beta_last = 0.0;
        let mut n_last = 0.0;
        for md in &self.modes {
            zn *= z;
            let nf = md.n as f64;
            let ex = md.log_g_excess(r, rbar).expect("near zone lies inside the mode tables");
            let beta = -(md.log_neg_nc + ex).exp_m1() / nf;
            sum += beta * zn.re;
            partial2 += zn / (nf * nf);
            beta_last = beta;
            n_last = nf;
        }
        let tail = beta_last * n_last * n_last * (li2(z) - partial2).re;
        mode0 - 0.5 * shat.abs() + log_term + sum + tail
    }

    /// Φ of the unit solution (u-form), ψ as in `weighted`.
    fn value(&self, r: f64, psi: f64) -> f64 {
        let m = self.m as f64;
        let shat = m * ((r - self.rbar) / self.rbar).ln_1p();
        if shat.abs() <= NEAR_ZONE {
            return (r * r / 8.0).exp() * self.weighted(r, psi, false);
        }
        let mut acc = self.avg.eval(r).expect("average profile").0;
        let rot = Complex64::from_polar(1.0, m * psi);
        let mut e = Complex64::new(1.0, 0.0);
        for md in &self.modes {
            e *= rot;
            let g = md.coef_g(r, self.rbar, false);
            acc += g * e.re;
            // |G_n| decreases in n away from the circle
            if g.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        acc
    }
}

/// log d^{g_Shr}_p(q) to second order: log|v| + ω(p) + ½ dω_p(v), for p at
/// (r̲, 0) and q at polar (r, ψ).
pub fn log_d_shr(r: f64, psi: f64, rbar: f64) -> f64 {
    let (dx, v2) = offset(r, psi, rbar);
    0.5 * v2.ln() - rbar * rbar / 8.0 - rbar / 8.0 * dx
}

/// (radial component, squared length) of q − p for p = (r̲, 0), q = (r, ψ),
/// without the cancellation of r cos ψ − r̲ near p.
fn offset(r: f64, psi: f64, rbar: f64) -> (f64, f64) {
    let s = (0.5 * psi).sin();
    let dr = r - rbar;
    (dr - 2.0 * r * s * s, dr * dr + 4.0 * r * rbar * s * s)
}

/// Keyed by (r̲ bits, m, N).
type ModeCache = Mutex<HashMap<(u64, u32, usize), Arc<ModeSet>>>;

fn cache() -> &'static ModeCache {
    static C: OnceLock<ModeCache> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Mode tables for (r̲, m, N), memoised process-wide.
pub fn mode_set(rbar: f64, m: u32, n_modes: usize) -> Result<Arc<ModeSet>> {
    let key = (rbar.to_bits(), m, n_modes);
    if let Some(s) = cache().lock().unwrap().get(&key) {
        return Ok(s.clone());
    }
    let s = Arc::new(ModeSet::build(rbar, m, n_modes)?);
    let mut c = cache().lock().unwrap();
    if c.len() > 512 {
        c.clear();
    }
    c.insert(key, s.clone());
    Ok(s)
}

// ---------------------------------------------------------------- solutions

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// A singular point: the `index`-th point of the lattice on `side`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LatticePoint {
    pub side: Side,
    pub index: u32,
}

#[derive(Clone, Debug)]
pub struct LatticePart {
    pub lattice: SingularLattice,
    pub tau: f64,
    pub modes: Arc<ModeSet>,
}

/// φ = τ₊ Φ[L₊] − τ₋ Φ[L₋]; Φ[L] is the unit LD solution, e^{ω}Φ ~ log d near L.
#[derive(Clone, Debug)]
pub struct LdSolution {
    pub plus: Option<LatticePart>,
    pub minus: Option<LatticePart>,
    pub n_modes: usize,
}

pub fn build_ld(
    lat_plus: Option<SingularLattice>,
    lat_minus: Option<SingularLattice>,
    tau_plus: f64,
    tau_minus: f64,
    n_modes: usize,
) -> Result<LdSolution> {
    if lat_plus.is_none() && lat_minus.is_none() {
        return Err(Error::Domain("an LD solution needs at least one lattice".into()));
    }
    if !(tau_plus >= 0.0 && tau_minus >= 0.0) {
        return Err(Error::Domain(format!("negative strengths ({tau_plus}, {tau_minus})")));
    }
    if n_modes < 8 {
        return Err(Error::Truncation(format!("{n_modes} modes requested, at least 8 needed")));
    }
    let part = |lat: Option<SingularLattice>, tau: f64| -> Result<Option<LatticePart>> {
        match lat {
            None => Ok(None),
            Some(l) => {
                let modes = mode_set(l.rbar, l.m, n_modes)?;
                if modes.tail_bound > 1e-8 {
                    return Err(Error::Truncation(format!("tail bound {:e}", modes.tail_bound)));
                }
                Ok(Some(LatticePart { lattice: l, tau, modes }))
            }
        }
    };
    Ok(LdSolution { plus: part(lat_plus, tau_plus)?, minus: part(lat_minus, tau_minus)?, n_modes })
}

impl LatticePart {
    fn psi(&self, theta: f64) -> f64 {
        theta - self.lattice.theta0()
    }

    /// Unit Φ[L] at (r, θ).
    pub fn unit_value(&self, r: f64, theta: f64) -> f64 {
        self.modes.value(r, self.psi(theta))
    }

    /// e^{ω} Φ[L] at (r, θ), optionally minus log d^{g_Shr} to the nearest point.
    pub fn unit_weighted(&self, r: f64, theta: f64, subtract: bool) -> f64 {
        let (n, _) = self.lattice.nearest(r, theta);
        let psi = self.psi(theta) - 2.0 * PI * n as f64 / self.lattice.m as f64;
        self.modes.weighted(r, psi, subtract)
    }
}

impl LdSolution {
    pub fn part(&self, side: Side) -> Option<&LatticePart> {
        match side {
            Side::Plus => self.plus.as_ref(),
            Side::Minus => self.minus.as_ref(),
        }
    }

    pub fn tau(&self, side: Side) -> f64 {
        self.part(side).map_or(0.0, |p| p.tau)
    }

    /// Polar coordinates of a singular point.
    pub fn point(&self, p: LatticePoint) -> Result<(f64, f64)> {
        let part = self.part(p.side).ok_or_else(|| Error::Domain(format!("no lattice on side {:?}", p.side)))?;
        Ok(part.lattice.point(p.index))
    }

    fn parts(&self) -> impl Iterator<Item = (Side, &LatticePart)> {
        self.plus.iter().map(|p| (Side::Plus, p)).chain(self.minus.iter().map(|p| (Side::Minus, p)))
    }

    /// Minimum distance from (r, θ) to any singular point.
    pub fn singular_dist(&self, r: f64, theta: f64) -> f64 {
        self.parts().map(|(_, p)| p.lattice.dist(r, theta)).fold(f64::INFINITY, f64::min)
    }

    /// Coefficients C_n of the mode tables, per lattice present.
    pub fn mode_coefficients(&self) -> Vec<(Side, Vec<(u32, f64)>)> {
        self.parts().map(|(s, p)| (s, p.modes.modes.iter().map(|md| (md.n, md.c)).collect())).collect()
    }

    /// Mode 0 (the rotational average) at r.
    pub fn mode0(&self, r: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (s, p) in self.parts() {
            acc += s.sign() * p.tau * p.modes.avg.eval(r)?.0;
        }
        Ok(acc)
    }

    /// e^{ω}φ at (r, θ); with `subtract`, e^{ω}φ ∓ τ± log d^{g_Shr}_p.
    pub fn weighted(&self, r: f64, theta: f64, subtract: Option<LatticePoint>) -> Result<f64> {
        if let Some(p) = subtract {
            let (pr, pt) = self.point(p)?;
            let part = self.part(p.side).unwrap();
            let (n, _) = part.lattice.nearest(r, theta);
            let mut acc = 0.0;
            let mut done = false;
            for (s, q) in self.parts() {
                if s == p.side {
                    if n == p.index {
                        acc += s.sign() * q.tau * q.unit_weighted(r, theta, true);
                        done = true;
                    } else {
                        acc += s.sign() * q.tau * q.unit_weighted(r, theta, false);
                    }
                } else {
                    self.check_regular(q, r, theta)?;
                    acc += s.sign() * q.tau * q.unit_weighted(r, theta, false);
                }
            }
            if !done {
                // far from p: subtract directly
                acc -= p.side.sign() * part.tau * log_d_shr(r, theta - pt, pr);
            }
            return Ok(acc);
        }
        let mut acc = 0.0;
        for (s, q) in self.parts() {
            self.check_regular(q, r, theta)?;
            acc += s.sign() * q.tau * q.unit_weighted(r, theta, false);
        }
        Ok(acc)
    }

    fn check_regular(&self, q: &LatticePart, r: f64, theta: f64) -> Result<()> {
        let d = q.lattice.dist(r, theta);
        if d < 1e-8 {
            return Err(Error::Singular(format!("evaluation at distance {d:e} from a singular point")));
        }
        Ok(())
    }

    /// φ at (r, θ).
    pub fn value(&self, r: f64, theta: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (s, q) in self.parts() {
            self.check_regular(q, r, theta)?;
            acc += s.sign() * q.tau * q.unit_value(r, theta);
        }
        Ok(acc)
    }

    /// CSV of samples on an (r, θ) product grid.
    pub fn write_slice_csv<W: Write>(&self, rs: &[f64], thetas: &[f64], mut w: W) -> Result<()> {
        writeln!(w, "r,theta,value")?;
        for &r in rs {
            for &t in thetas {
                let v = self.value(r, t).unwrap_or(f64::NAN);
                writeln!(w, "{r:.17e},{t:.17e},{v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// φ at (r, θ), or e^{ω}φ ∓ τ log d^{g_Shr}_p when a point is given.
pub fn eval_ld(sol: &LdSolution, r: f64, theta: f64, subtract_singularity_at: Option<LatticePoint>) -> Result<f64> {
    match subtract_singularity_at {
        None => sol.value(r, theta),
        Some(p) => sol.weighted(r, theta, Some(p)),
    }
}

/// G_∞(ŝ, θ̃) = ½ log(4 sin²(θ̃/2) + 4 sinh²(ŝ/2)).
pub fn green_cyl(shat: f64, ttil: f64) -> Result<f64> {
    let s = (0.5 * shat).sinh();
    let t = (0.5 * ttil).sin();
    let arg = 4.0 * (s * s + t * t);
    let wrapped = ttil - 2.0 * PI * (ttil / (2.0 * PI)).round();
    if shat.abs() < 1e-300 && wrapped.abs() < 1e-12 {
        return Err(Error::Singular(format!("G_∞ at ({shat}, {ttil})")));
    }
    Ok(0.5 * arg.ln())
}

// ---------------------------------------------------------------- mismatch

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AffineMismatch {
    pub mu: f64,
    pub mu_prime: f64,
    /// Tangential (dθ, unit-speed) coefficient; zero by symmetry.
    pub dtheta: f64,
    pub p: LatticePoint,
    pub p_polar: (f64, f64),
    pub h_used: f64,
    pub tau_used: f64,
}

/// ε = min(δ/4, 0.3/m) with δ = 1/(100m).
pub fn extraction_radius(m: u32) -> f64 {
    let m = m as f64;
    (0.25 / (100.0 * m)).min(0.3 / m)
}

const CIRCLE_POINTS: usize = 16;

fn circle_fit(sol: &LdSolution, p: LatticePoint, pr: f64, pt: f64, eps: f64) -> Result<(f64, f64, f64)> {
    let (c, s) = (pt.cos(), pt.sin());
    let (px, py) = (pr * c, pr * s);
    let (mut c0, mut a1, mut b1) = (0.0, 0.0, 0.0);
    for i in 0..CIRCLE_POINTS {
        let phi = 2.0 * PI * i as f64 / CIRCLE_POINTS as f64;
        let (u, v) = (eps * phi.cos(), eps * phi.sin());
        let x = px + u * c - v * s;
        let y = py + u * s + v * c;
        let f = sol.weighted(x.hypot(y), y.atan2(x), Some(p))?;
        c0 += f;
        a1 += f * phi.cos();
        b1 += f * phi.sin();
    }
    let n = CIRCLE_POINTS as f64;
    Ok((c0 / n, 2.0 * a1 / (n * eps), 2.0 * b1 / (n * eps)))
}

/// Mismatch with an explicit extraction radius (Richardson over ε, ε/2).
pub fn extract_affine_eps(sol: &LdSolution, p: LatticePoint, tau: f64, h: f64, eps: f64) -> Result<AffineMismatch> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("mismatch needs τ > 0, got {tau}")));
    }
    let (pr, pt) = sol.point(p)?;
    let f1 = circle_fit(sol, p, pr, pt, eps)?;
    let f2 = circle_fit(sol, p, pr, pt, eps / 2.0)?;
    let rich = |a: f64, b: f64| (4.0 * b - a) / 3.0;
    let c = rich(f1.0, f2.0);
    let a = rich(f1.1, f2.1);
    let b = rich(f1.2, f2.2);
    let sign = p.side.sign();
    Ok(AffineMismatch {
        mu: c / tau + sign * (tau / 2.0).ln() - h / tau,
        mu_prime: a / tau,
        dtheta: b / tau,
        p,
        p_polar: (pr, pt),
        h_used: h,
        tau_used: tau,
    })
}

/// Per-τ mismatch (μ, μ') at a singular point. Fails if the tangential
/// component exceeds 1e-7, which would contradict the reflection symmetry.
pub fn extract_affine(sol: &LdSolution, p: LatticePoint, tau: f64, h: f64) -> Result<AffineMismatch> {
    let m = sol.part(p.side).ok_or_else(|| Error::Domain("point on an absent lattice".into()))?.lattice.m;
    let am = extract_affine_eps(sol, p, tau, h, extraction_radius(m))?;
    if am.dtheta.abs() > 1e-7 {
        return Err(Error::Symmetry(format!("tangential mismatch component {:e}", am.dtheta)));
    }
    Ok(am)
}

// ---------------------------------------------------------------- obstruction

/// V, V', W = 𝓛V, W' = 𝓛V' for a lattice on the circle of radius c.
#[derive(Clone, Copy, Debug)]
pub struct ObstructionFns {
    pub lattice: SingularLattice,
    pub delta: f64,
    v: PhibarClosed,
    vp: PhibarClosed,
}

pub fn obstruction_fns(lat: SingularLattice) -> Result<ObstructionFns> {
    Ok(ObstructionFns {
        lattice: lat,
        delta: 1.0 / (100.0 * lat.m as f64),
        v: PhibarClosed::new(1.0, 0.0, lat.rbar)?,
        vp: PhibarClosed::new(0.0, 1.0, lat.rbar)?,
    })
}

impl ObstructionFns {
    fn localized(&self, prof: &PhibarClosed, r: f64, theta: f64) -> Result<f64> {
        let d = self.lattice.dist(r, theta);
        if d >= 2.0 * self.delta {
            return Ok(0.0);
        }
        let psi = cutoff(2.0 * self.delta, self.delta, d)?;
        if psi == 0.0 {
            return Ok(0.0);
        }
        Ok(psi * prof.eval(r)?.0)
    }

    fn applied(&self, prof: &PhibarClosed, r: f64, theta: f64) -> Result<f64> {
        let (n, d) = self.lattice.nearest(r, theta);
        if d >= 2.0 * self.delta || d == 0.0 {
            return Ok(0.0);
        }
        let (_, p1, p2) = cutoff_derivs(2.0 * self.delta, self.delta, d)?;
        if p1 == 0.0 && p2 == 0.0 {
            return Ok(0.0);
        }
        let (pr, pt) = self.lattice.point(n);
        let (x, y) = (r * theta.cos(), r * theta.sin());
        let (gx, gy) = ((x - pr * pt.cos()) / d, (y - pr * pt.sin()) / d);
        let (f, df) = prof.eval(r)?;
        let (er_x, er_y) = (theta.cos(), theta.sin());
        // 𝓛(ψf) = f Δψ + 2∇ψ·∇f − ½ f X·∇ψ, using 𝓛f = 0
        let lap_psi = p2 + p1 / d;
        let grad_dot = p1 * df * (gx * er_x + gy * er_y);
        let x_dot = p1 * (x * gx + y * gy);
        Ok(f * lap_psi + 2.0 * grad_dot - 0.5 * f * x_dot)
    }

    pub fn v(&self, r: f64, theta: f64) -> Result<f64> {
        self.localized(&self.v, r, theta)
    }

    pub fn v_prime(&self, r: f64, theta: f64) -> Result<f64> {
        self.localized(&self.vp, r, theta)
    }

    pub fn w(&self, r: f64, theta: f64) -> Result<f64> {
        self.applied(&self.v, r, theta)
    }

    pub fn w_prime(&self, r: f64, theta: f64) -> Result<f64> {
        self.applied(&self.vp, r, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rld::roots;

    #[test]
    fn cutoff_properties() {
        assert_eq!(cutoff(0.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(cutoff(0.0, 1.0, 1.0).unwrap(), 1.0);
        assert!(cutoff(1.0, 1.0, 0.3).is_err());
        for i in -50..=50 {
            let t = 0.037 * i as f64;
            let s = cutoff(0.2, 0.9, t).unwrap() + cutoff(0.9, 0.2, t).unwrap();
            assert!((s - 1.0).abs() < 1e-15);
            assert!((psi_base(-t).0 - (1.0 - psi_base(t).0)).abs() < 1e-15);
        }
        let mut prev = 0.0;
        for i in 0..=400 {
            let v = cutoff(0.0, 1.0, -0.5 + 2.0 * i as f64 / 400.0).unwrap();
            assert!(v >= prev - 1e-16);
            prev = v;
        }
        // derivatives against central differences
        for &t in &[-0.7, -0.2, 0.0, 0.33, 0.81] {
            let h = 1e-5;
            let (_, d1, d2) = psi_base(t);
            let fd1 = (psi_base(t + h).0 - psi_base(t - h).0) / (2.0 * h);
            let fd2 = (psi_base(t + h).1 - psi_base(t - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-8 && (d2 - fd2).abs() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn green_cyl_values() {
        assert!((green_cyl(0.0, PI).unwrap() - 2f64.ln()).abs() < 1e-15);
        let h = 1e-4;
        let d1 = (green_cyl(h, PI).unwrap() - green_cyl(-h, PI).unwrap()) / (2.0 * h);
        let d2 = (green_cyl(h, PI).unwrap() - 2.0 * green_cyl(0.0, PI).unwrap() + green_cyl(-h, PI).unwrap()) / (h * h);
        assert!(d1.abs() < 1e-12);
        assert!((d2 - 0.25).abs() < 1e-7);
        assert!(green_cyl(0.0, 2.0 * PI).is_err());
    }

    #[test]
    fn lattice_geometry() {
        let l = SingularLattice::new(1, 1.5, 8).unwrap();
        assert!((l.theta0() - PI / 8.0).abs() < 1e-15);
        assert_eq!(l.points().len(), 8);
        let (n, d) = l.nearest(1.5, PI / 8.0 + 2.0 * PI * 3.0 / 8.0 + 1e-3);
        assert_eq!(n, 3);
        assert!((d - 1.5e-3).abs() < 1e-9);
        assert!(SingularLattice::new(0, 2.4, 8).is_err());
        assert_eq!(l.reflected().family, 0);
    }

    #[test]
    fn mode_matching() {
        let rbar = roots().r_mu;
        let set = mode_set(rbar, 16, 12).unwrap();
        for md in &set.modes {
            // the derivative jump of w at r̲ is 2m/r̲
            let jump = md.c * (md.y_out - md.y_in);
            assert!((jump - 2.0 * 16.0 / rbar).abs() < 1e-12 * jump.abs());
            assert!((md.c * md.n as f64 + 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn near_far_agree_on_the_zone_boundary() {
        let rbar = 1.45;
        let set = mode_set(rbar, 16, 24).unwrap();
        for &side in &[-1.0, 1.0] {
            let r = rbar * (side * NEAR_ZONE / 16.0).exp();
            for &psi in &[0.0, 0.1, 0.19] {
                let a = set.weighted(r * (1.0 + 1e-12), psi, false);
                let b = set.weighted(r * (1.0 - 1e-12), psi, false);
                assert!((a - b).abs() < 1e-10, "side {side} psi {psi}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn inner_series_matches_ode() {
        // w = r^k f solves w'' + w'/r + (1 − r²/16 − k²/r²) w = 0
        let set = mode_set(1.5, 4, 8).unwrap();
        let md = &set.modes[1];
        let k = md.k;
        let w = |r: f64| r.powf(k) * md.f_series(r).0;
        for &r in &[0.5, 1.0, 1.4] {
            let h = 1e-4;
            let d2 = (w(r + h) - 2.0 * w(r) + w(r - h)) / (h * h);
            let d1 = (w(r + h) - w(r - h)) / (2.0 * h);
            let res = d2 + d1 / r + (1.0 - r * r / 16.0 - k * k / (r * r)) * w(r);
            assert!(res.abs() < 1e-6 * (d2.abs() + k * k / (r * r) * w(r).abs()), "r={r}: {res}");
        }
    }
}
