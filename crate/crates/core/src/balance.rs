//! Parameter layer: half-integer stack indices, the unbalancing parameters,
//! the derived radii/strengths/heights, the leading-order linear mismatch map
//! A and its inverse Z, and the fixed-point iteration that removes the true
//! mismatches of the LD solutions.
//!
//! Half-integers are carried doubled (`two_*: i32`) throughout.

use crate::error::{Error, Result};
use crate::ld::{build_ld, extract_affine, AffineMismatch, LatticePoint, SingularLattice, Side, DEFAULT_MODES};
use crate::rld::{admissible_window, h_hat_inv, phi_one};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

// ---------------------------------------------------------------- indices

/// A level j ∈ {−J, …, J} or an interface ℓ ∈ {−J+½, …, J−½}, doubled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StackIndex {
    pub two_big_j: u32,
    pub two_idx: i32,
}

impl StackIndex {
    pub fn level(two_big_j: u32, two_j: i32) -> Result<Self> {
        let tj = two_big_j as i32;
        if two_j.abs() > tj || (two_j - tj).rem_euclid(2) != 0 {
            return Err(Error::Domain(format!("2j = {two_j} is not a level for 2J = {two_big_j}")));
        }
        Ok(StackIndex { two_big_j, two_idx: two_j })
    }

    pub fn interface(two_big_j: u32, two_ell: i32) -> Result<Self> {
        let tj = two_big_j as i32;
        if two_ell.abs() > tj - 1 || (two_ell - tj + 1).rem_euclid(2) != 0 {
            return Err(Error::Domain(format!("2ℓ = {two_ell} is not an interface for 2J = {two_big_j}")));
        }
        Ok(StackIndex { two_big_j, two_idx: two_ell })
    }

    pub fn value(&self) -> f64 {
        self.two_idx as f64 / 2.0
    }
}

/// Family (0 or 1) of the lattice at interface ℓ: ℓ mod 2 for integer ℓ,
/// (ℓ + ½) mod 2 otherwise.
pub fn sgn_interface(two_ell: i32) -> u8 {
    if two_ell.rem_euclid(2) == 0 {
        (two_ell / 2).rem_euclid(2) as u8
    } else {
        ((two_ell + 1) / 2).rem_euclid(2) as u8
    }
}

/// Interfaces ℓ = −J+½, …, J−½ (doubled, ascending).
pub fn interfaces(two_big_j: u32) -> Vec<i32> {
    let tj = two_big_j as i32;
    (0..two_big_j as i32).map(|i| -tj + 1 + 2 * i).collect()
}

/// Positive interfaces, ascending.
pub fn positive_interfaces(two_big_j: u32) -> Vec<i32> {
    interfaces(two_big_j).into_iter().filter(|&l| l > 0).collect()
}

/// Index set of ζ_i and ζ'_i: ½, 3/2, …, J−1 or 1, 2, …, J−1 (doubled).
pub fn zeta_indices(two_big_j: u32) -> Vec<i32> {
    let tj = two_big_j as i32;
    let start = if tj % 2 == 1 { 1 } else { 2 };
    (start..=tj - 2).step_by(2).collect()
}

/// Independent mismatch slots (2j, side) on levels j ≥ 0: (J, +), both
/// sides for 0 < j < J, and (0, +) for integer J.
pub fn slots(two_big_j: u32) -> Vec<(i32, Side)> {
    let tj = two_big_j as i32;
    let mut out = vec![(tj, Side::Plus)];
    let mut j = tj - 2;
    while j > 0 {
        out.push((j, Side::Plus));
        out.push((j, Side::Minus));
        j -= 2;
    }
    if j == 0 {
        out.push((0, Side::Plus));
    }
    out
}

// ---------------------------------------------------------------- parameters

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamVector {
    pub two_big_j: u32,
    pub zeta: f64,
    /// Indexed as `zeta_indices`.
    pub zeta_i: Vec<f64>,
    pub zeta_prime: f64,
    pub zeta_prime_i: Vec<f64>,
    /// Indexed as `positive_interfaces`.
    pub kappa_perp: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl ParamVector {
    pub fn zero(two_big_j: u32) -> Result<Self> {
        if two_big_j == 0 {
            return Err(Error::Domain("J must be positive".into()));
        }
        let ni = zeta_indices(two_big_j).len();
        let nk = positive_interfaces(two_big_j).len();
        Ok(ParamVector {
            two_big_j,
            zeta: 0.0,
            zeta_i: vec![0.0; ni],
            zeta_prime: 0.0,
            zeta_prime_i: vec![0.0; ni],
            kappa_perp: vec![0.0; nk],
            kappa: vec![0.0; nk],
        })
    }

    /// Dimension 4J.
    pub fn dim(&self) -> usize {
        2 * self.two_big_j as usize
    }

    /// Flat layout [ζ, ζ_i…, ζ', ζ'_i…, κ⊥…, κ…].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = vec![self.zeta];
        v.extend(&self.zeta_i);
        v.push(self.zeta_prime);
        v.extend(&self.zeta_prime_i);
        v.extend(&self.kappa_perp);
        v.extend(&self.kappa);
        v
    }

    pub fn from_flat(two_big_j: u32, v: &[f64]) -> Result<Self> {
        let mut p = Self::zero(two_big_j)?;
        if v.len() != p.dim() {
            return Err(Error::Domain(format!("flat vector has length {}, expected {}", v.len(), p.dim())));
        }
        let ni = p.zeta_i.len();
        let nk = p.kappa.len();
        p.zeta = v[0];
        p.zeta_i.copy_from_slice(&v[1..1 + ni]);
        p.zeta_prime = v[1 + ni];
        p.zeta_prime_i.copy_from_slice(&v[2 + ni..2 + 2 * ni]);
        p.kappa_perp.copy_from_slice(&v[2 + 2 * ni..2 + 2 * ni + nk]);
        p.kappa.copy_from_slice(&v[2 + 2 * ni + nk..]);
        Ok(p)
    }

    /// ζ_x with ζ₀ = 0, ζ_J = 0 and the odd extension ζ_{−x} = −ζ_x.
    pub fn zeta_at(&self, two_x: i32) -> f64 {
        Self::lookup(&self.zeta_i, self.two_big_j, two_x)
    }

    pub fn zeta_prime_at(&self, two_x: i32) -> f64 {
        Self::lookup(&self.zeta_prime_i, self.two_big_j, two_x)
    }

    fn lookup(vals: &[f64], two_big_j: u32, two_x: i32) -> f64 {
        if two_x == 0 || two_x.abs() >= two_big_j as i32 {
            return 0.0;
        }
        if two_x < 0 {
            return -Self::lookup(vals, two_big_j, -two_x);
        }
        match zeta_indices(two_big_j).iter().position(|&i| i == two_x) {
            Some(p) => vals[p],
            None => 0.0,
        }
    }

    /// (κ⊥_ℓ, κ_ℓ) with κ_{−ℓ} = −κ_ℓ and κ₀ = 0.
    pub fn kappa_at(&self, two_ell: i32) -> (f64, f64) {
        if two_ell == 0 {
            return (0.0, 0.0);
        }
        if two_ell < 0 {
            let (a, b) = self.kappa_at(-two_ell);
            return (-a, -b);
        }
        match positive_interfaces(self.two_big_j).iter().position(|&l| l == two_ell) {
            Some(p) => (self.kappa_perp[p], self.kappa[p]),
            None => (0.0, 0.0),
        }
    }

    /// (|ζ| + |𝛇| + |ζ'| + |𝛇'|, |𝛋|), each with ℓ¹ norms.
    pub fn norms(&self) -> (f64, f64) {
        let z = self.zeta.abs()
            + self.zeta_i.iter().map(|v| v.abs()).sum::<f64>()
            + self.zeta_prime.abs()
            + self.zeta_prime_i.iter().map(|v| v.abs()).sum::<f64>();
        let k = 0.0 + self.kappa.iter().chain(&self.kappa_perp).map(|v| v.abs()).sum::<f64>();
        (z, k)
    }

    pub fn in_ball(&self, c1: f64) -> bool {
        let (z, k) = self.norms();
        z <= c1 && k <= c1
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivedParams {
    pub two_big_j: u32,
    pub m: u32,
    /// Interfaces (doubled) with their r_ℓ, τ_ℓ, h_ℓ, δ'_ℓ.
    pub two_ell: Vec<i32>,
    pub r_ell: Vec<f64>,
    pub tau_ell: Vec<f64>,
    pub h_ell: Vec<f64>,
    pub delta_prime_ell: Vec<f64>,
    pub phi_j: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl DerivedParams {
    fn pos(&self, two_ell: i32) -> Option<usize> {
        self.two_ell.iter().position(|&l| l == two_ell)
    }

    /// τ_ℓ, zero outside the interface range.
    pub fn tau(&self, two_ell: i32) -> f64 {
        self.pos(two_ell).map_or(0.0, |p| self.tau_ell[p])
    }

    pub fn r(&self, two_ell: i32) -> Option<f64> {
        self.pos(two_ell).map(|p| self.r_ell[p])
    }

    pub fn h(&self, two_ell: i32) -> f64 {
        self.pos(two_ell).map_or(0.0, |p| self.h_ell[p])
    }

    pub fn lattice(&self, two_ell: i32) -> Result<SingularLattice> {
        let r = self.r(two_ell).ok_or_else(|| Error::Domain(format!("no interface 2ℓ = {two_ell}")))?;
        SingularLattice::new(sgn_interface(two_ell), r, self.m)
    }
}

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_C1: f64 = 50.0;

pub fn derive_params(pv: &ParamVector, m: u32) -> Result<DerivedParams> {
    derive_params_alpha(pv, m, DEFAULT_ALPHA)
}

pub fn derive_params_alpha(pv: &ParamVector, m: u32, alpha: f64) -> Result<DerivedParams> {
    let tj = pv.two_big_j as i32;
    let mf = m as f64;
    let big_j = tj as f64 / 2.0;
    let two_ell = interfaces(pv.two_big_j);
    let r_top = h_hat_inv(pv.zeta_prime / mf)?;
    let zi = zeta_indices(pv.two_big_j);
    let (lo, hi) = admissible_window();
    let mut r_ell = Vec::with_capacity(two_ell.len());
    for &l in &two_ell {
        // Σ_{i = |ℓ|+½}^{J−1} ζ'_i
        let s: f64 = zi.iter().zip(&pv.zeta_prime_i).filter(|(&i, _)| i > l.abs()).map(|(_, v)| v).sum();
        let r = r_top - 4.0 * r_top * r_top * s / (mf * mf);
        if !(r > lo && r < hi) {
            return Err(Error::OutOfBall(format!("r_ℓ = {r} at 2ℓ = {l} left the admissible window")));
        }
        r_ell.push(r);
    }
    let phi_j = phi_one(r_top, m)?;
    let base = ((PI / (2.0 * big_j + 1.0)).cos() - 1.0) * phi_j + pv.zeta;
    let tau_ell: Vec<f64> = two_ell
        .iter()
        .map(|&l| {
            // Σ_{0 < i ≤ |ℓ|−½} ζ_i
            let s: f64 = zi.iter().zip(&pv.zeta_i).filter(|(&i, _)| i > 0 && i < l.abs()).map(|(_, v)| v).sum();
            (PI * l as f64 / 2.0 / (2.0 * big_j + 1.0)).cos() / mf * (base + s / phi_j).exp()
        })
        .collect();
    let tau_of = |l: i32| two_ell.iter().position(|&x| x == l).map_or(0.0, |p| tau_ell[p]);
    let h_ell: Vec<f64> = two_ell.iter().map(|&l| (tau_of(l - 2) - tau_of(l + 2)) * phi_j / 2.0).collect();
    let delta_prime_ell = tau_ell.iter().map(|t| t.powf(alpha)).collect();
    Ok(DerivedParams {
        two_big_j: pv.two_big_j,
        m,
        two_ell,
        r_ell,
        tau_ell,
        h_ell,
        delta_prime_ell,
        phi_j,
        delta: 1.0 / (100.0 * mf),
        alpha,
    })
}

// ---------------------------------------------------------------- linear algebra

#[derive(Clone, Debug, Serialize)]
pub struct ToeplitzEigs {
    /// Closed form, descending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Brute-force eigenvalues of the explicit matrix, descending.
    pub brute_values: Vec<f64>,
    /// max_k ‖T e_k − λ_k e_k‖ / ‖e_k‖ of the closed-form pairs.
    pub residual: f64,
}

/// Eigenpairs of the N×N tridiagonal matrix with zero diagonal and unit
/// off-diagonals: λ_k = 2cos(kπ/(N+1)), e_k = (sin(jkπ/(N+1)))_j.
pub fn toeplitz_eigs(n: usize) -> Result<ToeplitzEigs> {
    if n == 0 {
        return Err(Error::Domain("toeplitz_eigs needs N ≥ 1".into()));
    }
    let w = PI / (n + 1) as f64;
    let values: Vec<f64> = (1..=n).map(|k| 2.0 * (k as f64 * w).cos()).collect();
    let vectors: Vec<Vec<f64>> =
        (1..=n).map(|k| (1..=n).map(|j| (j as f64 * k as f64 * w).sin()).collect()).collect();
    let t = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 });
    let mut brute: Vec<f64> = SymmetricEigen::new(t.clone()).eigenvalues.iter().copied().collect();
    brute.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut residual = 0.0f64;
    for (lam, v) in values.iter().zip(&vectors) {
        let vv = nalgebra::DVector::from_column_slice(v);
        let r = (&t * &vv - &vv * *lam).norm() / vv.norm();
        residual = residual.max(r);
    }
    Ok(ToeplitzEigs { values, vectors, brute_values: brute, residual })
}

fn cosj(two_big_j: u32, x: f64) -> f64 {
    (PI * x / (two_big_j as f64 + 1.0)).cos()
}

/// |cos(π/(2J+1)) − (cos(π(j−3/2)/(2J+1)) + cos(π(j+½)/(2J+1)))/(2cos(π(j−½)/(2J+1)))|.
pub fn trig_balance_check(two_big_j: u32, two_j: i32) -> f64 {
    let j = two_j as f64 / 2.0;
    let c = |x: f64| cosj(two_big_j, x);
    (c(1.0) - (c(j - 1.5) + c(j + 0.5)) / (2.0 * c(j - 0.5))).abs()
}

/// Leading-order mismatches (ν, ν') per slot, κ shift included.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SlotValues {
    pub slots: Vec<(i32, Side)>,
    pub mu: Vec<f64>,
    pub mu_prime: Vec<f64>,
}

impl SlotValues {
    pub fn to_flat(&self) -> Vec<f64> {
        self.mu.iter().chain(&self.mu_prime).copied().collect()
    }

    pub fn residual(&self) -> f64 {
        let a = self.mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let b = self.mu_prime.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        a + b
    }
}

/// The shift (κ⊥_{j∓½}, κ_{j∓½}) subtracted from the slot (j, ±).
pub fn kappa_shift(pv: &ParamVector, two_j: i32, side: Side) -> (f64, f64) {
    let two_ell = match side {
        Side::Plus => two_j - 1,
        Side::Minus => two_j + 1,
    };
    pv.kappa_at(two_ell)
}

pub fn predicted_mismatch(pv: &ParamVector) -> SlotValues {
    let tj = pv.two_big_j;
    let c = |x: f64| cosj(tj, x);
    let sl = slots(tj);
    let mut mu = Vec::with_capacity(sl.len());
    let mut mu_prime = Vec::with_capacity(sl.len());
    for &(two_j, side) in &sl {
        let j = two_j as f64 / 2.0;
        let (kp, k) = kappa_shift(pv, two_j, side);
        if two_j == 0 {
            // only for integer J; κ_{−½} = −κ_{½} enters with a plus sign
            let z1 = pv.zeta_at(2);
            mu.push(pv.zeta - c(1.5) / (2.0 * c(0.5)) * z1 - kp);
            mu_prime.push(-k);
            continue;
        }
        match side {
            Side::Plus => {
                let zj = pv.zeta_at(two_j);
                let zjm = pv.zeta_at(two_j - 2);
                mu.push(pv.zeta - (c(j + 0.5) * zj - c(j - 1.5) * zjm) / (2.0 * c(j - 0.5)) - kp);
                let zp = if two_j == tj as i32 { pv.zeta_prime } else { pv.zeta_prime_at(two_j) };
                mu_prime.push(zp - k);
            }
            Side::Minus => {
                let zjp = pv.zeta_at(two_j + 2);
                let zj = pv.zeta_at(two_j);
                mu.push(-pv.zeta + (c(j + 1.5) * zjp - c(j - 0.5) * zj) / (2.0 * c(j + 0.5)) - kp);
                // both sides of level j see +ζ'_j (the dislocation enters with the
                // sign of the side twice)
                mu_prime.push(pv.zeta_prime_at(two_j) - k);
            }
        }
    }
    SlotValues { slots: sl, mu, mu_prime }
}

/// Full ν for every level j ∈ {−J, …, J} and side, extended by the odd
/// symmetry; used to check the pair relations.
pub fn predicted_all_levels(pv: &ParamVector) -> Vec<((i32, Side), f64)> {
    let base = predicted_mismatch(pv);
    let mut out = Vec::new();
    for (i, &(two_j, side)) in base.slots.iter().enumerate() {
        out.push(((two_j, side), base.mu[i]));
        let mirror = match side {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        };
        if two_j != 0 || side == Side::Plus {
            out.push(((-two_j, mirror), -base.mu[i]));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ZMap {
    pub two_big_j: u32,
    pub a: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    /// ‖A‖_∞ ‖A⁻¹‖_∞.
    pub condition: f64,
}

impl ZMap {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.z.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Inverse by Gaussian elimination with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()).unwrap();
        if m[piv][col].abs() < 1e-13 * scale {
            return Err(Error::SingularMatrix(m[piv][col]));
        }
        m.swap(col, piv);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    let (src, dst) = if i < col {
                        let (lo, hi) = m.split_at_mut(col);
                        (&hi[0], &mut lo[i])
                    } else {
                        let (lo, hi) = m.split_at_mut(i);
                        (&lo[col], &mut hi[0])
                    };
                    for k in 0..2 * n {
                        dst[k] -= f * src[k];
                    }
                }
            }
        }
    }
    Ok(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn inf_norm(a: &[Vec<f64>]) -> f64 {
    a.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn assemble_z(two_big_j: u32) -> Result<ZMap> {
    if two_big_j == 0 || two_big_j > 20 {
        return Err(Error::Domain(format!("assemble_z supports 1/2 ≤ J ≤ 10, got 2J = {two_big_j}")));
    }
    let zero = ParamVector::zero(two_big_j)?;
    let n = zero.dim();
    let mut a = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let out = predicted_mismatch(&ParamVector::from_flat(two_big_j, &e)?).to_flat();
        for row in 0..n {
            a[row][col] = out[row];
        }
    }
    let z = invert(&a)?;
    let condition = inf_norm(&a) * inf_norm(&z);
    Ok(ZMap { two_big_j, a, z, condition })
}

// ---------------------------------------------------------------- true mismatches

/// Per-slot extracted mismatch with the κ shift applied.
#[derive(Clone, Debug, Serialize)]
pub struct ActualMismatch {
    pub values: SlotValues,
    pub raw: Vec<AffineMismatch>,
}

/// Levels j ≥ 0 each get φ_j = τ_{j,+}Φ[L_{j−½}] − τ_{j,−}Φ[L_{j+½}]; the
/// slots are read off at the lattice point on the symmetry axis.
pub fn actual_mismatch(pv: &ParamVector, dp: &DerivedParams, n_modes: usize) -> Result<ActualMismatch> {
    let tj = pv.two_big_j as i32;
    let sl = slots(pv.two_big_j);
    let raw: Vec<Result<AffineMismatch>> = sl
        .par_iter()
        .map(|&(two_j, side)| {
            let plus = if two_j > -tj { Some(dp.lattice(two_j - 1)?) } else { None };
            let minus = if two_j < tj { Some(dp.lattice(two_j + 1)?) } else { None };
            let tau_p = if plus.is_some() { dp.tau(two_j - 1) } else { 0.0 };
            let tau_m = if minus.is_some() { dp.tau(two_j + 1) } else { 0.0 };
            let sol = build_ld(plus, minus, tau_p, tau_m, n_modes)?;
            let (tau, h) = match side {
                Side::Plus => (tau_p, dp.h(two_j - 1)),
                Side::Minus => (tau_m, dp.h(two_j + 1)),
            };
            extract_affine(&sol, LatticePoint { side, index: 0 }, tau, h)
        })
        .collect();
    let raw = raw.into_iter().collect::<Result<Vec<_>>>()?;
    let mut mu = Vec::with_capacity(sl.len());
    let mut mu_prime = Vec::with_capacity(sl.len());
    for (am, &(two_j, side)) in raw.iter().zip(&sl) {
        let (kp, k) = kappa_shift(pv, two_j, side);
        mu.push(am.mu - kp);
        mu_prime.push(am.mu_prime - k);
    }
    Ok(ActualMismatch { values: SlotValues { slots: sl, mu, mu_prime }, raw })
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonReport {
    pub two_big_j: u32,
    pub m: u32,
    pub pv: ParamVector,
    pub derived: DerivedParams,
    pub history: Vec<f64>,
    pub final_mismatch: SlotValues,
    pub z_condition: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    /// Secant (Broyden) correction of Z after each accepted step. With this
    /// off, Z stays the inverse of the leading-order map A.
    pub broyden: bool,
    pub max_iter: usize,
    pub c1: f64,
    pub n_modes: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-6, broyden: true, max_iter: 12, c1: DEFAULT_C1, n_modes: DEFAULT_MODES, max_halvings: 4 }
    }
}

/// pv ← pv − Z(actual mismatches) until max|μ| + max|μ'| < tol.
pub fn newton_solve(m: u32, pv0: ParamVector, opts: NewtonOptions) -> Result<NewtonReport> {
    let two_big_j = pv0.two_big_j;
    let zmap = assemble_z(two_big_j)?;
    let mut z = zmap.z.clone();
    if !pv0.in_ball(opts.c1) {
        return Err(Error::OutOfBall(format!("initial parameters {:?}", pv0.norms())));
    }
    let eval = |pv: &ParamVector| -> Result<(DerivedParams, SlotValues)> {
        let dp = derive_params(pv, m)?;
        let am = actual_mismatch(pv, &dp, opts.n_modes)?;
        Ok((dp, am.values))
    };
    let mut pv = pv0;
    let (mut dp, mut f) = eval(&pv)?;
    let mut res = f.residual();
    let mut history = vec![res];
    for _ in 0..opts.max_iter {
        if res < opts.tol {
            break;
        }
        let fx = f.to_flat();
        let step: Vec<f64> = z.iter().map(|row| row.iter().zip(&fx).map(|(a, b)| a * b).sum()).collect();
        let x = pv.to_flat();
        let mut s = 1.0;
        let mut accepted = None;
        for attempt in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a - s * b).collect();
            let cand = ParamVector::from_flat(two_big_j, &trial)?;
            if !cand.in_ball(opts.c1) {
                if attempt == opts.max_halvings {
                    return Err(Error::OutOfBall(format!("norms {:?} exceed c₁ = {}", cand.norms(), opts.c1)));
                }
                s *= 0.5;
                continue;
            }
            let (dp2, f2) = eval(&cand)?;
            let r2 = f2.residual();
            if r2 < res || attempt == opts.max_halvings {
                accepted = Some((cand, dp2, f2, r2));
                break;
            }
            s *= 0.5;
        }
        let (c, d, ff, r) = accepted.expect("a step is always accepted after the last halving");
        if opts.broyden {
            let dx: Vec<f64> = c.to_flat().iter().zip(&x).map(|(a, b)| a - b).collect();
            let df: Vec<f64> = ff.to_flat().iter().zip(&fx).map(|(a, b)| a - b).collect();
            broyden_inverse_update(&mut z, &dx, &df);
        }
        pv = c;
        dp = d;
        f = ff;
        res = r;
        history.push(res);
    }
    if res >= opts.tol {
        return Err(Error::NoConvergence { iters: history.len() - 1, trace: history });
    }
    Ok(NewtonReport { two_big_j, m, pv, derived: dp, history, final_mismatch: f, z_condition: zmap.condition })
}

/// Z ← Z + (dx − Z df) dxᵀZ / (dxᵀ Z df); skipped when the denominator is
/// negligible.
fn broyden_inverse_update(z: &mut [Vec<f64>], dx: &[f64], df: &[f64]) {
    let n = dx.len();
    let zdf: Vec<f64> = (0..n).map(|i| (0..n).map(|k| z[i][k] * df[k]).sum()).collect();
    let xtz: Vec<f64> = (0..n).map(|k| (0..n).map(|i| dx[i] * z[i][k]).sum()).collect();
    let den: f64 = dx.iter().zip(&zdf).map(|(a, b)| a * b).sum();
    let dxn: f64 = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
    let zn: f64 = zdf.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den.abs() <= 1e-12 * dxn * zn || den == 0.0 {
        return;
    }
    for i in 0..n {
        let u = (dx[i] - zdf[i]) / den;
        for k in 0..n {
            z[i][k] += u * xtz[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rld::roots;

    #[test]
    fn signature_values() {
        assert_eq!(sgn_interface(0), 0);
        assert_eq!(sgn_interface(2), 1);
        assert_eq!(sgn_interface(1), 1);
        assert_eq!(sgn_interface(-1), 0);
        assert_eq!(sgn_interface(-2), 1);
        assert_eq!(sgn_interface(3), 0);
    }

    #[test]
    fn index_sets() {
        assert_eq!(interfaces(1), vec![0]);
        assert_eq!(interfaces(2), vec![-1, 1]);
        assert_eq!(zeta_indices(5), vec![1, 3]);
        assert_eq!(zeta_indices(4), vec![2]);
        assert_eq!(positive_interfaces(5), vec![2, 4]);
        assert_eq!(slots(1), vec![(1, Side::Plus)]);
        assert_eq!(slots(2), vec![(2, Side::Plus), (0, Side::Plus)]);
        for tj in 1..=10u32 {
            let pv = ParamVector::zero(tj).unwrap();
            assert_eq!(pv.to_flat().len(), 2 * tj as usize);
            assert_eq!(slots(tj).len() * 2, 2 * tj as usize);
        }
        assert!(StackIndex::level(3, 1).is_ok());
        assert!(StackIndex::level(3, 2).is_err());
        assert!(StackIndex::interface(3, 2).is_ok());
        assert!(StackIndex::interface(3, 3).is_err());
    }

    #[test]
    fn derived_at_origin() {
        let m = 32;
        let dp = derive_params(&ParamVector::zero(1).unwrap(), m).unwrap();
        assert!((dp.tau_ell[0] - (-dp.phi_j).exp() / m as f64).abs() < 1e-13 * dp.tau_ell[0]);
        assert_eq!(dp.h_ell[0], 0.0);
        let dp = derive_params(&ParamVector::zero(2).unwrap(), m).unwrap();
        assert_eq!(dp.tau_ell[0], dp.tau_ell[1]);
        assert!((dp.h_ell[1] - dp.tau_ell[0] * dp.phi_j / 2.0).abs() < 1e-18);
        assert_eq!(dp.h_ell[0], -dp.h_ell[1]);
        let dp = derive_params(&ParamVector::zero(5).unwrap(), m).unwrap();
        for r in &dp.r_ell {
            assert_eq!(*r, roots().r_mu);
        }
    }

    #[test]
    fn toeplitz() {
        let e = toeplitz_eigs(2).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15 && (e.values[1] + 1.0).abs() < 1e-15);
        let e = toeplitz_eigs(3).unwrap();
        assert!((e.values[0] - 2f64.sqrt()).abs() < 1e-15 && e.values[1].abs() < 1e-15);
        assert!(e.vectors.len() == 3);
        let e = toeplitz_eigs(5).unwrap();
        assert!(e.vectors[0].iter().all(|&v| v > 0.0));
        for n in 1..=20 {
            let e = toeplitz_eigs(n).unwrap();
            assert!(e.residual < 1e-10);
            for (a, b) in e.values.iter().zip(&e.brute_values) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn a_inverse_and_pairs() {
        for tj in 1..=5u32 {
            let z = assemble_z(tj).unwrap();
            let n = z.a.len();
            for i in 0..n {
                for j in 0..n {
                    let s: f64 = (0..n).map(|k| z.a[i][k] * z.z[k][j]).sum();
                    assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
            let v: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 / 5.0 - 1.0).collect();
            let pv = ParamVector::from_flat(tj, &v).unwrap();
            let all = predicted_all_levels(&pv);
            let get = |two_j: i32, s: Side| all.iter().find(|(k, _)| *k == (two_j, s)).map(|(_, v)| *v);
            let mut two_j = tj as i32;
            while two_j >= 2 {
                let (Some(a), Some(b)) = (get(two_j, Side::Plus), get(two_j - 2, Side::Minus)) else {
                    panic!("missing slot")
                };
                let kp = pv.kappa_at(two_j - 1).0;
                assert!((a + b + 2.0 * kp).abs() < 1e-13, "2J={tj} 2j={two_j}");
                two_j -= 2;
            }
        }
    }

    #[test]
    fn trig_identity() {
        assert!(trig_balance_check(2, 2) < 1e-14);
        for two_j in (-3..=5).step_by(2) {
            assert!(trig_balance_check(5, two_j) < 1e-13);
        }
        let w = PI / 21.0;
        assert!((w.cos() - (2.0 * w).sin() / (2.0 * w.sin())).abs() < 1e-15);
    }
}
