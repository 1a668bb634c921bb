//! The initial surface as data: one LD solution per level, the bridges at
//! every interface, and the glued graph functions φ^gl_j.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::bridge::{catenoid_graph, BridgeSpec};
use crate::balance::{DerivedParams, ParamVector};
use crate::error::{Error, Result};
use crate::ld::{
    build_ld, cutoff, extract_affine, obstruction_fns, LatticePoint, LdSolution, ObstructionFns, Side,
    SingularLattice,
};
use crate::rld::phi_m;

pub const HOLE_FACTOR: f64 = 9.0;
pub const DEFAULT_R_OUT: f64 = 30.0;
pub const DEFAULT_CORE_B: f64 = 10.0;
/// Below this hole-to-waist ratio the glued geometry is not built.
pub const MIN_FAITHFUL_HOLE: f64 = 2.0;
/// Waist-to-hole ratio of the flat stand-in bridges.
const SCHEMATIC_HOLE: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GeometryMode {
    /// Graphs of φ^gl_j and tilted catenoids through the Fermi map.
    Glued,
    /// Flat sheets at heights jΔ joined by flat-space catenoids; used when τ
    /// is too large for the lattice spacing. Same combinatorics and symmetry.
    Schematic,
}

/// Interface ℓ with its bridges.
#[derive(Clone, Debug, Serialize)]
pub struct Interface {
    pub two_ell: i32,
    pub lattice: SingularLattice,
    pub tau: f64,
    pub h: f64,
    pub kappa: f64,
    pub kappa_perp: f64,
    /// Effective δ' (Euclidean) of the blend annulus D_p(3δ') ∖ D_p(2δ').
    pub delta_prime: f64,
    /// Hole radius (Euclidean) where graph and bridge meet.
    pub hole_radius: f64,
    pub bridges: Vec<BridgeSpec>,
}

/// One side of a level: the lattice L_{j,±} with its data.
#[derive(Clone, Debug)]
pub struct LevelSide {
    pub side: Side,
    pub two_ell: i32,
    pub mu: f64,
    pub mu_prime: f64,
    pub obst: ObstructionFns,
}

#[derive(Clone, Debug)]
pub struct Level {
    pub two_j: i32,
    pub sol: LdSolution,
    pub sides: Vec<LevelSide>,
}

#[derive(Clone, Debug)]
pub struct InitialSurface {
    pub two_big_j: u32,
    pub m: u32,
    pub pv: ParamVector,
    pub derived: DerivedParams,
    pub levels: Vec<Level>,
    pub interfaces: Vec<Interface>,
    pub mode: GeometryMode,
    /// Smallest chord between neighbouring singular points on one level.
    pub spacing: f64,
    /// Level spacing Δ of the schematic mode.
    pub schematic_gap: f64,
    pub r_out: f64,
}

fn side_interface(two_j: i32, side: Side) -> i32 {
    match side {
        Side::Plus => two_j - 1,
        Side::Minus => two_j + 1,
    }
}

impl InitialSurface {
    pub fn new(pv: &ParamVector, derived: &DerivedParams, n_modes: usize) -> Result<Self> {
        let tj = pv.two_big_j as i32;
        let m = derived.m;
        let r_min = derived.r_ell.iter().cloned().fold(f64::INFINITY, f64::min);
        let spacing = 2.0 * r_min * (PI / (2.0 * m as f64)).sin();
        let mut glued = true;
        let mut interfaces = Vec::new();
        for (i, &l) in derived.two_ell.iter().enumerate() {
            let lattice = derived.lattice(l)?;
            let tau = derived.tau_ell[i];
            let r = derived.r_ell[i];
            let conf = (r * r / 8.0).exp();
            let hole = (HOLE_FACTOR * tau * conf).min(spacing / 4.0);
            if hole / (tau * conf) < MIN_FAITHFUL_HOLE {
                glued = false;
            }
            let dp = derived.delta_prime_ell[i]
                .min((derived.delta / 4.0).max(0.6 * hole))
                .max(0.6 * hole)
                .min(spacing / 6.0);
            let (kp, k) = pv.kappa_at(l);
            interfaces.push(Interface {
                two_ell: l,
                lattice,
                tau,
                h: derived.h_ell[i],
                kappa: k,
                kappa_perp: kp,
                delta_prime: dp,
                hole_radius: hole,
                bridges: Vec::new(),
            });
        }
        let mode = if glued { GeometryMode::Glued } else { GeometryMode::Schematic };
        let tau_s = spacing / 4.0 / SCHEMATIC_HOLE;
        let schematic_gap = 2.0 * tau_s * SCHEMATIC_HOLE.acosh();
        for it in interfaces.iter_mut() {
            let conf = (it.lattice.rbar.powi(2) / 8.0).exp();
            for n in 0..m {
                let (pr, pt) = it.lattice.point(n);
                let p = [pr * pt.cos(), pr * pt.sin()];
                let b = match mode {
                    GeometryMode::Glued => {
                        BridgeSpec::new(p, it.tau, it.h, it.kappa, it.kappa_perp, 6.0 * it.delta_prime / conf)?
                    }
                    GeometryMode::Schematic => BridgeSpec::new(
                        p,
                        tau_s,
                        it.two_ell as f64 / 2.0 * schematic_gap,
                        0.0,
                        0.0,
                        1.5 * spacing / 4.0,
                    )?,
                };
                it.bridges.push(b);
            }
        }
        let levels: Vec<Result<Level>> = (-tj..=tj)
            .step_by(2)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&two_j| {
                let plus = if two_j > -tj { Some(derived.lattice(two_j - 1)?) } else { None };
                let minus = if two_j < tj { Some(derived.lattice(two_j + 1)?) } else { None };
                let tp = if plus.is_some() { derived.tau(two_j - 1) } else { 0.0 };
                let tm = if minus.is_some() { derived.tau(two_j + 1) } else { 0.0 };
                let sol = build_ld(plus, minus, tp, tm, n_modes)?;
                let mut sides = Vec::new();
                for (side, lat) in [(Side::Plus, plus), (Side::Minus, minus)] {
                    let Some(lat) = lat else { continue };
                    let l = side_interface(two_j, side);
                    let am = extract_affine(&sol, LatticePoint { side, index: 0 }, derived.tau(l), derived.h(l))?;
                    sides.push(LevelSide { side, two_ell: l, mu: am.mu, mu_prime: am.mu_prime, obst: obstruction_fns(lat)? });
                }
                Ok(Level { two_j, sol, sides })
            })
            .collect();
        let levels = levels.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(InitialSurface {
            two_big_j: pv.two_big_j,
            m,
            pv: pv.clone(),
            derived: derived.clone(),
            levels,
            interfaces,
            mode,
            spacing,
            schematic_gap,
            r_out: DEFAULT_R_OUT,
        })
    }

    pub fn level(&self, two_j: i32) -> Result<&Level> {
        self.levels.iter().find(|l| l.two_j == two_j).ok_or_else(|| Error::Domain(format!("no level 2j = {two_j}")))
    }

    pub fn interface(&self, two_ell: i32) -> Result<&Interface> {
        self.interfaces
            .iter()
            .find(|i| i.two_ell == two_ell)
            .ok_or_else(|| Error::Domain(format!("no interface 2ℓ = {two_ell}")))
    }

    /// φ_j + v̲_j + 𝓔⁻¹κ_j = φ_j + Σ± τ[(κ⊥ − μ)V + (κ − μ')V'].
    pub fn phi_rest(&self, two_j: i32, x: f64, y: f64) -> Result<f64> {
        let lev = self.level(two_j)?;
        let (r, th) = (x.hypot(y), y.atan2(x));
        let mut acc = lev.sol.value(r, th)?;
        for sd in &lev.sides {
            let it = self.interface(sd.two_ell)?;
            // κ_{j,±} = κ_{j∓½}; the odd extension is applied by kappa_at
            let a = it.kappa_perp - sd.mu;
            let b = it.kappa - sd.mu_prime;
            if a != 0.0 || b != 0.0 {
                acc += it.tau * (a * sd.obst.v(r, th)? + b * sd.obst.v_prime(r, th)?);
            }
        }
        Ok(acc)
    }

    /// Nearest singular point of the level: (side, interface, index, distance).
    pub fn nearest_point(&self, two_j: i32, x: f64, y: f64) -> Result<(Side, i32, u32, f64)> {
        let lev = self.level(two_j)?;
        let (r, th) = (x.hypot(y), y.atan2(x));
        let mut best: Option<(Side, i32, u32, f64)> = None;
        for sd in &lev.sides {
            let (n, d) = sd.obst.lattice.nearest(r, th);
            if best.is_none_or(|b| d < b.3) {
                best = Some((sd.side, sd.two_ell, n, d));
            }
        }
        best.ok_or_else(|| Error::Domain("level without lattice".into()))
    }

    /// The glued graph function φ^gl_j on Ω_j.
    pub fn phi_gl(&self, two_j: i32, x: f64, y: f64) -> Result<f64> {
        if self.mode == GeometryMode::Schematic {
            return Ok(two_j as f64 / 2.0 * self.schematic_gap);
        }
        let (side, l, n, d) = self.nearest_point(two_j, x, y)?;
        let it = self.interface(l)?;
        // the hole circle is only approximately round; inside it the catenoid
        // graph still exists down to the waist
        if d < 0.5 * it.hole_radius {
            return Err(Error::Domain(format!("point at distance {d:e} inside the bridge hole {:e}", it.hole_radius)));
        }
        let dp = it.delta_prime;
        if d >= 3.0 * dp {
            return self.phi_rest(two_j, x, y);
        }
        let psi = cutoff(2.0 * dp, 3.0 * dp, d)?;
        let cat = if psi < 1.0 { catenoid_graph(&it.bridges[n as usize], [x, y], side == Side::Plus)?.0 } else { 0.0 };
        let rest = if psi > 0.0 { self.phi_rest(two_j, x, y)? } else { 0.0 };
        Ok(psi * rest + (1.0 - psi) * cat)
    }

    /// Bridge point (ℓ, n) at parameters (s, ϑ).
    pub fn bridge_point(&self, two_ell: i32, n: u32, s: f64, th: f64) -> Result<[f64; 3]> {
        let p = self.interface(two_ell)?.bridges[n as usize].p;
        let o = self.bridge_offset(two_ell, n, s, th)?;
        Ok([p[0] + o[0], p[1] + o[1], o[2]])
    }

    /// Bridge point minus its centre (p, 0), accurate relative to its size.
    pub fn bridge_offset(&self, two_ell: i32, n: u32, s: f64, th: f64) -> Result<[f64; 3]> {
        let it = self.interface(two_ell)?;
        let b = &it.bridges[n as usize];
        match self.mode {
            GeometryMode::Glued => b.offset(s, th),
            GeometryMode::Schematic => {
                let rho = b.tau * s.cosh();
                let r = b.p[0].hypot(b.p[1]);
                let (er, et) = ([b.p[0] / r, b.p[1] / r], [-b.p[1] / r, b.p[0] / r]);
                let (c, sn) = (th.cos(), th.sin());
                Ok([rho * (c * er[0] + sn * et[0]), rho * (c * er[1] + sn * et[1]), b.h + b.tau * s])
            }
        }
    }

    /// Bridge parameter range: the ends are the hole circles.
    pub fn bridge_s_max(&self, two_ell: i32) -> Result<f64> {
        let it = self.interface(two_ell)?;
        let b = &it.bridges[0];
        Ok(match self.mode {
            GeometryMode::Glued => {
                let conf = (it.lattice.rbar.powi(2) / 8.0).exp();
                (it.hole_radius / conf / b.tau).acosh()
            }
            GeometryMode::Schematic => SCHEMATIC_HOLE.acosh(),
        })
    }

    pub fn tau_max(&self) -> f64 {
        self.derived.tau_ell.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeSlope {
    pub two_j: i32,
    pub closed_form: f64,
    pub numeric: f64,
    pub rel_diff: f64,
    pub flagged: bool,
}

/// lim φ^gl_j / r: closed form √π m/2 · Σ± ±τφ_m(r)e^{−r²/8} per lattice,
/// and a numeric value from φ(r)/r at r ∈ {50, 100, 200} fitted by a + b/r².
pub fn cone_slopes(surface: &InitialSurface) -> Result<Vec<ConeSlope>> {
    let m = surface.m as f64;
    let unit = |l: i32| -> Result<f64> {
        let it = surface.interface(l)?;
        let r = it.lattice.rbar;
        Ok(PI.sqrt() * m / 2.0 * it.tau * phi_m(r)?.0 * (-r * r / 8.0).exp())
    };
    let mut out = Vec::new();
    for lev in &surface.levels {
        let mut closed = 0.0;
        for sd in &lev.sides {
            closed += sd.side.sign() * unit(sd.two_ell)?;
        }
        let rs = [50.0, 100.0, 200.0];
        let q: Vec<f64> = rs.iter().map(|&r| Ok(lev.sol.value(r, 0.1)? / r)).collect::<Result<_>>()?;
        // least squares for q = a + b/r²
        let xs: Vec<f64> = rs.iter().map(|r| 1.0 / (r * r)).collect();
        let (n, sx, sq) = (3.0, xs.iter().sum::<f64>(), q.iter().sum::<f64>());
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxq: f64 = xs.iter().zip(&q).map(|(x, y)| x * y).sum();
        let b = (n * sxq - sx * sq) / (n * sxx - sx * sx);
        let a = (sq - b * sx) / n;
        let scale = closed.abs().max(a.abs());
        let rel = if scale > 0.0 { (a - closed).abs() / scale } else { 0.0 };
        out.push(ConeSlope {
            two_j: lev.two_j,
            closed_form: closed,
            numeric: a,
            rel_diff: rel,
            flagged: rel > 0.02 && (a - closed).abs() > 1e-9,
        });
    }
    Ok(out)
}

/// Gap φ^gl_{j+1} − φ^gl_j at sampled points outside D(δ') and the holes of both levels,
/// minimum over samples, for each consecutive pair.
pub fn level_gaps(surface: &InitialSurface, samples: &[(f64, f64)]) -> Result<Vec<(i32, f64)>> {
    let mut out = Vec::new();
    for w in surface.levels.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        let mut min_gap = f64::INFINITY;
        for &(x, y) in samples {
            let far = |two_j: i32| -> Result<bool> {
                let (_, l, _, d) = surface.nearest_point(two_j, x, y)?;
                let it = surface.interface(l)?;
                Ok(d > it.delta_prime.max(it.hole_radius))
            };
            if far(lo.two_j)? && far(hi.two_j)? {
                min_gap = min_gap.min(surface.phi_gl(hi.two_j, x, y)? - surface.phi_gl(lo.two_j, x, y)?);
            }
        }
        out.push((lo.two_j, min_gap));
    }
    Ok(out)
}
