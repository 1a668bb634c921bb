//! Sup norms of H^{2ω} on the initial surface, region by region, from the
//! smooth descriptions (graphs and bridges), never from the mesh.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::bridge::{bridge_weighted_curvature, catenoid_graph};
use super::curvature::graph_weighted_mean_curvature;
use super::surface::{GeometryMode, InitialSurface};
use crate::error::{Error, Result};
use crate::ld::{cutoff, Side};

/// Bridge core: ρ ≤ b τ.
pub const CORE_B: f64 = 10.0;
const ANGLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Region {
    /// (a) graphs away from gluing annuli and obstruction supports.
    Graph,
    /// (b) bridge cores.
    BridgeCore,
    /// (c) gluing annuli D_p(3δ') ∖ D_p(2δ').
    GluingAnnulus,
    /// (d) obstruction annuli D_p(2δ) ∖ D_p(δ).
    ObstructionAnnulus,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualSample {
    pub region: Region,
    /// Level 2j for graph samples, interface 2ℓ for bridge samples.
    pub index: i32,
    pub side: Option<Side>,
    pub point: [f64; 3],
    /// Local scale: distance to the nearest singular point, or ρ on a bridge.
    pub scale: f64,
    pub h2w: f64,
    /// scale²·|H^{2ω}|, the scale-invariant size of the residual.
    pub weighted: f64,
    /// |H^{2ω}| / (|z| + τ) on cores, scale²|H^{2ω}| / τ^{1+α} on gluing
    /// annuli, |H^{2ω}| elsewhere.
    pub normalized: f64,
    /// The designed term τ((κ⊥ − μ)W + (κ − μ')W') on obstruction annuli.
    pub w_term: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionSummary {
    pub region: Region,
    pub count: usize,
    pub sup_abs: f64,
    pub sup_normalized: f64,
    pub worst: Option<ResidualSample>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub two_big_j: u32,
    pub m: u32,
    pub tau_max: f64,
    pub alpha: f64,
    pub regions: Vec<RegionSummary>,
    pub samples: Vec<ResidualSample>,
}

impl ResidualReport {
    pub fn region(&self, r: Region) -> &RegionSummary {
        self.regions.iter().find(|s| s.region == r).expect("every region is summarised")
    }
}

fn ring(center: [f64; 2], d: f64, phase: f64) -> impl Iterator<Item = [f64; 2]> {
    (0..ANGLES).map(move |k| {
        let a = phase + 2.0 * PI * (k as f64 + 0.5) / ANGLES as f64;
        [center[0] + d * a.cos(), center[1] + d * a.sin()]
    })
}

/// 𝓛v = Δv − ½x·∇v + ½v by Richardson-combined central differences.
fn jacobi_fd<F: Fn(f64, f64) -> Result<f64>>(v: F, x: f64, y: f64, h: f64) -> Result<f64> {
    let st = |h: f64| -> Result<(f64, f64, f64, f64)> {
        let c = v(x, y)?;
        let (e, w, n, s) = (v(x + h, y)?, v(x - h, y)?, v(x, y + h)?, v(x, y - h)?);
        Ok((c, (e - w) / (2.0 * h), (n - s) / (2.0 * h), (e + w + n + s - 4.0 * c) / (h * h)))
    };
    let a = st(h)?;
    let b = st(h / 2.0)?;
    let r = |p: f64, q: f64| (4.0 * q - p) / 3.0;
    let (vx, vy, lap) = (r(a.1, b.1), r(a.2, b.2), r(a.3, b.3));
    Ok(lap - 0.5 * (x * vx + y * vy) + 0.5 * b.0)
}

pub fn residual_report(surface: &InitialSurface) -> Result<ResidualReport> {
    if surface.mode != GeometryMode::Glued {
        return Err(Error::Domain("the schematic stand-in has no meaningful residual".into()));
    }
    let alpha = surface.derived.alpha;
    let delta = surface.derived.delta;
    let mut jobs: Vec<(Region, i32, Option<Side>, [f64; 2])> = Vec::new();
    for lev in &surface.levels {
        for sd in &lev.sides {
            let it = surface.interface(sd.two_ell)?;
            let (pr, pt) = it.lattice.point(0);
            let p = [pr * pt.cos(), pr * pt.sin()];
            let dp = it.delta_prime;
            let side = Some(sd.side);
            for f in [2.0, 2.25, 2.5, 2.75, 3.0] {
                jobs.extend(ring(p, f * dp, 0.1).map(|x| (Region::GluingAnnulus, lev.two_j, side, x)));
            }
            for f in [1.0, 1.25, 1.5, 1.75, 2.0] {
                if f * delta > 3.0 * dp {
                    jobs.extend(ring(p, f * delta, 0.2).map(|x| (Region::ObstructionAnnulus, lev.two_j, side, x)));
                }
            }
            let lo = (3.0 * dp).max(2.0 * delta) * 1.05;
            let hi = 0.5 * surface.spacing;
            for k in 0..8 {
                let d = lo * (hi / lo).powf(k as f64 / 7.0);
                jobs.extend(ring(p, d, 0.3).map(|x| (Region::Graph, lev.two_j, side, x)));
            }
        }
        let m = surface.m as f64;
        for i in 0..12 {
            for k in 0..6 {
                let r = 0.15 + 3.5 * i as f64 / 11.0;
                let th = PI / m * (k as f64 + 0.5) / 6.0;
                jobs.push((Region::Graph, lev.two_j, None, [r * th.cos(), r * th.sin()]));
            }
        }
    }

    let graph_samples: Vec<Option<ResidualSample>> = jobs
        .par_iter()
        .map(|&(region, two_j, side, x)| graph_sample(surface, region, two_j, side, x, alpha, delta))
        .collect::<Result<Vec<_>>>()?;
    let mut samples: Vec<ResidualSample> = graph_samples.into_iter().flatten().collect();

    for it in &surface.interfaces {
        let b = &it.bridges[0];
        let s_core = CORE_B.acosh().min(surface.bridge_s_max(it.two_ell)?);
        for i in 0..9 {
            let s = -s_core + 2.0 * s_core * i as f64 / 8.0;
            for k in 0..ANGLES {
                let th = 2.0 * PI * (k as f64 + 0.5) / ANGLES as f64;
                let c = bridge_weighted_curvature(b, s, th)?;
                samples.push(ResidualSample {
                    region: Region::BridgeCore,
                    index: it.two_ell,
                    side: None,
                    point: c.point,
                    scale: c.rho,
                    h2w: c.h2w,
                    weighted: c.h2w.abs() * c.rho * c.rho,
                    normalized: c.h2w.abs() / (c.z.abs() + b.tau),
                    w_term: None,
                });
            }
        }
    }

    let regions = [Region::Graph, Region::BridgeCore, Region::GluingAnnulus, Region::ObstructionAnnulus]
        .into_iter()
        .map(|region| {
            let mine: Vec<&ResidualSample> = samples.iter().filter(|s| s.region == region).collect();
            let worst = mine.iter().max_by(|a, b| a.normalized.total_cmp(&b.normalized)).map(|s| (*s).clone());
            RegionSummary {
                region,
                count: mine.len(),
                sup_abs: mine.iter().map(|s| s.h2w.abs()).fold(0.0, f64::max),
                sup_normalized: mine.iter().map(|s| s.normalized).fold(0.0, f64::max),
                worst,
            }
        })
        .collect();
    Ok(ResidualReport {
        two_big_j: surface.two_big_j,
        m: surface.m,
        tau_max: surface.tau_max(),
        alpha,
        regions,
        samples,
    })
}

fn graph_sample(
    surface: &InitialSurface,
    region: Region,
    two_j: i32,
    side: Option<Side>,
    x: [f64; 2],
    alpha: f64,
    delta: f64,
) -> Result<Option<ResidualSample>> {
    let (nside, l, n, d) = surface.nearest_point(two_j, x[0], x[1])?;
    let it = surface.interface(l)?;
    let dp = it.delta_prime;
    if region == Region::Graph && d <= (3.0 * dp).max(2.0 * delta) {
        return Ok(None);
    }
    let z = surface.phi_gl(two_j, x[0], x[1])?;
    let (h2w, w_term) = match region {
        Region::GluingAnnulus => {
            // H^{2ω}[cat + ψf] = H^{2ω}[cat] + 𝓛(ψf) up to O(|∇cat|·|D(ψf)|):
            // the catenoid part from the bridge jets, the small smooth
            // correction f = rest − cat by differences
            let b = &it.bridges[n as usize];
            let upper = nside == Side::Plus;
            let (_, s, th) = catenoid_graph(b, x, upper)?;
            let sign = if upper { 1.0 } else { -1.0 };
            let hb = sign * bridge_weighted_curvature(b, s, th)?.h2w;
            let p = b.p;
            let corr = |u: f64, v: f64| -> Result<f64> {
                let dd = (u - p[0]).hypot(v - p[1]);
                let psi = cutoff(2.0 * dp, 3.0 * dp, dd)?;
                if psi == 0.0 {
                    return Ok(0.0);
                }
                Ok(psi * (surface.phi_rest(two_j, u, v)? - catenoid_graph(b, [u, v], upper)?.0))
            };
            (hb + jacobi_fd(corr, x[0], x[1], 0.02 * dp)?, None)
        }
        _ => {
            let step = 0.02 * if region == Region::ObstructionAnnulus { delta } else { d.min(x[0].hypot(x[1])).min(0.5) };
            let c = graph_weighted_mean_curvature(|u, v| surface.phi_gl(two_j, u, v), x[0], x[1], step)?;
            let w = if region == Region::ObstructionAnnulus {
                let lev = surface.level(two_j)?;
                let (r, t) = (x[0].hypot(x[1]), x[1].atan2(x[0]));
                let mut acc = 0.0;
                for sd in &lev.sides {
                    let iti = surface.interface(sd.two_ell)?;
                    acc += iti.tau
                        * ((iti.kappa_perp - sd.mu) * sd.obst.w(r, t)? + (iti.kappa - sd.mu_prime) * sd.obst.w_prime(r, t)?);
                }
                Some(acc)
            } else {
                None
            };
            (c.h2w, w)
        }
    };
    let normalized = match region {
        Region::GluingAnnulus => h2w.abs() * d * d / it.tau.powf(1.0 + alpha),
        _ => h2w.abs(),
    };
    Ok(Some(ResidualSample { region, index: two_j, side, point: [x[0], x[1], z], scale: d, h2w, weighted: h2w.abs() * d * d, normalized, w_term }))
}
