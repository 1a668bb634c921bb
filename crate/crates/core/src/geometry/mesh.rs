//! Triangulation of the initial surface.
//!
//! Every level is cut into 2m angular sectors of width π/m centred at kπ/m,
//! so each lattice point sits at the centre of its own sector. A level is an
//! inner polar disk, a band of sector blocks over [r_a, r_b], and outer polar
//! rings out to R_out. A block containing a hole is an O-grid whose inner ring
//! is the end circle of the bridge, shared vertex for vertex.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::fermi::AmbientPoint;
use super::surface::{GeometryMode, InitialSurface};
use crate::error::{Error, Result};
use crate::ld::Side;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RegionTag {
    Graph { two_j: i32 },
    Bridge { two_ell: i32, index: u32 },
    GluingAnnulus { two_j: i32, side: Side, index: u32 },
}

impl RegionTag {
    pub fn name(&self) -> String {
        match *self {
            RegionTag::Graph { two_j } => format!("graph_2j{two_j}"),
            RegionTag::Bridge { two_ell, index } => format!("bridge_2l{two_ell}_p{index}"),
            RegionTag::GluingAnnulus { two_j, side, index } => {
                let s = if side == Side::Plus { "plus" } else { "minus" };
                format!("gluing_2j{two_j}_{s}_p{index}")
            }
        }
    }

    pub fn code(&self) -> i32 {
        match self {
            RegionTag::Graph { .. } => 0,
            RegionTag::Bridge { .. } => 1,
            RegionTag::GluingAnnulus { .. } => 2,
        }
    }

    fn color(&self) -> [u8; 3] {
        match *self {
            RegionTag::Graph { two_j } => {
                let k = (two_j.rem_euclid(6)) as u8;
                [60 + 25 * k, 120, 200 - 20 * k]
            }
            RegionTag::Bridge { .. } => [220, 60, 50],
            RegionTag::GluingAnnulus { .. } => [240, 200, 40],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GroupKind {
    Dmh,
    Dmd,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SymmetryGroup {
    pub kind: GroupKind,
    pub m: u32,
}

type Mat3 = [[f64; 3]; 3];

fn reflection(c: f64, flip_z: bool) -> Mat3 {
    let (c2, s2) = ((2.0 * c).cos(), (2.0 * c).sin());
    [[c2, s2, 0.0], [s2, -c2, 0.0], [0.0, 0.0, if flip_z { -1.0 } else { 1.0 }]]
}

fn apply(a: &Mat3, x: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i][0] * x[0] + a[i][1] * x[1] + a[i][2] * x[2])
}

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

impl SymmetryGroup {
    /// D_mh for half-integer J, D_md for integer J.
    pub fn for_config(two_big_j: u32, m: u32) -> Self {
        let kind = if two_big_j % 2 == 1 { GroupKind::Dmh } else { GroupKind::Dmd };
        SymmetryGroup { kind, m }
    }

    /// σ_v[0], σ_v[π/m] and 𝖴[0] (D_mh) or 𝖴[π/(2m)] (D_md); all involutions.
    pub fn generators(&self) -> Vec<(String, Mat3)> {
        let m = self.m as f64;
        let u = match self.kind {
            GroupKind::Dmh => ("U[0]".to_string(), reflection(0.0, true)),
            GroupKind::Dmd => ("U[pi/(2m)]".to_string(), reflection(PI / (2.0 * m), true)),
        };
        vec![("sigma_v[0]".into(), reflection(0.0, false)), ("sigma_v[pi/m]".into(), reflection(PI / m, false)), u]
    }

    /// All elements, by closure of the generators.
    pub fn elements(&self) -> Vec<Mat3> {
        let same = |a: &Mat3, b: &Mat3| (0..3).all(|i| (0..3).all(|j| (a[i][j] - b[i][j]).abs() < 1e-9));
        let gens: Vec<Mat3> = self.generators().into_iter().map(|g| g.1).collect();
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mut els = vec![id];
        let mut frontier = vec![id];
        while let Some(a) = frontier.pop() {
            for g in &gens {
                let b = matmul(g, &a);
                if !els.iter().any(|e| same(e, &b)) {
                    els.push(b);
                    frontier.push(b);
                }
                if els.len() > 64 * self.m as usize {
                    return els;
                }
            }
        }
        els
    }
}

/// Sizes of the pieces; the same for every level.
#[derive(Clone, Debug, Serialize)]
pub struct MeshLayout {
    /// Grid cells per block side; bridge circles have 4N vertices.
    pub n: usize,
    pub n_inner: usize,
    pub n_outer: usize,
    pub r_a: f64,
    pub r_b: f64,
    pub r_out: f64,
    /// O-grid layers per interface.
    pub k_layers: BTreeMap<i32, usize>,
    /// Bridge rings minus one per interface.
    pub n_s: BTreeMap<i32, usize>,
}

impl MeshLayout {
    /// `resolution` is the number of samples per bridge circumference,
    /// rounded up to a multiple of 8, at least 16.
    pub fn new(surface: &InitialSurface, resolution: usize) -> Result<Self> {
        if resolution < 16 {
            return Err(Error::Config(format!("resolution {resolution} < 16 samples per bridge circle")));
        }
        let n = resolution.div_ceil(8) * 2;
        let m = surface.m as f64;
        let rs = surface.interfaces.iter().map(|i| i.lattice.rbar);
        let r_lo = rs.clone().fold(f64::INFINITY, f64::min);
        let r_hi = rs.fold(0.0, f64::max);
        let w = 0.5 * (r_lo + r_hi) * PI / (2.0 * m);
        let (r_a, r_b) = (r_lo - w, r_hi + w);
        let dtheta = PI / (m * n as f64);
        let n_inner = ((m * n as f64) / PI).ceil().max(2.0) as usize;
        let n_outer = ((surface.r_out / r_b).ln() / dtheta.ln_1p()).ceil().max(2.0) as usize;
        let step = 2.0 * PI / (4 * n) as f64;
        let mut k_layers = BTreeMap::new();
        let mut n_s = BTreeMap::new();
        for it in &surface.interfaces {
            if it.hole_radius > 0.8 * w {
                return Err(Error::Mesh(format!("hole radius {:e} does not fit the block {w:e}", it.hole_radius)));
            }
            k_layers.insert(it.two_ell, ((w / it.hole_radius).ln() / step).ceil().max(2.0) as usize);
            let s_max = surface.bridge_s_max(it.two_ell)?;
            n_s.insert(it.two_ell, (((2.0 * s_max / step) / 2.0).ceil() as usize * 2).max(2));
        }
        Ok(MeshLayout { n, n_inner, n_outer, r_a, r_b, r_out: surface.r_out, k_layers, n_s })
    }

    fn ring(&self, m: u32) -> usize {
        2 * m as usize * self.n
    }

    /// Closed-form vertex count.
    pub fn expected_vertex_count(&self, surface: &InitialSurface) -> usize {
        let m = surface.m as usize;
        let n = self.n;
        let mut total = 0;
        for it in &surface.interfaces {
            total += m * (self.n_s[&it.two_ell] + 1) * 4 * n;
        }
        for lev in &surface.levels {
            total += 1 + (self.n_inner + self.n_outer + 1) * self.ring(surface.m) + 2 * m * (n - 1);
            let mut holes = 0;
            for sd in &lev.sides {
                holes += m;
                total += m * (self.k_layers[&sd.two_ell] - 1) * 4 * n;
            }
            total += (2 * m - holes) * (n - 1) * (n - 1);
        }
        total
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<AmbientPoint>,
    pub triangles: Vec<[u32; 3]>,
    pub tags: Vec<RegionTag>,
    pub group: SymmetryGroup,
    pub layout: MeshLayout,
    pub mode: GeometryMode,
    /// Largest |z_bridge − φ^gl| over the stitched circles.
    pub stitch_error: f64,
}

struct Builder {
    xyz: Vec<[f64; 3]>,
    /// (vertex, level) whose height is still to be computed.
    pending: Vec<(usize, i32)>,
    tris: Vec<[u32; 3]>,
    tags: Vec<RegionTag>,
}

impl Builder {
    fn vertex(&mut self, x: f64, y: f64, two_j: i32) -> usize {
        self.xyz.push([x, y, 0.0]);
        self.pending.push((self.xyz.len() - 1, two_j));
        self.xyz.len() - 1
    }

    /// Quad a, b, c, d in counter-clockwise order for an upward normal.
    fn quad(&mut self, q: [usize; 4], up: bool, tag: RegionTag) {
        for t in [[q[0], q[1], q[2]], [q[0], q[2], q[3]]] {
            let t = t.map(|i| i as u32);
            self.tris.push(if up { t } else { [t[0], t[2], t[1]] });
            self.tags.push(tag);
        }
    }

    fn tri(&mut self, t: [usize; 3], up: bool, tag: RegionTag) {
        let t = t.map(|i| i as u32);
        self.tris.push(if up { t } else { [t[0], t[2], t[1]] });
        self.tags.push(tag);
    }
}

/// Normal of level j points up iff J − j is even.
pub fn level_up(two_big_j: u32, two_j: i32) -> bool {
    ((two_big_j as i32 - two_j) / 2) % 2 == 0
}

pub fn build_initial_surface(surface: &InitialSurface, resolution: usize) -> Result<SurfaceMesh> {
    let layout = MeshLayout::new(surface, resolution)?;
    let m = surface.m;
    let mu = m as usize;
    let n = layout.n;
    let ring = layout.ring(m);
    let circ = 4 * n;
    let tj = surface.two_big_j;
    let mut b = Builder { xyz: Vec::new(), pending: Vec::new(), tris: Vec::new(), tags: Vec::new() };

    // bridges: (interface, index) -> first vertex; ring j, angle i at base + j·4N + i
    let mut bridge_base: HashMap<(i32, u32), usize> = HashMap::new();
    for it in &surface.interfaces {
        let ns = layout.n_s[&it.two_ell];
        let s_max = surface.bridge_s_max(it.two_ell)?;
        let params: Vec<(u32, f64, f64)> = (0..m)
            .flat_map(|p| {
                (0..=ns).flat_map(move |j| {
                    (0..circ).map(move |i| {
                        (p, -s_max + 2.0 * s_max * j as f64 / ns as f64, 2.0 * PI * i as f64 / circ as f64)
                    })
                })
            })
            .collect();
        let pts: Vec<Result<[f64; 3]>> =
            params.par_iter().map(|&(p, s, th)| surface.bridge_point(it.two_ell, p, s, th)).collect();
        let start = b.xyz.len();
        for p in pts {
            b.xyz.push(p?);
        }
        let up = level_up(tj, it.two_ell + 1);
        for p in 0..m {
            let base = start + p as usize * (ns + 1) * circ;
            bridge_base.insert((it.two_ell, p), base);
            let tag = RegionTag::Bridge { two_ell: it.two_ell, index: p };
            for j in 0..ns {
                for i in 0..circ {
                    let v = |jj: usize, ii: usize| base + jj * circ + ii % circ;
                    b.quad([v(j, i), v(j + 1, i), v(j + 1, i + 1), v(j, i + 1)], up, tag);
                }
            }
        }
    }

    let dth = PI / (m as f64 * n as f64);
    let theta = |a: usize| -PI / (2.0 * m as f64) + a as f64 * dth;
    let inner_r = |i: usize| layout.r_a * i as f64 / layout.n_inner as f64;
    let outer_r = |k: usize| layout.r_b * (layout.r_out / layout.r_b).powf(k as f64 / layout.n_outer as f64);
    let band_r = |t: usize| layout.r_a + (layout.r_b - layout.r_a) * t as f64 / n as f64;

    for lev in &surface.levels {
        let two_j = lev.two_j;
        let up = level_up(tj, two_j);
        let gtag = RegionTag::Graph { two_j };
        let center = b.vertex(0.0, 0.0, two_j);
        let inner0 = b.xyz.len();
        for i in 1..=layout.n_inner {
            for a in 0..ring {
                let (r, t) = (inner_r(i), theta(a));
                b.vertex(r * t.cos(), r * t.sin(), two_j);
            }
        }
        let outer0 = b.xyz.len();
        for k in 0..=layout.n_outer {
            for a in 0..ring {
                let (r, t) = (outer_r(k), theta(a));
                b.vertex(r * t.cos(), r * t.sin(), two_j);
            }
        }
        let side0 = b.xyz.len();
        for sb in 0..2 * mu {
            for t in 1..n {
                let (r, th) = (band_r(t), theta(sb * n));
                b.vertex(r * th.cos(), r * th.sin(), two_j);
            }
        }
        let rin = |i: usize, a: usize| inner0 + (i - 1) * ring + a % ring;
        let rout = |k: usize, a: usize| outer0 + k * ring + a % ring;
        let side = |sb: usize, t: usize| side0 + (sb % (2 * mu)) * (n - 1) + t - 1;

        for a in 0..ring {
            b.tri([center, rin(1, a), rin(1, a + 1)], up, gtag);
            for i in 1..layout.n_inner {
                b.quad([rin(i, a), rin(i + 1, a), rin(i + 1, a + 1), rin(i, a + 1)], up, gtag);
            }
            for k in 0..layout.n_outer {
                b.quad([rout(k, a), rout(k + 1, a), rout(k + 1, a + 1), rout(k, a + 1)], up, gtag);
            }
        }

        for k in 0..2 * mu {
            let a0 = k * n;
            // vertex of the block grid at radial t ∈ [0, N], angular c ∈ [0, N]
            let boundary = |t: usize, c: usize| -> Option<usize> {
                if t == 0 {
                    Some(rin(layout.n_inner, a0 + c))
                } else if t == n {
                    Some(rout(0, a0 + c))
                } else if c == 0 {
                    Some(side(k, t))
                } else if c == n {
                    Some(side(k + 1, t))
                } else {
                    None
                }
            };
            let hole = lev.sides.iter().find(|sd| sd.obst.lattice.family as usize == k % 2);
            match hole {
                None => {
                    let start = b.xyz.len();
                    for t in 1..n {
                        for c in 1..n {
                            let (r, th) = (band_r(t), theta(a0 + c));
                            b.vertex(r * th.cos(), r * th.sin(), two_j);
                        }
                    }
                    let v = |t: usize, c: usize| boundary(t, c).unwrap_or_else(|| start + (t - 1) * (n - 1) + c - 1);
                    for t in 0..n {
                        for c in 0..n {
                            b.quad([v(t, c), v(t + 1, c), v(t + 1, c + 1), v(t, c + 1)], up, gtag);
                        }
                    }
                }
                Some(sd) => {
                    let p = (k / 2) as u32;
                    let it = surface.interface(sd.two_ell)?;
                    let ns = layout.n_s[&sd.two_ell];
                    let kl = layout.k_layers[&sd.two_ell];
                    let bb = bridge_base[&(sd.two_ell, p)];
                    let end = if sd.side == Side::Plus { ns } else { 0 };
                    let hole_ring: Vec<usize> = (0..circ).map(|i| bb + end * circ + i).collect();
                    // perimeter from the middle of the outer side, counter-clockwise
                    let h = n / 2;
                    let mut per = Vec::with_capacity(circ);
                    per.extend((h..n).map(|c| boundary(n, c).unwrap()));
                    per.extend((1..=n).rev().map(|t| boundary(t, n).unwrap()));
                    per.extend((1..=n).rev().map(|c| boundary(0, c).unwrap()));
                    per.extend((0..n).map(|t| boundary(t, 0).unwrap()));
                    per.extend((0..h).map(|c| boundary(n, c).unwrap()));
                    debug_assert_eq!(per.len(), circ);
                    let pc = it.bridges[p as usize].p;
                    // offsets of the end circle taken from the bridge itself:
                    // differencing absolute coordinates loses the tiny holes
                    let s_end = if sd.side == Side::Plus { 1.0 } else { -1.0 } * surface.bridge_s_max(sd.two_ell)?;
                    let hole_off = (0..circ)
                        .map(|i| surface.bridge_offset(sd.two_ell, p, s_end, 2.0 * PI * i as f64 / circ as f64))
                        .collect::<Result<Vec<_>>>()?;
                    let start = b.xyz.len();
                    for layer in 1..kl {
                        let t = layer as f64 / kl as f64;
                        for i in 0..circ {
                            let q = b.xyz[per[i]];
                            let (cx, cy) = (hole_off[i][0], hole_off[i][1]);
                            let (qx, qy) = (q[0] - pc[0], q[1] - pc[1]);
                            let ac = cy.atan2(cx);
                            let mut da = qy.atan2(qx) - ac;
                            da -= 2.0 * PI * (da / (2.0 * PI)).round();
                            let rho = ((1.0 - t) * cx.hypot(cy).ln() + t * qx.hypot(qy).ln()).exp();
                            let a = ac + t * da;
                            b.vertex(pc[0] + rho * a.cos(), pc[1] + rho * a.sin(), two_j);
                        }
                    }
                    let v = |layer: usize, i: usize| {
                        let i = i % circ;
                        if layer == 0 {
                            hole_ring[i]
                        } else if layer == kl {
                            per[i]
                        } else {
                            start + (layer - 1) * circ + i
                        }
                    };
                    let glue = 3.0 * it.delta_prime;
                    for layer in 0..kl {
                        for i in 0..circ {
                            let q = [v(layer, i), v(layer + 1, i), v(layer + 1, i + 1), v(layer, i + 1)];
                            let tag = if surface.mode == GeometryMode::Glued && {
                                let cx = q.iter().map(|&j| b.xyz[j][0]).sum::<f64>() / 4.0 - pc[0];
                                let cy = q.iter().map(|&j| b.xyz[j][1]).sum::<f64>() / 4.0 - pc[1];
                                cx.hypot(cy) < glue
                            } {
                                RegionTag::GluingAnnulus { two_j, side: sd.side, index: p }
                            } else {
                                gtag
                            };
                            b.quad(q, up, tag);
                        }
                    }
                }
            }
        }
    }

    let heights: Vec<Result<f64>> = b
        .pending
        .par_iter()
        .map(|&(i, two_j)| surface.phi_gl(two_j, b.xyz[i][0], b.xyz[i][1]))
        .collect();
    for (&(i, _), z) in b.pending.iter().zip(heights) {
        b.xyz[i][2] = z?;
    }

    // the hole circles belong to the bridges; the graph must agree there
    let mut stitch = 0.0f64;
    for it in &surface.interfaces {
        let ns = layout.n_s[&it.two_ell];
        let mut worst = 0.0f64;
        for p in 0..m {
            let base = bridge_base[&(it.two_ell, p)];
            for (end, two_j) in [(ns, it.two_ell + 1), (0, it.two_ell - 1)] {
                for i in (0..circ).step_by(n / 2) {
                    let x = b.xyz[base + end * circ + i];
                    worst = worst.max((surface.phi_gl(two_j, x[0], x[1])? - x[2]).abs());
                }
            }
        }
        // heights on the end circle are pinned by x to within ε|x|/sinh s
        if worst > 1e-8 * it.bridges[0].tau + 1e-14 {
            return Err(Error::Mesh(format!("stitching mismatch {worst:e} at interface 2ℓ = {}", it.two_ell)));
        }
        stitch = stitch.max(worst);
    }

    let vertices = b.xyz.iter().map(|&a| AmbientPoint::new(a[0], a[1], a[2])).collect::<Result<Vec<_>>>()?;
    Ok(SurfaceMesh {
        vertices,
        triangles: b.tris,
        tags: b.tags,
        group: SymmetryGroup::for_config(tj, m),
        layout,
        mode: surface.mode,
        stitch_error: stitch,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryDefect {
    pub generator: String,
    pub hausdorff: f64,
    pub worst_vertex: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TopologyReport {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    pub boundary_loops: usize,
    pub genus: f64,
    pub components: usize,
    /// Every interior edge has exactly two faces.
    pub watertight: bool,
    /// Neighbouring faces traverse their common edge in opposite directions.
    pub consistently_oriented: bool,
    /// Largest | |(x, y)| − R_out | over boundary vertices.
    pub boundary_radius_error: f64,
    pub degenerate_faces: usize,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl SurfaceMesh {
    pub fn topology(&self) -> TopologyReport {
        // (lo, hi) -> (faces, net direction)
        let mut edges: HashMap<(u32, u32), (u32, i32)> = HashMap::new();
        let mut degenerate = 0;
        for t in &self.triangles {
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                degenerate += 1;
            }
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let e = edges.entry((a.min(b), a.max(b))).or_insert((0, 0));
                e.0 += 1;
                e.1 += if a < b { 1 } else { -1 };
            }
        }
        let watertight = edges.values().all(|&(c, _)| c <= 2);
        let oriented = edges.values().all(|&(c, d)| if c == 2 { d == 0 } else { true });
        // boundary loops: directed boundary edges a -> b
        let mut next: HashMap<u32, u32> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if edges[&(a.min(b), a.max(b))].0 == 1 {
                    next.insert(a, b);
                }
            }
        }
        let mut r_err = 0.0f64;
        for &v in next.keys() {
            let p = self.vertices[v as usize];
            r_err = r_err.max((p.x1.hypot(p.x2) - self.layout.r_out).abs());
        }
        let mut seen: HashMap<u32, bool> = HashMap::new();
        let mut loops = 0;
        let mut keys: Vec<u32> = next.keys().cloned().collect();
        keys.sort_unstable();
        for s in keys {
            if seen.contains_key(&s) {
                continue;
            }
            loops += 1;
            let mut v = s;
            while seen.insert(v, true).is_none() {
                match next.get(&v) {
                    Some(&w) => v = w,
                    None => break,
                }
            }
        }
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2])] {
                let (ra, rb) = (find(&mut parent, a as usize), find(&mut parent, b as usize));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
        let used: std::collections::HashSet<usize> =
            self.triangles.iter().flat_map(|t| t.iter().map(|&i| i as usize)).collect();
        let mut roots = std::collections::HashSet::new();
        for &i in &used {
            roots.insert(find(&mut parent, i));
        }
        let (v, e, f) = (self.vertices.len(), edges.len(), self.triangles.len());
        let euler = v as i64 - e as i64 + f as i64;
        TopologyReport {
            vertices: v,
            edges: e,
            faces: f,
            euler,
            boundary_loops: loops,
            genus: (2 - euler - loops as i64) as f64 / 2.0,
            components: roots.len() + (v - used.len()),
            watertight,
            consistently_oriented: oriented,
            boundary_radius_error: r_err,
            degenerate_faces: degenerate,
        }
    }

    /// For each generator, max over vertices of the distance from its image
    /// to the nearest vertex. The generators are involutions and bijective on
    /// an invariant set, so this one-sided distance is the Hausdorff distance.
    pub fn symmetry_defects(&self) -> Vec<SymmetryDefect> {
        let grid = SpatialHash::new(&self.vertices, 1e-7);
        self.group
            .generators()
            .into_par_iter()
            .map(|(name, g)| {
                let (hausdorff, worst_vertex) = self
                    .vertices
                    .par_iter()
                    .enumerate()
                    .map(|(i, v)| (grid.nearest(apply(&g, v.to_array())), i))
                    .reduce(|| (0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
                SymmetryDefect { generator: name, hausdorff, worst_vertex }
            })
            .collect()
    }

    /// Group order and the distinct orbit sizes of every `stride`-th vertex;
    /// images are identified with their nearest mesh vertex.
    pub fn orbit_sizes(&self, stride: usize) -> (usize, Vec<usize>) {
        let els = self.group.elements();
        let grid = SpatialHash::new(&self.vertices, 1e-7);
        let sizes: std::collections::BTreeSet<usize> = self
            .vertices
            .par_iter()
            .step_by(stride.max(1))
            .map(|v| {
                let mut idx: Vec<usize> = els.iter().map(|g| grid.nearest_index(apply(g, v.to_array())).1).collect();
                idx.sort_unstable();
                idx.dedup();
                idx.len()
            })
            .collect();
        (els.len(), sizes.into_iter().collect())
    }

    /// Each comment line must be free of newlines.
    pub fn write_obj<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        writeln!(w, "# initial surface: {} vertices, {} triangles", self.vertices.len(), self.triangles.len())?;
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        for v in &self.vertices {
            writeln!(w, "v {:.17e} {:.17e} {:.17e}", v.x1, v.x2, v.z)?;
        }
        let mut groups: BTreeMap<RegionTag, Vec<usize>> = BTreeMap::new();
        for (i, t) in self.tags.iter().enumerate() {
            groups.entry(*t).or_default().push(i);
        }
        for (tag, faces) in groups {
            writeln!(w, "g {}", tag.name())?;
            for i in faces {
                let t = self.triangles[i];
                writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
            }
        }
        Ok(())
    }

    /// Binary little-endian PLY with per-face colour and region code.
    pub fn write_ply<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        write!(w, "ply\nformat binary_little_endian 1.0\n")?;
        for c in comments {
            writeln!(w, "comment {c}")?;
        }
        write!(
            w,
            "element vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
             element face {}\nproperty list uchar int vertex_indices\nproperty uchar red\nproperty uchar green\n\
             property uchar blue\nproperty int region\nend_header\n",
            self.vertices.len(),
            self.triangles.len()
        )?;
        let mut buf = Vec::with_capacity(self.vertices.len() * 24 + self.triangles.len() * 20);
        for v in &self.vertices {
            for c in v.to_array() {
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
        for (t, tag) in self.triangles.iter().zip(&self.tags) {
            buf.push(3u8);
            for &i in t {
                buf.extend_from_slice(&(i as i32).to_le_bytes());
            }
            buf.extend_from_slice(&tag.color());
            buf.extend_from_slice(&tag.code().to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }
}

struct SpatialHash<'a> {
    cell: f64,
    pts: &'a [AmbientPoint],
    map: HashMap<[i64; 3], Vec<u32>>,
}

impl<'a> SpatialHash<'a> {
    fn key(&self, x: [f64; 3]) -> [i64; 3] {
        x.map(|c| (c / self.cell).floor() as i64)
    }

    fn new(pts: &'a [AmbientPoint], cell: f64) -> Self {
        let mut h = SpatialHash { cell, pts, map: HashMap::new() };
        for (i, p) in pts.iter().enumerate() {
            let k = h.key(p.to_array());
            h.map.entry(k).or_default().push(i as u32);
        }
        h
    }

    /// Distance to the nearest point, or ∞ beyond one cell.
    fn nearest(&self, x: [f64; 3]) -> f64 {
        self.nearest_index(x).0
    }

    fn nearest_index(&self, x: [f64; 3]) -> (f64, usize) {
        let k = self.key(x);
        let mut best = (f64::INFINITY, usize::MAX);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(v) = self.map.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &i in v {
                            let p = self.pts[i as usize].to_array();
                            let d = ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2) + (p[2] - x[2]).powi(2)).sqrt();
                            if d < best.0 {
                                best = (d, i as usize);
                            }
                        }
                    }
                }
            }
        }
        best
    }
}
