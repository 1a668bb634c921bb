//! Initial surfaces: mesh topology, file formats, symmetry and residuals.

use shrinker_glue::balance::{derive_params_alpha, newton_solve, NewtonOptions, ParamVector, DEFAULT_ALPHA};
use shrinker_glue::geometry::mesh::build_initial_surface;
use shrinker_glue::geometry::residual::{residual_report, Region};
use shrinker_glue::geometry::surface::{cone_slopes, GeometryMode};
use shrinker_glue::geometry::InitialSurface;
use shrinker_glue::ld::DEFAULT_MODES;

fn surface(two_big_j: u32, m: u32) -> InitialSurface {
    let rep = newton_solve(m, ParamVector::zero(two_big_j).unwrap(), NewtonOptions::default()).unwrap();
    let dp = derive_params_alpha(&rep.pv, m, DEFAULT_ALPHA).unwrap();
    InitialSurface::new(&rep.pv, &dp, DEFAULT_MODES).unwrap()
}

#[test]
fn obj_lists_every_vertex_and_face_once() {
    let s = surface(1, 8);
    let mesh = build_initial_surface(&s, 16).unwrap();
    let mut buf = Vec::new();
    mesh.write_obj(&mut buf, &["hello".to_string()]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().any(|l| l == "# hello"));
    let v = text.lines().filter(|l| l.starts_with("v ")).count();
    let f = text.lines().filter(|l| l.starts_with("f ")).count();
    assert_eq!(v, mesh.vertices.len());
    assert_eq!(f, mesh.triangles.len());
    let max_index = text
        .lines()
        .filter(|l| l.starts_with("f "))
        .flat_map(|l| l[2..].split(' ').map(|x| x.parse::<usize>().unwrap()).collect::<Vec<_>>())
        .max()
        .unwrap();
    assert_eq!(max_index, v);
}

#[test]
fn ply_header_and_size_match() {
    let s = surface(1, 8);
    let mesh = build_initial_surface(&s, 16).unwrap();
    let mut buf = Vec::new();
    mesh.write_ply(&mut buf, &["run 1".to_string()]).unwrap();
    let end = buf.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
    let header = std::str::from_utf8(&buf[..end]).unwrap();
    assert!(header.contains("comment run 1\n"));
    assert!(header.contains(&format!("element vertex {}\n", mesh.vertices.len())));
    // 3 doubles per vertex; count byte, 3 ints, rgb and a region int per face
    assert_eq!(buf.len() - end, 24 * mesh.vertices.len() + 20 * mesh.triangles.len());
}

#[test]
fn topology_across_resolutions() {
    let s = surface(1, 8);
    for res in [16, 24, 40] {
        let mesh = build_initial_surface(&s, res).unwrap();
        let t = mesh.topology();
        assert_eq!(t.genus, 7.0, "resolution {res}");
        assert_eq!(t.boundary_loops, 2);
        assert!(t.watertight && t.consistently_oriented);
        assert_eq!(t.vertices, mesh.layout.expected_vertex_count(&s));
        assert_eq!(t.degenerate_faces, 0);
    }
    assert!(build_initial_surface(&s, 8).is_err());
}

#[test]
fn outer_radius_is_respected() {
    let mut s = surface(1, 8);
    s.r_out = 12.0;
    let mesh = build_initial_surface(&s, 16).unwrap();
    let rmax = mesh.vertices.iter().map(|v| v.x1.hypot(v.x2)).fold(0.0, f64::max);
    assert!((rmax - 12.0).abs() < 1e-9, "{rmax}");
    assert!(mesh.topology().boundary_radius_error < 1e-9);
}

#[test]
fn schematic_mode_has_no_residual_but_correct_topology() {
    let s = surface(2, 8);
    assert_eq!(s.mode, GeometryMode::Schematic);
    assert!(residual_report(&s).is_err());
    let t = build_initial_surface(&s, 16).unwrap().topology();
    assert_eq!(t.genus, 14.0);
    assert_eq!(t.boundary_loops, 3);
}

#[test]
fn residual_report_covers_every_region() {
    let s = surface(1, 32);
    let r = residual_report(&s).unwrap();
    for region in [Region::Graph, Region::BridgeCore, Region::GluingAnnulus, Region::ObstructionAnnulus] {
        let summary = r.region(region);
        assert!(summary.sup_abs.is_finite());
        if region != Region::ObstructionAnnulus {
            assert!(summary.count > 0, "{region:?}");
        }
    }
    assert!(r.region(Region::BridgeCore).sup_normalized < 10.0);
}

#[test]
fn cone_slopes_are_odd_in_the_level() {
    let s = surface(3, 96);
    let cs = cone_slopes(&s).unwrap();
    for c in &cs {
        let o = cs.iter().find(|d| d.two_j == -c.two_j).unwrap();
        assert!((c.closed_form + o.closed_form).abs() <= 1e-12 * c.closed_form.abs());
        assert!(c.rel_diff < 0.02 || c.closed_form == 0.0);
    }
}
