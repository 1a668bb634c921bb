use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use shrinker_glue::balance::{derive_params_alpha, newton_solve, NewtonReport, ParamVector};
use shrinker_glue::checks::{junit_xml, run_checks_with, CheckResult};
use shrinker_glue::config::RunConfig;
use shrinker_glue::geometry::mesh::build_initial_surface;
use shrinker_glue::geometry::residual::residual_report;
use shrinker_glue::geometry::surface::{cone_slopes, GeometryMode, InitialSurface};
use shrinker_glue::rld::{find_roots, phi_mu_basis};
use shrinker_glue::{Error, Result};

/// Relative tolerance of the Wronskian table printed by `roots`.
const WRONSKIAN_TOL: f64 = 1e-8;
/// Quoted root values and their tolerance.
const QUOTED_ROOTS: [(&str, f64); 3] = [("r_m", 2.51), ("r_u", 0.88), ("r_mu", 1.52)];
const ROOT_TOL: f64 = 0.01;

#[derive(Parser)]
#[command(version, about = "Stacked-plane self-shrinkers glued with catenoidal bridges")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Twice the top level index J (the number of interfaces).
    #[arg(long = "two-J", global = true)]
    two_big_j: Option<u32>,
    /// Rotational symmetry order.
    #[arg(long, global = true)]
    m: Option<u32>,
    /// Print the JSON report on stdout instead of a table.
    #[arg(long, global = true)]
    json: bool,
    /// Output directory (overrides output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distinguished radii and the Wronskian table.
    Roots,
    /// Solve for the balanced parameters.
    Balance,
    /// Build the initial surface: meshes, topology, residuals, cone slopes.
    Surface,
    /// Run the invariant suites.
    Check {
        /// Only this module: specfun, rld, ld, balance or geometry.
        #[arg(long)]
        filter: Option<String>,
    },
}

/// A finished command: its report and whether every check in it held.
struct Report {
    value: Value,
    text: String,
    passed: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Roots => cmd_roots(&cfg),
        Command::Balance => cmd_balance(&cfg),
        Command::Surface => cmd_surface(&cfg),
        Command::Check { filter } => cmd_check(&cfg, filter.as_deref(), cli.json),
    };
    match result {
        Ok(r) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&r.value).expect("reports serialise"));
            } else {
                print!("{}", r.text);
            }
            if r.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Error::Config(msg)) => {
            eprintln!("error: invalid configuration: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.two_big_j {
        cfg.two_big_j = v;
    }
    if let Some(v) = cli.m {
        cfg.m = v;
    }
    if let Some(v) = &cli.out {
        cfg.output_dir = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg.output_dir.join(name))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    Ok(())
}

fn cmd_roots(cfg: &RunConfig) -> Result<Report> {
    let r = find_roots()?;
    let found = [r.r_m, r.r_u, r.r_mu];
    let mut passed = true;
    let mut text = String::from("root   value              quoted  ok\n");
    let mut roots = Vec::new();
    for ((name, quoted), v) in QUOTED_ROOTS.iter().zip(found) {
        let ok = (v - quoted).abs() < ROOT_TOL;
        passed &= ok;
        text += &format!("{name:<6} {v:<18.15} {quoted:<7} {ok}\n");
        roots.push(json!({ "name": name, "value": v, "quoted": quoted, "tolerance": ROOT_TOL, "passed": ok }));
    }
    text += "\nk  r      W numeric               W closed form           rel err    ok\n";
    let mut table = Vec::new();
    for k in 0..3 {
        let b = phi_mu_basis(k)?;
        for rr in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let (m, dm) = b.eval_m(rr)?;
            let (u, du) = b.eval_u(rr)?;
            let num = m * du - u * dm;
            let closed = b.wronskian(rr);
            let err = (num - closed).abs() / closed.abs();
            let ok = err < WRONSKIAN_TOL;
            passed &= ok;
            text += &format!("{k}  {rr:<6} {num:<23.16e} {closed:<23.16e} {err:<10.3e} {ok}\n");
            table.push(json!({ "k": k, "r": rr, "numeric": num, "closed_form": closed, "rel_err": err, "passed": ok }));
        }
    }
    let value = json!({
        "command": "roots",
        "config": cfg,
        "r_m": r.r_m,
        "r_u": r.r_u,
        "r_mu": r.r_mu,
        "roots": roots,
        "wronskian_tolerance": WRONSKIAN_TOL,
        "wronskian": table,
        "passed": passed,
    });
    write_json(&out_file(cfg, "roots.json")?, &value)?;
    Ok(Report { value, text, passed })
}

fn balance_value(cfg: &RunConfig, rep: &NewtonReport) -> Result<Value> {
    let derived = derive_params_alpha(&rep.pv, cfg.m, cfg.alpha)?;
    Ok(json!({
        "command": "balance",
        "config": cfg,
        "converged": true,
        "iterations": rep.history.len() - 1,
        "residual": rep.history.last(),
        "history": rep.history,
        "pv": rep.pv,
        "pv_flat": rep.pv.to_flat(),
        "derived": derived,
        "final_mismatch": rep.final_mismatch,
        "z_condition": rep.z_condition,
    }))
}

fn solve(cfg: &RunConfig) -> Result<NewtonReport> {
    newton_solve(cfg.m, cfg.initial_pv()?, cfg.newton_options())
}

fn cmd_balance(cfg: &RunConfig) -> Result<Report> {
    let rep = solve(cfg)?;
    let value = balance_value(cfg, &rep)?;
    write_json(&out_file(cfg, "balance.json")?, &value)?;
    let mut text = format!("(2J, m) = ({}, {}): converged in {} iterations\n", cfg.two_big_j, cfg.m, rep.history.len() - 1);
    for (i, h) in rep.history.iter().enumerate() {
        text += &format!("  iter {i:>2}  residual {h:.6e}\n");
    }
    text += &format!("pv* = {:?}\n", rep.pv.to_flat());
    Ok(Report { value, text, passed: true })
}

/// pv* from a previous `balance` run with the same solve settings, if any.
fn cached_pv(cfg: &RunConfig) -> Option<ParamVector> {
    let text = fs::read_to_string(cfg.output_dir.join("balance.json")).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    let old: RunConfig = serde_json::from_value(v.get("config")?.clone()).ok()?;
    let same = old.two_big_j == cfg.two_big_j
        && old.m == cfg.m
        && old.c1 == cfg.c1
        && old.n_modes == cfg.n_modes
        && old.tol == cfg.tol
        && old.seed_pv == cfg.seed_pv;
    if !same {
        return None;
    }
    let flat: Vec<f64> = serde_json::from_value(v.get("pv_flat")?.clone()).ok()?;
    ParamVector::from_flat(cfg.two_big_j, &flat).ok()
}

fn cmd_surface(cfg: &RunConfig) -> Result<Report> {
    let (pv, source) = match cached_pv(cfg) {
        Some(pv) => (pv, "balance.json"),
        None => {
            let rep = solve(cfg)?;
            write_json(&out_file(cfg, "balance.json")?, &balance_value(cfg, &rep)?)?;
            (rep.pv, "solved")
        }
    };
    let derived = derive_params_alpha(&pv, cfg.m, cfg.alpha)?;
    let mut surface = InitialSurface::new(&pv, &derived, cfg.n_modes)?;
    surface.r_out = cfg.r_out;
    let mesh = build_initial_surface(&surface, cfg.resolution)?;
    let topo = mesh.topology();
    let comments = vec![format!("config {}", serde_json::to_string(cfg)?)];
    mesh.write_obj(BufWriter::new(File::create(out_file(cfg, "surface.obj")?)?), &comments)?;
    mesh.write_ply(BufWriter::new(File::create(out_file(cfg, "surface.ply")?)?), &comments)?;

    let want_genus = (cfg.two_big_j * (cfg.m - 1)) as f64;
    let want_loops = cfg.two_big_j as usize + 1;
    let topo_ok = topo.genus == want_genus && topo.boundary_loops == want_loops && topo.watertight;
    let symmetry: f64 = mesh.symmetry_defects().iter().map(|d| d.hausdorff).fold(0.0, f64::max);
    let topo_value = json!({
        "config": cfg,
        "mode": surface.mode,
        "topology": topo,
        "expected_genus": want_genus,
        "expected_boundary_loops": want_loops,
        "symmetry_defects": mesh.symmetry_defects(),
        "layout": mesh.layout,
        "passed": topo_ok,
    });
    write_json(&out_file(cfg, "topology.json")?, &topo_value)?;

    let residual = if surface.mode == GeometryMode::Glued {
        let r = residual_report(&surface)?;
        json!({ "config": cfg, "report": r })
    } else {
        json!({ "config": cfg, "skipped": "schematic stand-in: bridges do not fit at this m" })
    };
    write_json(&out_file(cfg, "residual.json")?, &residual)?;

    let cones = cone_slopes(&surface)?;
    let mut csv = BufWriter::new(File::create(out_file(cfg, "cone_slopes.csv")?)?);
    writeln!(csv, "# config {}", serde_json::to_string(cfg)?)?;
    writeln!(csv, "two_j,closed_form,numeric,rel_diff,flagged")?;
    for c in &cones {
        writeln!(csv, "{},{:.17e},{:.17e},{:.6e},{}", c.two_j, c.closed_form, c.numeric, c.rel_diff, c.flagged)?;
    }
    csv.flush()?;

    let mut text = format!(
        "(2J, m) = ({}, {}), pv* from {source}, {:?} mode\n\
         mesh: {} vertices, {} faces, χ = {}, genus {} (expected {want_genus}), {} boundary loops (expected {want_loops})\n\
         watertight {}, oriented {}, symmetry defect {symmetry:.3e}\n",
        cfg.two_big_j,
        cfg.m,
        surface.mode,
        topo.vertices,
        topo.faces,
        topo.euler,
        topo.genus,
        topo.boundary_loops,
        topo.watertight,
        topo.consistently_oriented,
    );
    for c in &cones {
        text += &format!("cone slope 2j = {:>3}: closed {:.6e}, numeric {:.6e}\n", c.two_j, c.closed_form, c.numeric);
    }
    text += &format!("wrote surface.obj, surface.ply, topology.json, residual.json, cone_slopes.csv to {}\n", cfg.output_dir.display());
    let value = json!({
        "command": "surface",
        "config": cfg,
        "pv_source": source,
        "mode": surface.mode,
        "topology": topo_value["topology"],
        "residual": residual,
        "cone_slopes": cones,
        "passed": topo_ok,
    });
    Ok(Report { value, text, passed: topo_ok })
}

fn cmd_check(cfg: &RunConfig, filter: Option<&str>, quiet: bool) -> Result<Report> {
    let mut stdout = std::io::stdout();
    let results: Vec<CheckResult> = run_checks_with(filter, cfg.check_options(), |r| {
        if !quiet {
            let _ = writeln!(
                stdout,
                "{:<4} {:<9} {:<32} {:>12.4e}  {:<40} {:>7.2}s",
                if r.passed { "PASS" } else { "FAIL" },
                r.module,
                r.name,
                r.measured,
                r.condition,
                r.seconds
            );
            let _ = stdout.flush();
        }
    })?;
    let failed = results.iter().filter(|r| !r.passed).count();
    fs::write(out_file(cfg, "junit.xml")?, junit_xml(&results))?;
    let value = json!({
        "command": "check",
        "config": cfg,
        "filter": filter,
        "passed": failed == 0,
        "failed": failed,
        "results": results,
    });
    write_json(&out_file(cfg, "check_report.json")?, &value)?;
    let text = format!("{} checks, {failed} failed; JUnit report in {}\n", results.len(), cfg.output_dir.join("junit.xml").display());
    Ok(Report { value, text, passed: failed == 0 })
}
