//! One PASS/FAIL line per acceptance criterion; exits nonzero on any failure.
//! `ACCEPTANCE_FILTER=<module>` restricts the run to one module.

use std::process::ExitCode;

use shrinker_glue::checks::{run_checks_with, CheckOptions};

fn main() -> ExitCode {
    let filter = std::env::var("ACCEPTANCE_FILTER").ok();
    let results = run_checks_with(filter.as_deref(), CheckOptions::default(), |r| {
        println!(
            "{} {}::{} measured={:e} want {} ({:.2} s) {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.module,
            r.name,
            r.measured,
            r.condition,
            r.seconds,
            r.detail
        );
    });
    match results {
        Ok(rs) => {
            let failed = rs.iter().filter(|r| !r.passed).count();
            println!("acceptance: {} passed, {failed} failed", rs.len() - failed);
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            println!("acceptance: {e}");
            ExitCode::FAILURE
        }
    }
}
