//! Finite-difference gradient checks for every trainable component, with
//! the worst relative error per parameter group.
//!
//!     cargo run --example gradcheck

use simta::checks::{run_checks, CheckModule};

fn main() -> simta::Result<()> {
    for r in run_checks(CheckModule::All, false)? {
        println!(
            "{} {:.2e} {}",
            r.name,
            r.max_rel_err,
            if r.passed { "ok" } else { "FAILED" }
        );
        for g in &r.groups {
            println!("    {:32} {:.2e}", g.group, g.max_rel_err);
        }
    }
    Ok(())
}
