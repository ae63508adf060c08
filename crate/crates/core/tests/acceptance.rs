//! Runs all acceptance criteria and prints one PASS/FAIL line per criterion.
//!
//! Criterion 9 asks for ‖𝔇_J z̄₁‖ ≥ 0.1 on the round sphere, but z̄₁ lies in the kernel there, so
//! it fails as stated; criterion 12 then fails through the nonzero exit status. Those two may
//! fail, but only for that reason. Every other criterion must pass.

use crlab_core::selftest::{run_all, CriterionResult};
use std::process::ExitCode;

const SEED: u64 = 20240617;
const BUDGET_SECONDS: f64 = 600.0;

fn expected_failure(r: &CriterionResult, all: &[CriterionResult]) -> bool {
    match r.id {
        9 => r.detail.split("; ").filter(|d| d.contains(" > ") || d.contains(" < ") || d.contains("error")).all(|d| d.starts_with("witness_z1bar ")),
        12 => {
            r.metrics["total_seconds"] <= BUDGET_SECONDS
                && all.iter().filter(|o| o.id < 12 && !o.passed).all(|o| o.id == 9)
        }
        _ => false,
    }
}

fn main() -> ExitCode {
    let report = run_all(SEED, BUDGET_SECONDS, |r| println!("{}", r.line()));
    let unexpected: Vec<usize> =
        report.criteria.iter().filter(|r| !r.passed && !expected_failure(r, &report.criteria)).map(|r| r.id).collect();
    let passed = report.criteria.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed}/{} passed in {:.1}s", report.criteria.len(), report.seconds);
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
