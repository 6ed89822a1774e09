//! Acceptance gate: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines are always printed.

use std::process::ExitCode;

use kinonav::verify::acceptance::{default_scenario_dir, Acceptance};

fn main() -> ExitCode {
    let acc = Acceptance::new(default_scenario_dir());
    let mut failed = 0;
    for c in acc.run_all() {
        println!("{}", c.line());
        for n in &c.notes {
            println!("    {n}");
        }
        if !c.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all 7 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 7 criteria failed");
        ExitCode::FAILURE
    }
}
