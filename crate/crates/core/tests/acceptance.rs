//! Runs every acceptance criterion at its pinned tolerance and prints one
//! line per criterion. Built without the test harness so the lines are never
//! captured.

use std::process::ExitCode;

use bilap::reproduce::{criteria, format_line, identity_crossing_note, run_criterion, transition_growth};

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for (id, name, check) in criteria() {
        let result = run_criterion(id, name, check);
        println!("{}", format_line(&result));
        if !result.passed {
            failed.push(id);
        }
    }
    match identity_crossing_note() {
        Ok(note) => println!("note: {note}"),
        Err(e) => println!("note: identity probe failed: {e}"),
    }
    match transition_growth(8) {
        Ok(growth) => println!("experiment: path transition times {growth:?}"),
        Err(e) => println!("experiment: failed: {e}"),
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
