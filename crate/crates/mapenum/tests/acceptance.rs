//! Acceptance runner: one PASS/FAIL line per criterion. Exits nonzero when a
//! criterion fails, unless the failure is documented as unattainable.

use mapenum::verification::{run_all, VerifyOptions};

fn main() {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let opts = VerifyOptions { threads, ..VerifyOptions::default() };
    let checks = run_all(&opts, |c| {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status} {} ({:.1}s): {}", c.name, c.seconds, c.detail);
    });
    let passed = checks.iter().filter(|c| c.passed).count();
    let blocked = checks.iter().filter(|c| !c.passed && c.known_blocked).count();
    let failed = checks.len() - passed - blocked;
    println!("acceptance: {passed} passed, {blocked} failed as known-blocked, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
