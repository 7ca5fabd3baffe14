//! Runs every acceptance criterion and prints one line per criterion.
//! `HFNET_SEED` overrides the seed and `HFNET_JOBS` the worker count.

use hfnet::harness::{all_passed, report_lines, run_criteria, VerifyOptions};
use std::process::ExitCode;

fn env<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let opts = VerifyOptions {
        seed: env("HFNET_SEED", 7),
        jobs: env("HFNET_JOBS", 1),
        ..Default::default()
    };
    let (report, timings) = run_criteria(&opts);
    for line in report_lines(&report, &timings) {
        println!("{line}");
    }
    let total: f64 = timings.iter().map(|t| t.seconds).sum();
    if all_passed(&report, &timings) {
        println!("acceptance: all {} criteria passed in {total:.0} s", report.results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
