//! End-to-end acceptance: one line per criterion, nonzero exit if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hoeffding::suites::{run_suite, Suite, SuiteOptions};

struct Criterion {
    number: u32,
    title: &'static str,
    suite: Suite,
    limit: Duration,
}

const CRITERIA: [Criterion; 10] = [
    Criterion {
        number: 1,
        title: "dominance chain on the 10^4-point grid",
        suite: Suite::Chain,
        limit: Duration::from_secs(5),
    },
    Criterion {
        number: 2,
        title: "H_n -> F and growth in n",
        suite: Suite::Limit,
        limit: Duration::from_secs(5),
    },
    Criterion {
        number: 3,
        title: "variational identities",
        suite: Suite::Variational,
        limit: Duration::from_secs(10),
    },
    Criterion {
        number: 4,
        title: "reduction to the independent-sum bound",
        suite: Suite::Reduction,
        limit: Duration::from_secs(2),
    },
    Criterion {
        number: 5,
        title: "MGF sharpness for the extremal law",
        suite: Suite::Mgf,
        limit: Duration::from_secs(2),
    },
    Criterion {
        number: 6,
        title: "exact oracle below every bound",
        suite: Suite::Oracle,
        limit: Duration::from_secs(60),
    },
    Criterion {
        number: 7,
        title: "Monte Carlo validity at gamma 0.999",
        suite: Suite::MonteCarlo,
        limit: Duration::from_secs(600),
    },
    Criterion {
        number: 8,
        title: "Azuma branch boundary",
        suite: Suite::Azuma,
        limit: Duration::from_secs(2),
    },
    Criterion {
        number: 9,
        title: "cumulant analysis",
        suite: Suite::Cumulant,
        limit: Duration::from_secs(5),
    },
    Criterion {
        number: 10,
        title: "Bennett inverse form",
        suite: Suite::BennettInverse,
        limit: Duration::from_secs(1),
    },
];

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn hoeffding(args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_hoeffding"))
        .args(args)
        .status()
        .map_err(|e| format!("spawn failed: {e}"))?;
    if status.success() {
        Ok(())
    } else {
        Err(format!(
            "`hoeffding {}` exited with {status}",
            args.join(" ")
        ))
    }
}

/// Runs, saves the configuration, replays it and compares output bytes.
fn replay_round_trip(dir: &Path, name: &str, args: &[&str]) -> Result<(), String> {
    let path = |suffix: &str| dir.join(format!("{name}.{suffix}")).display().to_string();
    let (config, first, second) = (path("cfg"), path("first"), path("second"));
    let mut run = args.to_vec();
    run.extend(["--out", &first, "--save-config", &config]);
    hoeffding(&run)?;
    hoeffding(&["replay", &config, "--out", &second])?;
    let (a, b) = (
        fs::read(&first).map_err(|e| e.to_string())?,
        fs::read(&second).map_err(|e| e.to_string())?,
    );
    if a.is_empty() {
        return Err(format!("{name}: empty output"));
    }
    if a != b {
        return Err(format!(
            "{name}: replayed output differs ({} vs {} bytes)",
            a.len(),
            b.len()
        ));
    }
    Ok(())
}

fn reproducibility() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    replay_round_trip(
        dir.path(),
        "bounds",
        &[
            "bounds", "--x", "1", "--v", "1", "--n", "2", "--b", "0.5", "--y", "2", "--law", "cexp",
        ],
    )?;
    replay_round_trip(
        dir.path(),
        "compare",
        &["compare", "--grid", "default", "--format", "csv"],
    )?;
    replay_round_trip(
        dir.path(),
        "simulate",
        &[
            "simulate",
            "--law",
            "drifted:0.5,0.1",
            "--event",
            "max_final_qc",
            "--x",
            "3",
            "--v",
            "4",
            "--n",
            "30",
            "--trials",
            "200000",
            "--seed",
            "17",
            "--format",
            "json",
        ],
    )?;
    replay_round_trip(
        dir.path(),
        "simulate_csv",
        &[
            "simulate",
            "--law",
            "cexp",
            "--event",
            "truncated",
            "--y",
            "3",
            "--x",
            "6",
            "--v",
            "4.5",
            "--n",
            "20",
            "--trials",
            "100000",
            "--seed",
            "3",
            "--format",
            "csv",
        ],
    )
}

fn main() {
    let opts = SuiteOptions::default();
    let mut all = true;
    for c in &CRITERIA {
        let report = run_suite(c.suite, &opts);
        let in_time = report.elapsed <= c.limit;
        let ok = report.passed() && in_time;
        all &= ok;
        println!(
            "criterion {}: {} - {} ({} checks, {} failures, {:.2} s of {} s)",
            c.number,
            verdict(ok),
            c.title,
            report.checks,
            report.failures,
            report.elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
        for e in &report.examples {
            println!("    {e}");
        }
    }
    let start = Instant::now();
    let result = reproducibility();
    all &= result.is_ok();
    println!(
        "criterion 11: {} - byte-identical replay of bounds, compare and simulate ({:.2} s)",
        verdict(result.is_ok()),
        start.elapsed().as_secs_f64()
    );
    if let Err(e) = result {
        println!("    {e}");
    }
    if !all {
        std::process::exit(1);
    }
}
