//! Executes a resolved [`ExperimentConfig`]. Direct invocation and replay both go
//! through [`execute`], so a replayed run writes the same bytes.

use std::fs;

use hoeffding_core::montecarlo::REPORT_GAMMA;
use serde_json::{json, Value};

use crate::commands::{self, BoundsRequest, CommandError, SimulationRequest};
use crate::config::{CommandKind, ExperimentConfig, Format};
use crate::grid::{default_grid, dense_grid, parse_grid, GridPoint};
use crate::output::{number, write_csv, write_json, Row};
use crate::suites::{self, run_suite, Suite, SuiteOptions, SuiteReport};

pub const DEFAULT_SIMULATION_TRIALS: u64 = 100_000;
pub const DEFAULT_SIMULATION_SEED: u64 = 0;

/// Result of a run: the bytes to write and whether every claim held.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub output: Vec<u8>,
    /// `false` on a bound-ordering violation, a Monte Carlo flag or a failed suite.
    pub success: bool,
}

fn required<T: Copy>(
    value: Option<T>,
    name: &str,
    command: CommandKind,
) -> Result<T, CommandError> {
    value.ok_or_else(|| CommandError::Invalid(format!("{} needs --{name}", command.as_str())))
}

fn emit_rows(rows: &[Row], json: Value, format: Format) -> Result<Vec<u8>, CommandError> {
    let mut out = Vec::new();
    match format {
        Format::Csv => write_csv(rows, &mut out)?,
        Format::Json => write_json(&json, &mut out)?,
        Format::Text => {
            return Err(CommandError::Invalid(
                "text output is only available for verify".into(),
            ))
        }
    }
    Ok(out)
}

pub fn load_grid(spec: &str) -> Result<Vec<GridPoint>, CommandError> {
    match spec {
        "default" => Ok(default_grid()),
        "dense" => Ok(dense_grid()),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| CommandError::Invalid(format!("grid file {path:?}: {e}")))?;
            parse_grid(&text).map_err(|e| CommandError::Invalid(format!("grid file {path:?}: {e}")))
        }
    }
}

/// `color` only affects the text report of `verify`.
pub fn execute(config: &ExperimentConfig, color: bool) -> Result<Outcome, CommandError> {
    let kind = config.command;
    match kind {
        CommandKind::Bounds => {
            let law = config.law.as_deref().map(commands::parse_law).transpose()?;
            let req = BoundsRequest {
                x: required(config.x, "x", kind)?,
                v: required(config.v, "v", kind)?,
                n: required(config.n, "n", kind)?,
                b: config.b,
                y: config.y,
                law,
            };
            let bounds = commands::all_bounds(&req)?;
            let rows = commands::bounds_rows(&req, &bounds);
            let output = emit_rows(&rows, commands::bounds_json(&req, &bounds), config.format)?;
            Ok(Outcome {
                output,
                success: true,
            })
        }
        CommandKind::Compare => {
            let grid = load_grid(config.grid.as_deref().unwrap_or("default"))?;
            let c = commands::compare(&grid)?;
            let json = json!({
                "points": grid.len(),
                "rows": c.rows.iter().map(Row::to_json).collect::<Vec<_>>(),
                "violations": c.violations,
            });
            let output = emit_rows(&c.rows, json, config.format)?;
            Ok(Outcome {
                output,
                success: c.violations.is_empty(),
            })
        }
        CommandKind::Simulate => {
            let law = commands::parse_law(
                config
                    .law
                    .as_deref()
                    .ok_or_else(|| CommandError::Invalid("simulate needs --law".into()))?,
            )?;
            let event = config.event.as_deref().unwrap_or("stopped");
            let req = SimulationRequest {
                law,
                variant: commands::parse_event(event, config.y)?,
                x: required(config.x, "x", kind)?,
                v: required(config.v, "v", kind)?,
                n: required(config.n, "n", kind)?,
                b: config.b,
                trials: config.trials.unwrap_or(DEFAULT_SIMULATION_TRIALS),
                seed: config.seed.unwrap_or(DEFAULT_SIMULATION_SEED),
                gamma: config.gamma.unwrap_or(REPORT_GAMMA),
            };
            let report = commands::simulate(&req)?;
            let output = emit_rows(&report.rows(), report.to_json(), config.format)?;
            Ok(Outcome {
                output,
                success: !report.flagged(),
            })
        }
        CommandKind::Verify => {
            let selection = Suite::parse_selection(config.suite.as_deref().unwrap_or("all"))
                .map_err(CommandError::Invalid)?;
            let opts = SuiteOptions {
                cumulant: if config.inject_fault {
                    suites::sign_flipped_cumulant
                } else {
                    hoeffding_core::cumulant::f_lambda_t
                },
                mc_trials: config.trials.unwrap_or(suites::DEFAULT_MC_TRIALS),
                seed: config.seed.unwrap_or(suites::DEFAULT_SEED),
                gamma: config
                    .gamma
                    .unwrap_or(hoeffding_core::montecarlo::VERIFY_GAMMA),
            };
            if opts.mc_trials == 0 {
                return Err(CommandError::Invalid("verify needs --trials >= 1".into()));
            }
            let reports: Vec<SuiteReport> =
                selection.iter().map(|&s| run_suite(s, &opts)).collect();
            let success = reports.iter().all(SuiteReport::passed);
            let output = match config.format {
                Format::Json => {
                    let mut out = Vec::new();
                    write_json(&verify_json(&reports, &opts, success), &mut out)?;
                    out
                }
                Format::Csv => {
                    return Err(CommandError::Invalid("verify writes text or json".into()))
                }
                Format::Text => verify_text(&reports, &opts, success, color).into_bytes(),
            };
            Ok(Outcome { output, success })
        }
    }
}

fn verify_json(reports: &[SuiteReport], opts: &SuiteOptions, success: bool) -> Value {
    json!({
        "seed": opts.seed,
        "mc_trials": opts.mc_trials,
        "gamma": number(opts.gamma),
        "suites": reports.iter().map(|r| json!({
            "suite": r.suite.as_str(),
            "passed": r.passed(),
            "checks": r.checks,
            "failures": r.failures,
            "examples": r.examples,
            "seconds": number(r.elapsed.as_secs_f64()),
        })).collect::<Vec<_>>(),
        "passed": success,
    })
}

fn verdict_word(ok: bool, color: bool) -> &'static str {
    match (ok, color) {
        (true, true) => "\x1b[32mPASS\x1b[0m",
        (false, true) => "\x1b[31mFAIL\x1b[0m",
        (true, false) => "PASS",
        (false, false) => "FAIL",
    }
}

/// Human-readable report: one line per suite, then failing examples.
pub fn verify_text(
    reports: &[SuiteReport],
    opts: &SuiteOptions,
    success: bool,
    color: bool,
) -> String {
    let mut text = format!(
        "verify: seed {} with {} Monte Carlo trials per instance at gamma {}\n",
        opts.seed, opts.mc_trials, opts.gamma
    );
    for r in reports {
        text.push_str(&format!(
            "{:<16} {}  {} checks, {} failures, {:.2} s\n",
            r.suite.as_str(),
            verdict_word(r.passed(), color),
            r.checks,
            r.failures,
            r.elapsed.as_secs_f64()
        ));
        for e in &r.examples {
            text.push_str(&format!("    {e}\n"));
        }
    }
    text.push_str(&format!(
        "overall          {}\n",
        verdict_word(success, color)
    ));
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_parameters_are_errors() {
        let c = ExperimentConfig::new(CommandKind::Bounds, Format::Json);
        assert!(matches!(execute(&c, false), Err(CommandError::Invalid(_))));
        let mut c = ExperimentConfig::new(CommandKind::Simulate, Format::Json);
        c.x = Some(1.0);
        c.v = Some(1.0);
        c.n = Some(2);
        assert!(execute(&c, false).is_err());
    }

    #[test]
    fn execution_is_deterministic() {
        let mut c = ExperimentConfig::new(CommandKind::Simulate, Format::Csv);
        c.law = Some("extremal:1.0".into());
        c.x = Some(2.0);
        c.v = Some(3.0);
        c.n = Some(9);
        c.trials = Some(5000);
        let a = execute(&c, false).unwrap();
        assert_eq!(a, execute(&c, false).unwrap());
        assert!(a.success);
    }
}
