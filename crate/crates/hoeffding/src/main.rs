use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hoeffding::commands::CommandError;
use hoeffding::config::{CommandKind, ExperimentConfig, Format};
use hoeffding::run::{execute, DEFAULT_SIMULATION_SEED, DEFAULT_SIMULATION_TRIALS};
use hoeffding::suites::{DEFAULT_MC_TRIALS, DEFAULT_SEED};
use hoeffding_core::montecarlo::{REPORT_GAMMA, VERIFY_GAMMA};

/// Tail bounds for martingales with increments bounded from above.
///
/// Exit status: 0 when every claim holds, 1 on a bound violation, Monte Carlo
/// flag or failed suite, 2 on invalid input.
#[derive(Parser)]
#[command(name = "hoeffding", version)]
struct Cli {
    /// Write the fully resolved parameters of this run to FILE for `replay`.
    #[arg(long, global = true, value_name = "FILE")]
    save_config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every applicable bound at one point.
    Bounds(BoundsArgs),
    /// Evaluate the core bounds over a grid and check their ordering.
    Compare(CompareArgs),
    /// Estimate an event probability and check it against the applicable bounds.
    Simulate(SimulateArgs),
    /// Run the property, oracle and Monte Carlo suites.
    Verify(VerifyArgs),
    /// Re-run a saved experiment file.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct Output {
    /// Write results to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, allow_negative_numbers = true)]
    x: f64,
    #[arg(long, allow_negative_numbers = true)]
    v: f64,
    #[arg(long)]
    n: u64,
    /// Lower bound magnitude of the increments, enables Azuma_refined and Ho11.
    #[arg(long)]
    b: Option<f64>,
    /// Truncation level, enables Fuk_Nagaev, Courbot and Haeusler.
    #[arg(long)]
    y: Option<f64>,
    /// Increment law for the exact tail terms of the truncated bounds.
    #[arg(long)]
    law: Option<String>,
    /// csv or json.
    #[arg(long, default_value = "json")]
    format: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CompareArgs {
    /// `default`, `dense` or a CSV file of `x,v,n` rows.
    #[arg(long, default_value = "default")]
    grid: String,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SimulateArgs {
    /// extremal:S, bounded:B, drifted:B,D, cexp or atoms:V@P;V@P;...
    #[arg(long)]
    law: String,
    /// stopped, max_final_qc, final or truncated.
    #[arg(long, default_value = "stopped")]
    event: String,
    #[arg(long, allow_negative_numbers = true)]
    x: f64,
    #[arg(long, allow_negative_numbers = true)]
    v: f64,
    #[arg(long)]
    n: u64,
    /// Truncation level of the `truncated` event.
    #[arg(long)]
    y: Option<f64>,
    /// Lower bound magnitude for Azuma_refined and Ho11, defaults to the law's.
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SIMULATION_TRIALS)]
    trials: u64,
    #[arg(long, default_value_t = DEFAULT_SIMULATION_SEED)]
    seed: u64,
    /// Confidence level of the Clopper-Pearson interval.
    #[arg(long, default_value_t = REPORT_GAMMA)]
    gamma: f64,
    /// csv or json.
    #[arg(long, default_value = "json")]
    format: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    /// `all` or a comma-separated list of suites.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Monte Carlo paths per instance.
    #[arg(long, default_value_t = DEFAULT_MC_TRIALS)]
    trials: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = VERIFY_GAMMA)]
    gamma: f64,
    /// Replace the cumulant with a broken one to check that the suites fail.
    #[arg(long, hide = true, value_parser = ["sign-flip"])]
    inject_fault: Option<String>,
    /// text or json.
    #[arg(long, default_value = "text")]
    format: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ReplayArgs {
    /// Experiment file written by `--save-config`.
    file: PathBuf,
    /// Overrides the output path stored in the file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn format(text: &str) -> Result<Format, CommandError> {
    text.parse()
        .map_err(|e: hoeffding::config::ConfigError| CommandError::Invalid(e.0))
}

fn resolve(command: Command) -> Result<ExperimentConfig, CommandError> {
    Ok(match command {
        Command::Bounds(a) => {
            let mut c = ExperimentConfig::new(CommandKind::Bounds, format(&a.format)?);
            c.x = Some(a.x);
            c.v = Some(a.v);
            c.n = Some(a.n);
            c.b = a.b;
            c.y = a.y;
            c.law = a.law;
            c.out = a.output.out;
            c
        }
        Command::Compare(a) => {
            let mut c = ExperimentConfig::new(CommandKind::Compare, format(&a.format)?);
            c.grid = Some(a.grid);
            c.out = a.output.out;
            c
        }
        Command::Simulate(a) => {
            let mut c = ExperimentConfig::new(CommandKind::Simulate, format(&a.format)?);
            c.law = Some(a.law);
            c.event = Some(a.event);
            c.x = Some(a.x);
            c.v = Some(a.v);
            c.n = Some(a.n);
            c.y = a.y;
            c.b = a.b;
            c.trials = Some(a.trials);
            c.seed = Some(a.seed);
            c.gamma = Some(a.gamma);
            c.out = a.output.out;
            c
        }
        Command::Verify(a) => {
            let mut c = ExperimentConfig::new(CommandKind::Verify, format(&a.format)?);
            c.suite = Some(a.suite);
            c.trials = Some(a.trials);
            c.seed = Some(a.seed);
            c.gamma = Some(a.gamma);
            c.inject_fault = a.inject_fault.is_some();
            c.out = a.output.out;
            c
        }
        Command::Replay(a) => {
            let text = fs::read_to_string(&a.file)
                .map_err(|e| CommandError::Invalid(format!("experiment file {:?}: {e}", a.file)))?;
            let mut c = ExperimentConfig::from_text(&text)
                .map_err(|e| CommandError::Invalid(format!("experiment file {:?}: {e}", a.file)))?;
            if a.out.is_some() {
                c.out = a.out;
            }
            c
        }
    })
}

fn run(cli: Cli) -> Result<bool, CommandError> {
    let config = resolve(cli.command)?;
    if let Some(path) = &cli.save_config {
        fs::write(path, config.to_text())?;
    }
    let color = config.out.is_none()
        && io::stdout().is_terminal()
        && std::env::var_os("NO_COLOR").is_none();
    let outcome = execute(&config, color)?;
    match &config.out {
        Some(path) => fs::write(path, &outcome.output)?,
        None => {
            let mut stdout = io::stdout().lock();
            let written = stdout
                .write_all(&outcome.output)
                .and_then(|_| stdout.flush());
            // A closed pipe (`| head`) is not an error of the run.
            match written {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(outcome.success)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
