use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use softrigid::simulator::Integrator;
use softrigid_cli::batch::run_batch;
use softrigid_cli::run::execute;
use softrigid_cli::scenario::Source;
use softrigid_cli::sweep::{run_sweep, SweepSpec};
use softrigid_cli::{exit, CliError, Overrides, Preset, Scenario};

#[derive(Parser)]
#[command(name = "softrigid", version, about = "Plan and simulate a two-unit soft-rigid agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan and roll out a scenario, or a seeded batch of them.
    Run(RunArgs),
    /// Refit the deformation spirals over modes and fibre lengths.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON; optional with --batch.
    file: Option<PathBuf>,
    /// Number of seeded runs with random start and target.
    #[arg(long, value_name = "N")]
    batch: Option<usize>,
    /// Seed for random configurations (base seed with --batch).
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Execute the plan without waiting for phase changes.
    #[arg(long)]
    no_thermal: bool,
    #[arg(long, value_parser = parse_integrator)]
    integrator: Option<Integrator>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep JSON.
    file: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn parse_integrator(s: &str) -> Result<Integrator, String> {
    s.parse().map_err(|e: softrigid::Error| e.to_string())
}

fn run(args: RunArgs) -> Result<u8, CliError> {
    let (scenario, text) = match &args.file {
        Some(path) => Scenario::load(path)?,
        None if args.batch.is_some() => (Scenario::default(), "{}".to_string()),
        None => {
            return Err(CliError::validation(
                Path::new("<command line>"),
                None,
                "a scenario file is required unless --batch is given",
            ))
        }
    };
    let path = args.file.clone().unwrap_or_else(|| PathBuf::from("<defaults>"));
    let overrides = Overrides {
        no_thermal: args.no_thermal,
        integrator: args.integrator,
        preset: args.preset,
        out: args.out.clone(),
        seed: args.seed,
    };
    let cfg = scenario.resolve(&Source { path: &path, text: &text }, &overrides)?;

    if let Some(n) = args.batch {
        let report = run_batch(&cfg, n, cfg.seed, &cfg.output)?;
        print!("{}", report.render());
        return Ok(report.exit_code());
    }

    let outcome = execute(&cfg, &cfg.output)?;
    let s = &outcome.summary;
    let runs: Vec<String> = s.mode_runs.iter().map(|r| format!("{}x{}", r.stiffness, r.len)).collect();
    println!(
        "{}: {} steps, distance {:.6}, mode runs [{}], {} pauses, {:.2} s simulated",
        serde_json::to_value(s.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        s.steps,
        s.final_distance,
        runs.join(" "),
        s.pauses.len(),
        s.duration
    );
    if let Some(e) = &s.error {
        eprintln!("{e}");
    }
    println!("artifacts in {}", cfg.output.display());
    Ok(outcome.status.exit_code())
}

fn sweep(args: SweepArgs) -> Result<u8, CliError> {
    let (spec, _) = SweepSpec::load(&args.file)?;
    let out = args
        .out
        .or_else(|| spec.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match run_sweep(&spec, &out) {
        Ok(report) => {
            print!("{}", report.render());
            Ok(exit::SUCCESS)
        }
        Err(CliError::Model(e @ softrigid::Error::OracleFailure { .. })) => {
            eprintln!("{e}");
            Ok(exit::NOT_CONVERGED)
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
