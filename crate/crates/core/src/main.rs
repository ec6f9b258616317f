use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use qnd_detector::acceptance::{run_all, Outcome};
use qnd_detector::config::RunConfig;
use qnd_detector::output::{render_csv, write_atomic, Cell};
use qnd_detector::runner::{run, Subcommand};
use qnd_detector::Error;

/// Simulation and calibration runs for the photon detector.
#[derive(Debug, Parser)]
#[command(name = "qnd-detector", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    subcommand: Subcommand,

    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides the output directory from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Runs the acceptance suite after the experiment.
    #[arg(long)]
    check: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Io(_) => 1,
        _ => 2,
    }
}

fn write_acceptance(dir: &std::path::Path, outcomes: &[Outcome]) -> qnd_detector::Result<()> {
    let rows: Vec<Vec<Cell>> = outcomes
        .iter()
        .map(|o| vec![Cell::Int(o.id.into()), o.name.into(), if o.pass { "pass" } else { "fail" }.into()])
        .collect();
    write_atomic(&dir.join("acceptance.csv"), render_csv(&["criterion", "name", "result"], &rows)?.as_bytes())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match RunConfig::load(&cli.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }

    let name = cli.subcommand.name();
    let report = match run(cli.subcommand, &cfg, &cfg.output_dir) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {name}: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    println!("{name}: wrote {} files to {}", report.files.len() + 1, cfg.output_dir.display());
    for (key, value) in &report.metrics {
        println!("  {key} = {value}");
    }

    if !cli.check {
        return ExitCode::SUCCESS;
    }
    let outcomes = run_all(&cfg);
    for o in &outcomes {
        println!("{o}");
    }
    if let Err(e) = write_acceptance(&cfg.output_dir, &outcomes) {
        eprintln!("error: acceptance: {e}");
        return ExitCode::from(exit_code(&e));
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}
