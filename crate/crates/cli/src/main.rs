use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nepv_cli::output::{to_csv, write_outputs};
use nepv_cli::presets::DEFAULT_SEED;
use nepv_cli::{run_experiment, CliError, ExperimentSpec, Preset};

#[derive(Parser)]
#[command(
    name = "nepv",
    version,
    about = "Perturbation and error bounds for eigenvector-dependent nonlinear eigenproblems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Kohn–Sham a priori bounds (n = 50, k = 8, four grid steps, ten ε).
    Table1(RunOpts),
    /// Trace-ratio a priori bounds (n = 100, k = 5, five β, three δ).
    Table2(RunOpts),
    /// Trace-ratio error bounds along SCF (β = 5, 10, 15).
    Table3(RunOpts),
}

#[derive(Args)]
struct RunOpts {
    /// CSV destination; a `<out>.meta.toml` sidecar is written next to it.
    /// Without it the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config; presets default to 42).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Samples per supremum estimate (overrides the config).
    #[arg(long)]
    samples: Option<usize>,
}

fn execute(mut spec: ExperimentSpec, opts: RunOpts) -> Result<(), CliError> {
    if let Some(seed) = opts.seed {
        spec.set_seed(seed);
    }
    if let Some(samples) = opts.samples {
        spec.estimator.samples = samples;
    }
    if let Some(out) = opts.out {
        spec.output = Some(out);
    }
    let start = Instant::now();
    let rows = run_experiment(&spec, opts.workers)?;
    let elapsed = start.elapsed();
    match spec.output.as_deref() {
        Some(path) => write_outputs(path, &spec, &rows, opts.workers, elapsed)?,
        None => std::io::stdout()
            .write_all(to_csv(&rows).as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}")))?,
    }
    let failed: Vec<_> = rows.iter().filter(|r| r.failed).collect();
    for r in &failed {
        eprintln!(
            "nepv: point failed: kind={} replicate={} {}",
            r.kind,
            r.replicate,
            r.notes.join("; ")
        );
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical {
            failed: failed.len(),
            total: rows.len(),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, opts } => ExperimentSpec::from_path(&config).and_then(|spec| execute(spec, opts)),
        Command::Table1(opts) => execute(Preset::Table1.spec(DEFAULT_SEED), opts),
        Command::Table2(opts) => execute(Preset::Table2.spec(DEFAULT_SEED), opts),
        Command::Table3(opts) => execute(Preset::Table3.spec(DEFAULT_SEED), opts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nepv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
