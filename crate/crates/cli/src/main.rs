use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpirs::bench::{figure_spec, run_experiment, write_csv, ExperimentSpec};
use dpirs::Error;

mod plot;

#[derive(Parser)]
#[command(name = "dpirs", version, about = "Dual-polarized IRS MIMO simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunOptions {
    /// Output directory for results.csv and plot.svg.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Extra `key=value` assignment applied after the experiment file; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a key=value experiment file.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        opts: RunOptions,
    },
    /// Run one of the preconfigured figure experiments.
    Figure {
        /// fig3, fig4, fig5, fig6, fig7, fig8, fig9, fig11 or fig12.
        name: String,
        #[command(flatten)]
        opts: RunOptions,
    },
}

enum Failure {
    Usage(Error),
    Runtime(Error),
}

fn configure(mut spec: ExperimentSpec, opts: &RunOptions) -> Result<ExperimentSpec, Error> {
    if let Some(seed) = opts.seed {
        spec.master_seed = seed;
    }
    if let Some(r) = opts.realizations {
        spec.realizations = r;
    }
    if let Some(w) = opts.workers {
        spec.workers = w;
    }
    for o in &opts.overrides {
        spec.apply(o)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn execute(spec: &ExperimentSpec, out: &Path) -> Result<(), Error> {
    fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let table = run_experiment(spec)?;
    for row in table.rows.iter().filter(|r| r.failures > 0) {
        eprintln!(
            "warning: {} at {} failed on {} realization(s)",
            row.scheme, row.sweep_value, row.failures
        );
    }
    write_csv(&table, &out.join("results.csv"))?;
    let svg = plot::render_svg(&plot::PlotSpec::from_table(&table, spec.sweep_axis.label()));
    let path = out.join("plot.svg");
    fs::write(&path, svg).map_err(|source| Error::Io { path, source })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (spec, opts) = match cli.command {
        Command::Run { spec, opts } => (ExperimentSpec::from_file(&spec), opts),
        Command::Figure { name, opts } => (figure_spec(&name), opts),
    };
    let result = spec
        .and_then(|s| configure(s, &opts))
        .map_err(Failure::Usage)
        .and_then(|s| execute(&s, &opts.out).map_err(Failure::Runtime));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
