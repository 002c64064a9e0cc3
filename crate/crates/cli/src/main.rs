//! `nlwave`: runs solitary-wave, refinement, truncation and decay studies
//! from a TOML config and writes CSV tables.

mod commands;
mod config;
mod output;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::Command;
use nlwave::ConvolutionPath;
use std::path::PathBuf;
use std::process::ExitCode;

const OUTPUT_DIR_ENV: &str = "NLWAVE_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "nlwave",
    version,
    about = "Nonlocal unidirectional wave equation studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Profiles at every output time plus a run summary
    Simulate(Common),
    /// Mesh-refinement sweep over grid.h_list, written to convergence.csv
    Converge(Common),
    /// Domain-truncation sweep over grid.n_list, written to truncation.csv
    Truncation(Common),
    /// Decay-envelope check at every snapshot, written to decay.csv
    Decay(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides output_dir in the config and the NLWAVE_OUTPUT_DIR variable
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for sweeps; defaults to the available parallelism
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = FastConv::Auto)]
    fast_conv: FastConv,
}

#[derive(Clone, Copy, ValueEnum)]
enum FastConv {
    Auto,
    On,
    Off,
}

impl From<FastConv> for ConvolutionPath {
    fn from(f: FastConv) -> Self {
        match f {
            FastConv::Auto => ConvolutionPath::Auto,
            FastConv::On => ConvolutionPath::Fast,
            FastConv::Off => ConvolutionPath::Direct,
        }
    }
}

fn run(command: Command, args: Common) -> Result<()> {
    if args.workers == Some(0) {
        bail!("--workers must be at least 1");
    }
    let mut plan = config::load(&args.config, command)?;
    plan.options.path = args.fast_conv.into();
    plan.options.parallel = args.workers != Some(1);
    let dir = args
        .output
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| plan.output_dir.clone())
        .context("no output directory: pass --output, set NLWAVE_OUTPUT_DIR or give output_dir")?;

    let compute = || match command {
        Command::Simulate => commands::simulate(&plan),
        Command::Converge => commands::converge(&plan),
        Command::Truncation => commands::truncation(&plan),
        Command::Decay => commands::decay(&plan),
    };
    let outcome = in_pool(args.workers, compute)??;
    let written = output::emit(&dir, &outcome.files)?;
    println!("{}", outcome.report);
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    Ok(builder.build().context("building worker pool")?.install(f))
}

#[cfg(not(feature = "parallel"))]
fn in_pool<T>(workers: Option<usize>, f: impl FnOnce() -> T) -> Result<T> {
    if workers.is_some_and(|n| n > 1) {
        eprintln!("warning: built without the parallel feature, running sequentially");
    }
    Ok(f())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Converge(a) => (Command::Converge, a),
        Sub::Truncation(a) => (Command::Truncation, a),
        Sub::Decay(a) => (Command::Decay, a),
    };
    match run(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
