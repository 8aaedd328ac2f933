use std::path::PathBuf;
use std::process::ExitCode;

use acbpc_cli::app::{self, Common};
use acbpc_cli::ExperimentPreset;
use acbpc_core::Protocol;
use clap::{Args, Parser, Subcommand};

/// Monte Carlo simulator of pilot random access in a crowded massive MIMO
/// cell (SUCRe, ACBPC and baseline).
#[derive(Parser, Debug)]
#[command(name = "acbpc", version = acbpc_cli::output::version())]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// key = value config file laid over the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one key; repeatable and applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Parent directory for the timestamped result directory.
    #[arg(long, default_value = "results", global = true)]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent points (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one configuration.
    Run,
    /// Simulate every combination of the given axes.
    Sweep {
        /// Comma-separated K0 values.
        #[arg(long, value_delimiter = ',')]
        k0: Vec<usize>,
        /// Comma-separated protocols (sucre, acbpc, baseline).
        #[arg(long, value_delimiter = ',')]
        protocols: Vec<Protocol>,
        /// Comma-separated interference settings (true, false).
        #[arg(long, value_delimiter = ',')]
        interference: Vec<bool>,
    },
    /// Run a named experiment.
    Preset {
        /// fig1-attempts, fig1-failures, fig2a-res-vs-st, fig2b-res-vs-dist,
        /// fig3-dist-performance, fig4-power-energy or bound-table.
        name: ExperimentPreset,
    },
    /// Write the resolution bound table.
    Bound {
        #[arg(long, default_value_t = 50)]
        max_n: usize,
        /// Trials per contender count for the idealized frequency.
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = Common {
        config: cli.common.config,
        sets: cli.common.sets,
        out: cli.common.out,
        seed: cli.common.seed,
        workers: cli.common.workers,
    };
    let result = match cli.command {
        Command::Run => app::run(&common),
        Command::Sweep {
            k0,
            protocols,
            interference,
        } => app::sweep(&common, &k0, &protocols, &interference),
        Command::Preset { name } => app::preset(&common, name),
        Command::Bound { max_n, trials } => app::bound(&common, max_n, trials),
    };
    match result {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
