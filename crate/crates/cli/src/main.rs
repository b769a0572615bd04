use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sdeonet_cli::{commands, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "sdeonet", version, about = "Chaos operator network experiments for SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate training pairs into dataset.csv.
    Simulate,
    /// Train on dataset.csv; writes model.ckpt and loss_history.csv.
    Train,
    /// Evaluate against fresh reference paths; writes metrics.csv.
    Evaluate,
    /// Reference chaos coefficients; writes coefficients.csv and parseval.csv.
    Pce,
    /// Error decomposition; writes decomposition.csv and truncation_sweep.csv.
    Decompose,
    /// Every stage in order.
    All,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.out = out;
    }
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    config.validate()?;
    let log = |line: &str| eprintln!("{line}");
    match cli.command {
        Command::Simulate => {
            commands::simulate(&config)?;
        }
        Command::Train => {
            commands::train(&config, |epoch, loss| eprintln!("epoch {epoch} loss {loss:.6e}"))?;
        }
        Command::Evaluate => {
            commands::evaluate(&config)?;
        }
        Command::Pce => {
            commands::pce(&config)?;
        }
        Command::Decompose => {
            commands::decompose(&config)?;
        }
        Command::All => commands::all(&config, log)?,
    }
    if !matches!(cli.command, Command::All) {
        commands::echo_config(&config)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let detail = e.render().to_string();
            let first = detail.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first).json_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
