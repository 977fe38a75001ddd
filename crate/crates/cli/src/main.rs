use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use collusion_cli::{
    cmd_simulate, cmd_stability, cmd_sweep, nu, preset, read_config, read_stability_config, resolve_threads, CliError,
    ExperimentConfig,
};
use collusion_core::stability::shipped_instances;

#[derive(Parser)]
#[command(name = "collusion", version, about = "Q-learning collusion experiments and stability checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// worker threads (also `COLLUSION_THREADS`)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one batch of sessions
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the Cartesian product of the config's sweep axes
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a figure preset
    Replicate {
        #[arg(long)]
        preset: String,
        /// desk-scaled parameters (default)
        #[arg(long, conflicts_with = "full")]
        scaled: bool,
        /// full-scale parameters
        #[arg(long)]
        full: bool,
        /// print the resolved config and exit
        #[arg(long)]
        print_config: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Exhaustive stability verification
    Stability {
        /// instance JSON; defaults to the shipped instances
        #[arg(long, conflicts_with = "instance")]
        config: Option<PathBuf>,
        /// a shipped instance name, or `all`
        #[arg(long)]
        instance: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// also write the absorbing-state cost digraph
        #[arg(long)]
        dot: bool,
    },
    /// Expected explorations per action for a decay rate
    Nu {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        beta: f64,
    },
}

/// Writes a line to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn prepare(mut cfg: ExperimentConfig, run: &RunArgs) -> Result<(ExperimentConfig, usize), CliError> {
    if let Some(seed) = run.seed {
        cfg.sim.master_seed = seed;
    }
    let threads = resolve_threads(run.threads, cfg.threads);
    Ok((cfg, threads))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, run } => {
            let (cfg, threads) = prepare(read_config(&config)?, &run)?;
            let outcome = cmd_simulate(&cfg, &run.out, threads)?;
            let r = &outcome.report;
            emit(
                &serde_json::json!({
                    "sessions": r.sessions,
                    "mean_price": r.mean_price,
                    "std_error": r.std_error,
                    "collusion_index": r.collusion_index,
                    "share_converged": r.share_converged,
                })
                .to_string(),
            );
        }
        Command::Sweep { config, run } => {
            let (cfg, threads) = prepare(read_config(&config)?, &run)?;
            let rows = cmd_sweep(&cfg, &run.out, threads)?;
            eprintln!("{} cells written to {}", rows.len(), run.out.display());
        }
        Command::Replicate { preset: id, full, print_config, run, .. } => {
            let (cfg, threads) = prepare(preset(&id, !full)?, &run)?;
            if print_config {
                emit(&serde_json::to_string_pretty(&cfg).unwrap_or_default());
                return Ok(());
            }
            let rows = cmd_sweep(&cfg, &run.out, threads)?;
            eprintln!("{id}: {} cells written to {}", rows.len(), run.out.display());
        }
        Command::Stability { config, instance, out, dot } => {
            let cfgs = match (config, instance.as_deref()) {
                (Some(path), _) => vec![read_stability_config(&path)?],
                (None, None | Some("all")) => shipped_instances(),
                (None, Some(name)) => {
                    let found: Vec<_> =
                        shipped_instances().into_iter().filter(|c| c.name.as_deref() == Some(name)).collect();
                    if found.is_empty() {
                        return Err(CliError::Config(format!("unknown stability instance `{name}`")));
                    }
                    found
                }
            };
            let result = cmd_stability(&cfgs, &out, dot);
            if let Ok(reports) = &result {
                for r in reports {
                    eprintln!(
                        "{}: {} states, {} absorbing, pass={}",
                        r.name.as_deref().unwrap_or("instance"),
                        r.state_count,
                        r.absorbing.len(),
                        r.pass
                    );
                }
            }
            result?;
        }
        Command::Nu { k, beta } => {
            emit(&nu(k, beta)?.to_string());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
