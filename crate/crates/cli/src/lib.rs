//! Experiment runner: simulations, sweeps, figure presets and stability
//! verification, writing CSV and JSON artifacts.

pub mod config;
pub mod output;
pub mod presets;

use std::path::Path;

use thiserror::Error;

use collusion_core::engine::{run_batch_with_threads, SessionResult};
use collusion_core::metrics::{aggregate, AggregateReport};
use collusion_core::stability::{verify, write_cost_dot, StabilityConfig, StabilityError, StabilityReport};

pub use config::{apply_axis, ExperimentConfig, SweepAxis};
pub use output::SweepRow;
pub use presets::{preset, PRESET_IDS};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "COLLUSION_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<StabilityError> for CliError {
    fn from(e: StabilityError) -> Self {
        match e {
            StabilityError::Budget { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

/// Flag, then `COLLUSION_THREADS`, then the config field, then all cores.
pub fn resolve_threads(flag: Option<usize>, configured: Option<usize>) -> usize {
    let env = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok());
    flag.or(env)
        .or(configured)
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_stability_config(path: &Path) -> Result<StabilityConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: config parse error: {e}", path.display())))
}

fn create_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

pub struct SimulateOutcome {
    pub results: Vec<SessionResult>,
    pub report: AggregateReport,
}

/// Runs one batch without touching the filesystem.
pub fn simulate(cfg: &ExperimentConfig, threads: usize) -> Result<SimulateOutcome, CliError> {
    let results = run_batch_with_threads(&cfg.sim, threads).map_err(|e| CliError::Config(e.to_string()))?;
    let report = aggregate(&results, &cfg.sim.game);
    Ok(SimulateOutcome { results, report })
}

/// Runs one batch and writes `summary.json`, `sessions.csv`, `q_final_<i>.csv`,
/// `trace_<i>.csv` (when traced) and `cycles.csv` (memory agents).
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<SimulateOutcome, CliError> {
    cfg.validate()?;
    create_dir(out)?;
    let outcome = simulate(cfg, threads)?;
    let banner = cfg.csv_banner();
    let game = &cfg.sim.game;
    output::write_json(&out.join("summary.json"), &output::Summary::new(cfg, &outcome.report, &outcome.results))?;
    output::write_file(&out.join("sessions.csv"), &output::sessions_csv(&banner, &outcome.results, game))?;
    for r in &outcome.results {
        output::write_file(&out.join(format!("q_final_{}.csv", r.session)), &output::q_final_csv(&banner, r))?;
        if let Some(text) = output::trace_csv(&banner, r) {
            output::write_file(&out.join(format!("trace_{}.csv", r.session)), &text)?;
        }
    }
    if cfg.sim.mode == collusion_core::agents::Mode::Memory {
        output::write_file(&out.join("cycles.csv"), &output::cycles_csv(&banner, &outcome.report))?;
    }
    Ok(outcome)
}

/// Aggregates every Cartesian cell without touching the filesystem. Cells
/// share the master seed. A failing cell becomes an error row.
pub fn sweep(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<SweepRow>, CliError> {
    cfg.validate()?;
    let rows = cfg
        .cells()
        .into_iter()
        .map(|cell| match cfg.cell_config(&cell) {
            Ok(sim) => match run_batch_with_threads(&sim, threads) {
                Ok(results) => {
                    let report = aggregate(&results, &sim.game);
                    SweepRow::from_results(cell, &results, &sim.game, &report)
                }
                Err(e) => SweepRow::failed(cell, &e.to_string()),
            },
            Err(e) => SweepRow::failed(cell, &e.to_string()),
        })
        .collect();
    Ok(rows)
}

/// Writes `sweep.csv` and `sweep.json`; with no axes this is [`cmd_simulate`].
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<Vec<SweepRow>, CliError> {
    if cfg.sweep.is_empty() {
        let outcome = cmd_simulate(cfg, out, threads)?;
        return Ok(vec![SweepRow::from_results(Vec::new(), &outcome.results, &cfg.sim.game, &outcome.report)]);
    }
    let rows = sweep(cfg, threads)?;
    create_dir(out)?;
    let axes: Vec<String> = cfg.sweep.iter().map(|a| a.param.clone()).collect();
    output::write_file(&out.join("sweep.csv"), &output::sweep_csv(&cfg.csv_banner(), &axes, &rows))?;
    let doc = serde_json::json!({
        "config": cfg,
        "config_hash": cfg.hash(),
        "master_seed": cfg.sim.master_seed,
        "scaled": cfg.scaled,
        "rows": rows,
    });
    output::write_json(&out.join("sweep.json"), &doc)?;
    Ok(rows)
}

/// Verifies each instance and writes `stability.json` (one report, or an
/// array for several) plus `cost_digraph.dot` per instance when asked.
/// Fails with a verification error if any instance does not pass.
pub fn cmd_stability(cfgs: &[StabilityConfig], out: &Path, dot: bool) -> Result<Vec<StabilityReport>, CliError> {
    create_dir(out)?;
    let mut reports = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        reports.push(verify(cfg)?);
    }
    if let [single] = reports.as_slice() {
        output::write_json(&out.join("stability.json"), single)?;
    } else {
        output::write_json(&out.join("stability.json"), &reports)?;
    }
    if dot {
        for (i, r) in reports.iter().enumerate() {
            let name = match (&r.name, reports.len()) {
                (_, 1) => "cost_digraph.dot".to_string(),
                (Some(n), _) => format!("cost_digraph_{n}.dot"),
                (None, _) => format!("cost_digraph_{i}.dot"),
            };
            let mut buf = Vec::new();
            write_cost_dot(r, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
            output::write_file(&out.join(name), &String::from_utf8_lossy(&buf))?;
        }
    }
    let failed: Vec<String> = reports
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.pass)
        .map(|(i, r)| r.name.clone().unwrap_or_else(|| format!("#{i}")))
        .collect();
    if failed.is_empty() {
        Ok(reports)
    } else {
        Err(CliError::Verification(format!("instances failed: {}", failed.join(", "))))
    }
}

/// Expected number of explorations per action under `ε_t = exp(−βt)`:
/// `ν = 1 / (K(1 − e^{−β}))`.
pub fn nu(k: usize, beta: f64) -> Result<f64, CliError> {
    if k == 0 || beta.is_nan() || beta <= 0.0 {
        return Err(CliError::Config("ν needs K ≥ 1 and β > 0".into()));
    }
    Ok(1.0 / (k as f64 * -(-beta).exp_m1()))
}
