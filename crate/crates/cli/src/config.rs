//! Experiment documents: a simulation config plus sweep axes and run options.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use collusion_core::agents::{EpsilonSchedule, PolicySpec};
use collusion_core::engine::{Horizon, SimConfig};
use collusion_core::games::{make_bertrand, make_mixed_auction, GameLabel};

use crate::CliError;

/// At most this many sweep axes per run.
pub const MAX_AXES: usize = 2;

/// Parameters a sweep axis may vary.
pub const AXIS_PARAMS: &[&str] = &["alpha", "delta", "beta", "epsilon", "explorations", "min_price", "omega", "k"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub sim: SimConfig,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    /// worker threads; `COLLUSION_THREADS` and `--threads` override it
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub preset: Option<String>,
    /// desk-scaled run (shorter horizon, smaller window, fewer sessions)
    #[serde(default)]
    pub scaled: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.sweep.len() > MAX_AXES {
            return Err(CliError::Budget(format!("{} sweep axes given, at most {MAX_AXES} allowed", self.sweep.len())));
        }
        for axis in &self.sweep {
            if axis.values.is_empty() {
                return Err(CliError::Config(format!("sweep axis `{}` has no values", axis.param)));
            }
            for &v in &axis.values {
                let mut probe = self.sim.clone();
                apply_axis(&mut probe, &axis.param, v)?;
                probe.validate().map_err(|e| CliError::Config(format!("{} = {v}: {e}", axis.param)))?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form. The thread count is left out since
    /// it does not change any output.
    pub fn hash(&self) -> String {
        let canonical = Self { threads: None, ..self.clone() };
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Comment line heading every CSV output.
    pub fn csv_banner(&self) -> String {
        format!("# config_hash={} master_seed={} scaled={}", self.hash(), self.sim.master_seed, self.scaled)
    }

    /// Cartesian product of the sweep axes, first axis outermost.
    pub fn cells(&self) -> Vec<Vec<f64>> {
        let mut cells = vec![Vec::new()];
        for axis in &self.sweep {
            cells = cells
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
        }
        cells
    }

    /// The simulation config for one sweep cell.
    pub fn cell_config(&self, cell: &[f64]) -> Result<SimConfig, CliError> {
        let mut sim = self.sim.clone();
        for (axis, &v) in self.sweep.iter().zip(cell) {
            apply_axis(&mut sim, &axis.param, v)?;
        }
        Ok(sim)
    }
}

fn game_param(sim: &SimConfig, name: &str) -> Result<f64, CliError> {
    sim.game.param(name).ok_or_else(|| CliError::Config(format!("game has no `{name}` parameter")))
}

/// Sets one named parameter, rebuilding the game where needed.
pub fn apply_axis(sim: &mut SimConfig, param: &str, value: f64) -> Result<(), CliError> {
    let game_err = |e: collusion_core::games::GameError| CliError::Config(e.to_string());
    match param {
        "alpha" => sim.update.alpha = value,
        "delta" => sim.update.delta = value,
        "beta" => match &mut sim.policy {
            PolicySpec::EpsilonGreedy { schedule: EpsilonSchedule::ExpDecay { beta } } => *beta = value,
            _ => return Err(CliError::Config("axis `beta` needs an exp_decay ε-greedy policy".into())),
        },
        "epsilon" => match &mut sim.policy {
            PolicySpec::EpsilonGreedy { schedule: EpsilonSchedule::Constant { epsilon } } => *epsilon = value,
            _ => return Err(CliError::Config("axis `epsilon` needs a constant ε-greedy policy".into())),
        },
        "explorations" => match &mut sim.horizon {
            Horizon::Constant { explorations } => *explorations = value,
            _ => return Err(CliError::Config("axis `explorations` needs a constant horizon".into())),
        },
        "min_price" | "k" | "omega" => {
            let label = sim.game.label();
            sim.game = match (label, param) {
                (GameLabel::Bertrand, "min_price" | "k") => {
                    let mut k = game_param(sim, "k")?;
                    let mut min_price = game_param(sim, "min_price")?;
                    if param == "k" {
                        k = value;
                    } else {
                        min_price = value;
                    }
                    make_bertrand(k as usize, min_price, game_param(sim, "wtp")?, game_param(sim, "cost")?)
                        .map_err(game_err)?
                }
                (GameLabel::MixedAuction, "omega" | "k") => {
                    let mut k = game_param(sim, "k")?;
                    let mut omega = game_param(sim, "omega")?;
                    if param == "k" {
                        k = value;
                    } else {
                        omega = value;
                    }
                    make_mixed_auction(k as usize, game_param(sim, "v")?, omega).map_err(game_err)?
                }
                _ => return Err(CliError::Config(format!("axis `{param}` does not apply to a {label} game"))),
            };
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown sweep parameter `{other}` (expected one of {})",
                AXIS_PARAMS.join(", ")
            )))
        }
    }
    Ok(())
}
