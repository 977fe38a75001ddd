//! Figure-replication presets.
//!
//! Desk scale divides the horizon by 100, the convergence window by 10 and
//! runs 30 sessions instead of 100. Constant-ε presets use ε = 1e-4 with
//! T = 1e4 instead of ε = 1e-6 with T = 1e6.

use collusion_core::agents::{EpsilonSchedule, InitSpec, Mode, PolicySpec, UpdateKind, UpdateRuleSpec};
use collusion_core::engine::{Horizon, SimConfig};
use collusion_core::games::{make_bertrand, make_mixed_auction, GameSpec};

use crate::config::{ExperimentConfig, SweepAxis};
use crate::CliError;

pub const PRESET_IDS: &[&str] = &["fig3a", "fig3b", "fig4", "fig5", "fig7", "fig8", "fig10", "fig11", "fig12"];

pub const BASELINE_ALPHA: f64 = 0.15;
pub const BASELINE_BETA: f64 = 1e-4;
pub const BASELINE_DELTA: f64 = 0.95;
pub const DEFAULT_SEED: u64 = 20_240_601;

struct Scale {
    sessions: usize,
    window: u64,
    horizon: u64,
    epsilon: f64,
    explorations: f64,
}

fn scale(scaled: bool) -> Scale {
    if scaled {
        Scale { sessions: 30, window: 10_000, horizon: 10_000_000, epsilon: 1e-4, explorations: 1e4 }
    } else {
        Scale { sessions: 100, window: 100_000, horizon: 1_000_000_000, epsilon: 1e-6, explorations: 1e6 }
    }
}

/// Bertrand game with ten prices on `[0.1, 1]`, unit WTP and zero cost.
pub fn baseline_game() -> GameSpec {
    make_bertrand(10, 0.1, 1.0, 0.0).expect("baseline game is valid")
}

/// Decaying ε-greedy, asynchronous updating, memoryless agents.
pub fn baseline_sim(game: GameSpec, scaled: bool) -> SimConfig {
    let s = scale(scaled);
    let mut sim = SimConfig::decay(
        game,
        PolicySpec::EpsilonGreedy { schedule: EpsilonSchedule::ExpDecay { beta: BASELINE_BETA } },
        UpdateRuleSpec { kind: UpdateKind::Asynchronous, alpha: BASELINE_ALPHA, delta: BASELINE_DELTA },
        s.horizon,
        s.window,
    );
    sim.sessions = s.sessions;
    sim.master_seed = DEFAULT_SEED;
    sim
}

/// `lo, lo + step, …` up to `hi` inclusive, rounded to 10 decimals.
pub fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((lo + i as f64 * step) * 1e10).round() / 1e10).collect()
}

/// `{1e-5, 2.5e-5, 5e-5, 7.5e-5, …, 5e-4}`: 21 values.
pub fn beta_grid() -> Vec<f64> {
    let mut out = vec![1e-5];
    out.extend((1..=20).map(|i| i as f64 * 2.5e-5));
    out
}

fn wrap(id: &str, sim: SimConfig, sweep: Vec<SweepAxis>, scaled: bool) -> ExperimentConfig {
    ExperimentConfig { sim, sweep, threads: None, preset: Some(id.to_string()), scaled }
}

fn axis(param: &str, values: Vec<f64>) -> SweepAxis {
    SweepAxis { param: param.to_string(), values }
}

fn memory_sim(scaled: bool) -> SimConfig {
    let mut sim = baseline_sim(baseline_game(), scaled);
    sim.mode = Mode::Memory;
    sim.policy = PolicySpec::EpsilonGreedy { schedule: EpsilonSchedule::ExpDecay { beta: 1e-5 } };
    if scaled {
        sim.horizon = Horizon::Decay { max_periods: 50_000_000 };
        sim.sessions = 20;
    }
    sim
}

/// Expands a figure id into a fully resolved experiment.
pub fn preset(id: &str, scaled: bool) -> Result<ExperimentConfig, CliError> {
    let s = scale(scaled);
    let cfg = match id {
        "fig3a" | "fig3b" => {
            let mut sim = baseline_sim(baseline_game(), scaled);
            if id == "fig3b" {
                sim.update.delta = 0.0;
            }
            wrap(id, sim, vec![axis("alpha", steps(0.05, 0.95, 0.05)), axis("beta", beta_grid())], scaled)
        }
        "fig4" => {
            let sim = baseline_sim(baseline_game(), scaled);
            wrap(id, sim, vec![axis("delta", steps(0.0, 0.95, 0.05))], scaled)
        }
        "fig5" => {
            let mut sim = baseline_sim(baseline_game(), scaled);
            sim.policy = PolicySpec::EpsilonGreedy { schedule: EpsilonSchedule::Constant { epsilon: s.epsilon } };
            sim.horizon = Horizon::Constant { explorations: s.explorations };
            if scaled {
                sim.sessions = 20;
            }
            wrap(id, sim, vec![axis("delta", steps(0.0, 0.95, 0.05))], scaled)
        }
        "fig7" => {
            let sim = baseline_sim(baseline_game(), scaled);
            wrap(id, sim, vec![axis("min_price", steps(0.1, 0.6, 0.05))], scaled)
        }
        "fig8" => {
            let mut sim = baseline_sim(baseline_game(), scaled);
            sim.sessions = 1;
            sim.trace_stride = Some(if scaled { 1_000 } else { 100_000 });
            wrap(id, sim, Vec::new(), scaled)
        }
        "fig10" => {
            let game = make_mixed_auction(10, 1.0, 0.0).expect("valid auction");
            let sim = baseline_sim(game, scaled);
            wrap(id, sim, vec![axis("omega", steps(0.0, 1.0, 0.05))], scaled)
        }
        "fig11" => wrap(id, memory_sim(scaled), vec![axis("delta", steps(0.0, 0.95, 0.05))], scaled),
        "fig12" => wrap(id, memory_sim(scaled), Vec::new(), scaled),
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESET_IDS.join(", ")
            )))
        }
    };
    debug_assert!(matches!(cfg.sim.init, InitSpec::UniformOpponent));
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for id in PRESET_IDS {
            for scaled in [true, false] {
                let cfg = preset(id, scaled).unwrap();
                cfg.validate().unwrap();
                assert_eq!(cfg.scaled, scaled);
            }
        }
    }

    #[test]
    fn fig3_grid_is_19_by_21() {
        let cfg = preset("fig3a", true).unwrap();
        assert_eq!(cfg.cells().len(), 399);
        assert_eq!(beta_grid().len(), 21);
        assert!((beta_grid()[20] - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn fig3b_differs_only_in_delta() {
        let a = preset("fig3a", true).unwrap();
        let mut b = preset("fig3b", true).unwrap();
        assert_eq!(b.sim.update.delta, 0.0);
        b.sim.update.delta = a.sim.update.delta;
        b.preset = a.preset.clone();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("fig99", true), Err(CliError::Config(_))));
    }
}
