//! Seeded repeated play: decay-ε sessions with convergence detection,
//! constant-ε sessions with skip-ahead, memory-mode cycle probing, and
//! deterministic parallel batches.

mod cycle;
mod schedule;
mod session;
mod skip;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentError, InitSpec, Mode, PolicySpec, QState, UpdateKind, UpdateRuleSpec};
use crate::games::{GameLabel, GameSpec};

pub use cycle::{detect_cycle, Cycle};
pub use schedule::{block_length, fuzzy_ceil, schedule_explorations};
pub use session::{run_constant_session, run_constant_session_with, run_decay_session, run_session};
pub use skip::{skip_profile, skip_update_closed_form};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("skip-ahead precondition violated")]
    SkipPrecondition,
}

/// How long a session runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Horizon {
    /// decaying exploration; stop at convergence or after `max_periods`
    Decay { max_periods: u64 },
    /// constant ε; run `⌈T/ε⌉` periods where `T` is the expected number of
    /// explorations per agent
    Constant { explorations: f64 },
}

fn default_window_explorations() -> f64 {
    1e4
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub game: GameSpec,
    pub policy: PolicySpec,
    pub update: UpdateRuleSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub mode: Mode,
    pub horizon: Horizon,
    pub convergence_window: u64,
    pub master_seed: u64,
    pub sessions: usize,
    /// record a trace row every `stride` periods
    #[serde(default)]
    pub trace_stride: Option<u64>,
    /// constant mode: the price window covers the last `window_explorations / ε` periods
    #[serde(default = "default_window_explorations")]
    pub window_explorations: f64,
    /// constant mode: weight only symmetric profiles in the window price
    #[serde(default = "default_true")]
    pub symmetric_window_only: bool,
}

impl SimConfig {
    /// A decay-mode config with the defaults used throughout: uniform-opponent
    /// initialization, memoryless agents, no trace.
    pub fn decay(game: GameSpec, policy: PolicySpec, update: UpdateRuleSpec, max_periods: u64, window: u64) -> Self {
        Self {
            game,
            policy,
            update,
            init: InitSpec::UniformOpponent,
            mode: Mode::Memoryless,
            horizon: Horizon::Decay { max_periods },
            convergence_window: window,
            master_seed: 0,
            sessions: 1,
            trace_stride: None,
            window_explorations: default_window_explorations(),
            symmetric_window_only: true,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.policy.validate()?;
        self.update.validate()?;
        self.init.validate()?;
        if self.convergence_window < 1 {
            return Err(EngineError::Config("convergence_window must be at least 1".into()));
        }
        if self.sessions < 1 {
            return Err(EngineError::Config("sessions must be at least 1".into()));
        }
        if self.trace_stride == Some(0) {
            return Err(EngineError::Config("trace_stride must be positive".into()));
        }
        if self.update.kind == UpdateKind::SynchronousDownward && self.game.label() != GameLabel::Bertrand {
            return Err(AgentError::NoDemand.into());
        }
        if let InitSpec::Explicit { table } = &self.init {
            let expected = self.mode.obs_count(self.game.k()) * self.game.k();
            if table.len() != expected {
                return Err(AgentError::TableShape { expected, got: table.len() }.into());
            }
        }
        match (self.horizon, self.policy.constant_epsilon()) {
            (Horizon::Decay { max_periods }, None) => {
                if max_periods < self.convergence_window {
                    return Err(EngineError::Config(format!(
                        "horizon {max_periods} is shorter than the convergence window {}",
                        self.convergence_window
                    )));
                }
            }
            (Horizon::Decay { .. }, Some(_)) => {
                return Err(EngineError::Config("constant-ε policies need a constant horizon".into()))
            }
            (Horizon::Constant { explorations }, Some(eps)) => {
                if !(explorations >= 0.0) || !explorations.is_finite() {
                    return Err(EngineError::Config("expected exploration count must be finite and ≥ 0".into()));
                }
                if eps >= 1.0 {
                    return Err(EngineError::Config("constant mode needs ε < 1".into()));
                }
                if !(self.window_explorations > 0.0) {
                    return Err(EngineError::Config("window_explorations must be positive".into()));
                }
            }
            (Horizon::Constant { .. }, None) => {
                return Err(EngineError::Config("constant horizon needs a constant-ε policy".into()))
            }
        }
        Ok(())
    }

    /// Total periods simulated in constant mode.
    pub fn constant_periods(&self) -> Option<u64> {
        match (self.horizon, self.policy.constant_epsilon()) {
            (Horizon::Constant { explorations }, Some(eps)) => Some(fuzzy_ceil(explorations / eps)),
            _ => None,
        }
    }
}

/// One sampled period. `t` is the period index; Q-derived columns are read
/// after that period's update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: u64,
    pub actions: (usize, usize),
    pub prices: (f64, f64),
    pub argmax: (usize, usize),
    pub q2nd: (f64, f64),
    pub sustainable: (f64, f64),
    pub stationary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Trace {
    pub stride: u64,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub const CSV_HEADER: &'static str =
        "t,a1,a2,price1,price2,argmax_1,argmax_2,q2nd_1,q2nd_2,sustainable_1,sustainable_2,stationary";

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.actions.0 + 1,
                r.actions.1 + 1,
                r.prices.0,
                r.prices.1,
                r.argmax.0 + 1,
                r.argmax.1 + 1,
                r.q2nd.0,
                r.q2nd.1,
                r.sustainable.0,
                r.sustainable.1,
                r.stationary
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionResult {
    pub session: usize,
    /// derived seed actually used for this session
    pub seed: u64,
    pub converged: bool,
    pub convergent_actions: Option<(usize, usize)>,
    pub cycle: Option<Cycle>,
    pub periods_elapsed: u64,
    /// constant mode only
    pub window_weighted_price: Option<f64>,
    /// constant mode only: visits per joint profile `a0 * K + a1` inside the window
    pub window_occupancy: Option<Vec<u64>>,
    /// greedy (lowest-index) actions at the end of the run
    pub final_profile: (usize, usize),
    #[serde(skip)]
    pub final_q: Vec<QState>,
    #[serde(skip)]
    pub trace: Option<Trace>,
}

impl SessionResult {
    pub fn cycle_length(&self) -> Option<usize> {
        if self.convergent_actions.is_some() {
            Some(1)
        } else {
            self.cycle.as_ref().map(Cycle::len)
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `seed_i = splitmix64(master ^ splitmix64(i))`.
pub fn session_seed(master_seed: u64, session_index: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(session_index as u64))
}

/// Stream `stream` of the ChaCha8 generator keyed by `seed`. Stream 0 drives
/// initialization and action selection; streams 1 and 2 drive the two agents'
/// exploration schedules in constant mode.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `cfg.sessions` sessions in parallel on the current rayon pool.
/// Output order is by session index and independent of scheduling.
pub fn run_batch(cfg: &SimConfig) -> Result<Vec<SessionResult>, EngineError> {
    cfg.validate()?;
    (0..cfg.sessions).into_par_iter().map(|i| run_session(cfg, i)).collect()
}

/// Same as [`run_batch`] on a dedicated pool with `threads` workers.
pub fn run_batch_with_threads(cfg: &SimConfig, threads: usize) -> Result<Vec<SessionResult>, EngineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| EngineError::Config(e.to_string()))?;
    pool.install(|| run_batch(cfg))
}
