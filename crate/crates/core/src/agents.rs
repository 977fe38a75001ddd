//! Q-learning agents: Q-tables, initialization, action selection and the
//! asynchronous / synchronous / downward-demand update rules.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::GameSpec;

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("discount factor must lie in [0, 1), got {0}")]
    Discount(f64),
    #[error("learning rate must lie in (0, 1], got {0}")]
    LearningRate(f64),
    #[error("constant exploration rate must lie in (0, 1], got {0}")]
    Epsilon(f64),
    #[error("decay rate must be positive, got {0}")]
    DecayRate(f64),
    #[error("temperature parameters must be positive")]
    Temperature,
    #[error("optimistic initialization needs lo < hi, got [{lo}, {hi}]")]
    OptimisticRange { lo: f64, hi: f64 },
    #[error("explicit Q-table has {got} entries, expected {expected}")]
    TableShape { expected: usize, got: usize },
    #[error("Q-values must be finite")]
    NonFinite,
    #[error("downward-demand updating needs a game with a demand decomposition (Bertrand)")]
    NoDemand,
}

/// Whether the agent conditions on last period's action pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Memoryless,
    /// one-period memory: the observation is `own_action * K + opponent_action`
    #[serde(alias = "one_period_memory")]
    Memory,
}

impl Mode {
    pub fn obs_count(self, k: usize) -> usize {
        match self {
            Mode::Memoryless => 1,
            Mode::Memory => k * k,
        }
    }

    /// Observation after a period in which the agent played `own` against `opp`.
    #[inline]
    pub fn next_obs(self, k: usize, own: usize, opp: usize) -> usize {
        match self {
            Mode::Memoryless => 0,
            Mode::Memory => own * k + opp,
        }
    }
}

/// One agent's Q-values, `values[obs * K + action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QState {
    k: usize,
    mode: Mode,
    values: Vec<f64>,
}

impl QState {
    pub fn filled(k: usize, mode: Mode, value: f64) -> Self {
        Self { k, mode, values: vec![value; mode.obs_count(k) * k] }
    }

    pub fn from_values(k: usize, mode: Mode, values: Vec<f64>) -> Result<Self, AgentError> {
        let expected = mode.obs_count(k) * k;
        if values.len() != expected {
            return Err(AgentError::TableShape { expected, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AgentError::NonFinite);
        }
        Ok(Self { k, mode, values })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn obs_count(&self) -> usize {
        self.mode.obs_count(self.k)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, obs: usize) -> &[f64] {
        &self.values[obs * self.k..(obs + 1) * self.k]
    }

    #[inline]
    pub fn row_mut(&mut self, obs: usize) -> &mut [f64] {
        &mut self.values[obs * self.k..(obs + 1) * self.k]
    }

    #[inline]
    pub fn get(&self, obs: usize, action: usize) -> f64 {
        self.values[obs * self.k + action]
    }

    #[inline]
    pub fn set(&mut self, obs: usize, action: usize, value: f64) {
        self.values[obs * self.k + action] = value;
    }

    #[inline]
    pub fn max_value(&self, obs: usize) -> f64 {
        row_max(self.row(obs))
    }

    /// Argmax set of a row as a bitmask over actions.
    #[inline]
    pub fn argmax_mask(&self, obs: usize) -> u64 {
        argmax_mask(self.row(obs))
    }

    /// Lowest index in the argmax set.
    #[inline]
    pub fn first_argmax(&self, obs: usize) -> usize {
        self.argmax_mask(obs).trailing_zeros() as usize
    }

    /// Second-highest value of a row, counting ties (so a tied top returns the max).
    pub fn second_highest(&self, obs: usize) -> f64 {
        second_highest(self.row(obs))
    }

    /// Rows of CSV `(agent, obs, action, q_value)`.
    pub fn write_csv_rows<W: std::io::Write>(&self, agent: usize, out: &mut W) -> std::io::Result<()> {
        for obs in 0..self.obs_count() {
            for a in 0..self.k {
                writeln!(out, "{agent},{obs},{a},{}", self.get(obs, a))?;
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[inline]
pub(crate) fn argmax_mask(row: &[f64]) -> u64 {
    let max = row_max(row);
    row.iter().enumerate().filter(|(_, &v)| v == max).fold(0u64, |m, (i, _)| m | (1 << i))
}

pub(crate) fn second_highest(row: &[f64]) -> f64 {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in row {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    second
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonSchedule {
    Constant {
        epsilon: f64,
    },
    /// `ε_t = exp(−β t)`
    ExpDecay {
        beta: f64,
    },
}

impl EpsilonSchedule {
    #[inline]
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            EpsilonSchedule::Constant { epsilon } => epsilon,
            EpsilonSchedule::ExpDecay { beta } => (-beta * t as f64).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemperatureSchedule {
    Constant {
        tau: f64,
    },
    /// `τ_t = tau0 · exp(−rate t)`
    ExpDecay {
        tau0: f64,
        rate: f64,
    },
}

impl TemperatureSchedule {
    #[inline]
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            TemperatureSchedule::Constant { tau } => tau,
            TemperatureSchedule::ExpDecay { tau0, rate } => tau0 * (-rate * t as f64).exp(),
        }
    }
}

/// Action-selection policy. Ties among maximizers are broken uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Greedy,
    EpsilonGreedy { schedule: EpsilonSchedule },
    Boltzmann { temperature: TemperatureSchedule },
}

impl PolicySpec {
    pub fn validate(&self) -> Result<(), AgentError> {
        match *self {
            PolicySpec::Greedy => Ok(()),
            PolicySpec::EpsilonGreedy { schedule: EpsilonSchedule::Constant { epsilon } } => {
                if epsilon > 0.0 && epsilon <= 1.0 {
                    Ok(())
                } else {
                    Err(AgentError::Epsilon(epsilon))
                }
            }
            PolicySpec::EpsilonGreedy { schedule: EpsilonSchedule::ExpDecay { beta } } => {
                if beta > 0.0 {
                    Ok(())
                } else {
                    Err(AgentError::DecayRate(beta))
                }
            }
            PolicySpec::Boltzmann { temperature } => {
                let ok = match temperature {
                    TemperatureSchedule::Constant { tau } => tau > 0.0,
                    TemperatureSchedule::ExpDecay { tau0, rate } => tau0 > 0.0 && rate >= 0.0,
                };
                if ok {
                    Ok(())
                } else {
                    Err(AgentError::Temperature)
                }
            }
        }
    }

    /// Exploration rate at period `t` (0 for greedy and Boltzmann).
    pub fn epsilon(&self, t: u64) -> f64 {
        match self {
            PolicySpec::EpsilonGreedy { schedule } => schedule.at(t),
            _ => 0.0,
        }
    }

    pub fn constant_epsilon(&self) -> Option<f64> {
        match *self {
            PolicySpec::EpsilonGreedy { schedule: EpsilonSchedule::Constant { epsilon } } => Some(epsilon),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    #[default]
    Asynchronous,
    Synchronous,
    SynchronousDownward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRuleSpec {
    #[serde(default)]
    pub kind: UpdateKind,
    pub alpha: f64,
    pub delta: f64,
}

impl UpdateRuleSpec {
    pub fn new(kind: UpdateKind, alpha: f64, delta: f64) -> Result<Self, AgentError> {
        let rule = Self { kind, alpha, delta };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(AgentError::LearningRate(self.alpha));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(AgentError::Discount(self.delta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    /// discounted payoff against a uniformly randomizing opponent
    #[default]
    UniformOpponent,
    /// i.i.d. `U(lo, hi)`; optionally rescaled by `1/(1−δ)`
    OptimisticUniform {
        lo: f64,
        hi: f64,
        #[serde(default)]
        scale_by_horizon: bool,
    },
    /// copy of a full table in `obs * K + action` layout
    Explicit { table: Vec<f64> },
}

impl InitSpec {
    pub fn validate(&self) -> Result<(), AgentError> {
        match *self {
            InitSpec::OptimisticUniform { lo, hi, .. } if !(lo < hi) => Err(AgentError::OptimisticRange { lo, hi }),
            _ => Ok(()),
        }
    }
}

/// Initial Q-table for one agent.
pub fn init_q<R: Rng + ?Sized>(
    game: &GameSpec,
    rule: &UpdateRuleSpec,
    init: &InitSpec,
    mode: Mode,
    rng: &mut R,
) -> Result<QState, AgentError> {
    let k = game.k();
    if !(0.0..1.0).contains(&rule.delta) {
        return Err(AgentError::Discount(rule.delta));
    }
    match init {
        InitSpec::UniformOpponent => {
            let row: Vec<f64> = (0..k)
                .map(|a| {
                    let total: f64 = (0..k).map(|b| game.payoff(a, b)).sum();
                    total / ((1.0 - rule.delta) * k as f64)
                })
                .collect();
            let values = row.iter().copied().cycle().take(mode.obs_count(k) * k).collect();
            QState::from_values(k, mode, values)
        }
        &InitSpec::OptimisticUniform { lo, hi, scale_by_horizon } => {
            if !(lo < hi) {
                return Err(AgentError::OptimisticRange { lo, hi });
            }
            let scale = if scale_by_horizon { 1.0 / (1.0 - rule.delta) } else { 1.0 };
            let values = (0..mode.obs_count(k) * k).map(|_| rng.random_range(lo..hi) * scale).collect();
            QState::from_values(k, mode, values)
        }
        InitSpec::Explicit { table } => QState::from_values(k, mode, table.clone()),
    }
}

/// Uniform draw from the set bits of a nonzero mask.
#[inline]
pub(crate) fn pick_from_mask<R: Rng + ?Sized>(mask: u64, rng: &mut R) -> usize {
    let count = mask.count_ones();
    if count == 1 {
        return mask.trailing_zeros() as usize;
    }
    let mut nth = rng.random_range(0..count);
    let mut m = mask;
    loop {
        let bit = m.trailing_zeros();
        if nth == 0 {
            return bit as usize;
        }
        nth -= 1;
        m &= m - 1;
    }
}

/// Greedy choice with uniform tie-breaking.
#[inline]
pub fn greedy_action<R: Rng + ?Sized>(q: &QState, obs: usize, rng: &mut R) -> usize {
    pick_from_mask(q.argmax_mask(obs), rng)
}

/// Chooses an action at period `t`. Exploration draws are uniform over all K
/// actions, so they may return the greedy action.
pub fn select_action<R: Rng + ?Sized>(q: &QState, obs: usize, policy: &PolicySpec, t: u64, rng: &mut R) -> usize {
    match policy {
        PolicySpec::Greedy => greedy_action(q, obs, rng),
        PolicySpec::EpsilonGreedy { schedule } => {
            let eps = schedule.at(t);
            if eps > 0.0 && rng.random::<f64>() < eps {
                rng.random_range(0..q.k())
            } else {
                greedy_action(q, obs, rng)
            }
        }
        PolicySpec::Boltzmann { temperature } => {
            let tau = temperature.at(t);
            let row = q.row(obs);
            let max = row_max(row);
            if !(tau > 0.0) || !tau.is_finite() {
                return greedy_action(q, obs, rng);
            }
            let weights: Vec<f64> = row.iter().map(|v| ((v - max) / tau).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut draw = rng.random::<f64>() * total;
            for (a, w) in weights.iter().enumerate() {
                if draw < *w {
                    return a;
                }
                draw -= w;
            }
            // rounding left the draw past the last bucket
            greedy_action(q, obs, rng)
        }
    }
}

impl QState {
    /// Standard Q-learning: only cell `(obs, a_self)` moves toward
    /// `u(a_self, a_opp) + δ·max Q(next_obs, ·)`.
    #[inline]
    pub fn update_async(
        &mut self,
        obs: usize,
        a_self: usize,
        a_opp: usize,
        next_obs: usize,
        game: &GameSpec,
        rule: &UpdateRuleSpec,
    ) {
        let future = rule.delta * self.max_value(next_obs);
        let old = self.get(obs, a_self);
        let target = game.payoff(a_self, a_opp) + future;
        self.set(obs, a_self, (1.0 - rule.alpha) * old + rule.alpha * target);
    }

    /// Every cell of row `obs` moves toward its counterfactual payoff against
    /// the opponent's realized action.
    pub fn update_sync(&mut self, obs: usize, a_opp: usize, next_obs: usize, game: &GameSpec, rule: &UpdateRuleSpec) {
        let future = rule.delta * self.max_value(next_obs);
        let alpha = rule.alpha;
        for (a, q) in self.row_mut(obs).iter_mut().enumerate() {
            *q = (1.0 - alpha) * *q + alpha * (game.payoff(a, a_opp) + future);
        }
    }

    /// Synchronous updating with the realized demand: higher prices use
    /// `(p − c)·q` as an upper bound (values may only fall), lower prices as a
    /// lower bound (values may only rise).
    pub fn update_sync_downward(
        &mut self,
        obs: usize,
        a_self: usize,
        a_opp: usize,
        next_obs: usize,
        game: &GameSpec,
        rule: &UpdateRuleSpec,
    ) -> Result<(), AgentError> {
        let demand = game.demand(a_self, a_opp).ok_or(AgentError::NoDemand)?;
        let cost = game.marginal_cost().ok_or(AgentError::NoDemand)?;
        let future = rule.delta * self.max_value(next_obs);
        let alpha = rule.alpha;
        let realized = game.payoff(a_self, a_opp);
        let grid = game.grid().values();
        for (a, q) in self.row_mut(obs).iter_mut().enumerate() {
            let old = *q;
            *q = match a.cmp(&a_self) {
                std::cmp::Ordering::Equal => (1.0 - alpha) * old + alpha * (realized + future),
                std::cmp::Ordering::Greater => {
                    let bound = (grid[a] - cost) * demand;
                    old.min((1.0 - alpha) * old + alpha * (bound + future))
                }
                std::cmp::Ordering::Less => {
                    let bound = (grid[a] - cost) * demand;
                    old.max((1.0 - alpha) * old + alpha * (bound + future))
                }
            };
        }
        Ok(())
    }

    /// Applies the rule selected by `rule.kind`.
    #[inline]
    pub fn apply_update(
        &mut self,
        obs: usize,
        a_self: usize,
        a_opp: usize,
        next_obs: usize,
        game: &GameSpec,
        rule: &UpdateRuleSpec,
    ) -> Result<(), AgentError> {
        match rule.kind {
            UpdateKind::Asynchronous => {
                self.update_async(obs, a_self, a_opp, next_obs, game, rule);
                Ok(())
            }
            UpdateKind::Synchronous => {
                self.update_sync(obs, a_opp, next_obs, game, rule);
                Ok(())
            }
            UpdateKind::SynchronousDownward => self.update_sync_downward(obs, a_self, a_opp, next_obs, game, rule),
        }
    }
}
