//! Symmetric two-player stage games on ordered finite action grids.
//!
//! A [`GameSpec`] stores the shared payoff table `u(own, opponent)` indexed by
//! grid position (economic order, strictly increasing action values) together
//! with a rank permutation. Rank 1 is the strict Nash action `a_1`; for
//! Bertrand games that is the lowest price, for auctions the highest bid.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on the number of actions. Argmax sets are tracked as `u64`
/// bitmasks in the simulation loop.
pub const MAX_ACTIONS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("an action grid needs at least 2 actions, got {0}")]
    TooFewActions(usize),
    #[error("at most {MAX_ACTIONS} actions are supported, got {0}")]
    TooManyActions(usize),
    #[error("action values must be finite and strictly increasing")]
    UnorderedGrid,
    #[error("Bertrand parameters need 0 <= cost < min_price <= wtp (cost={cost}, min_price={min_price}, wtp={wtp})")]
    BertrandOrdering { cost: f64, min_price: f64, wtp: f64 },
    #[error("prisoner's dilemma payoffs need u_CD < u_DD < u_CC < u_DC")]
    DilemmaOrdering,
    #[error("auction weight omega must lie in [0, 1], got {0}")]
    OmegaOutOfRange(f64),
    #[error("item value must be positive, got {0}")]
    NonPositiveValue(f64),
    #[error("payoff table has {got} entries, expected {expected}")]
    PayoffShape { expected: usize, got: usize },
    #[error("payoff entries must be finite")]
    NonFinitePayoff,
    #[error("rank must be a permutation of 1..={0}")]
    InvalidRank(usize),
}

/// Ordered action levels (prices or bids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActionGrid {
    values: Vec<f64>,
}

impl ActionGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, GameError> {
        if values.len() < 2 {
            return Err(GameError::TooFewActions(values.len()));
        }
        if values.len() > MAX_ACTIONS {
            return Err(GameError::TooManyActions(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GameError::UnorderedGrid);
        }
        Ok(Self { values })
    }

    /// `k` evenly spaced points from `lo` to `hi` inclusive.
    pub fn linspace(k: usize, lo: f64, hi: f64) -> Result<Self, GameError> {
        if k < 2 {
            return Err(GameError::TooFewActions(k));
        }
        let step = (hi - lo) / (k - 1) as f64;
        let mut values: Vec<f64> = (0..k).map(|i| lo + step * i as f64).collect();
        // pin the endpoint so `wtp` compares exactly
        values[k - 1] = hi;
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }
}

impl TryFrom<Vec<f64>> for ActionGrid {
    type Error = GameError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<ActionGrid> for Vec<f64> {
    fn from(grid: ActionGrid) -> Self {
        grid.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameLabel {
    Bertrand,
    Pd,
    MixedAuction,
    Custom,
}

impl fmt::Display for GameLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GameLabel::Bertrand => "bertrand",
            GameLabel::Pd => "pd",
            GameLabel::MixedAuction => "mixed_auction",
            GameLabel::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Serialized form of a game: `{label, grid, payoff (row-major), rank, params}`.
/// `rank[g]` is the 1-based rank of grid index `g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GameDocument {
    label: GameLabel,
    grid: ActionGrid,
    payoff: Vec<f64>,
    rank: Vec<usize>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

/// A symmetric game: both players share `payoff[own][opponent]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameDocument", into = "GameDocument")]
pub struct GameSpec {
    grid: ActionGrid,
    payoff: Vec<f64>,
    /// grid index -> 0-based rank (0 is `a_1`)
    rank: Vec<usize>,
    /// 0-based rank -> grid index
    by_rank: Vec<usize>,
    floor_payoff: f64,
    label: GameLabel,
    params: BTreeMap<String, f64>,
}

impl TryFrom<GameDocument> for GameSpec {
    type Error = GameError;

    fn try_from(doc: GameDocument) -> Result<Self, Self::Error> {
        let rank = doc
            .rank
            .iter()
            .map(|&r| r.checked_sub(1).ok_or(GameError::InvalidRank(doc.rank.len())))
            .collect::<Result<Vec<_>, _>>()?;
        GameSpec::from_parts(doc.label, doc.grid, doc.payoff, rank, doc.params)
    }
}

impl From<GameSpec> for GameDocument {
    fn from(game: GameSpec) -> Self {
        GameDocument {
            label: game.label,
            rank: game.rank.iter().map(|r| r + 1).collect(),
            grid: game.grid,
            payoff: game.payoff,
            params: game.params,
        }
    }
}

impl GameSpec {
    /// Builds a game from its parts. `rank` is 0-based (`rank[g] == 0` marks `a_1`).
    pub fn from_parts(
        label: GameLabel,
        grid: ActionGrid,
        payoff: Vec<f64>,
        rank: Vec<usize>,
        params: BTreeMap<String, f64>,
    ) -> Result<Self, GameError> {
        let k = grid.len();
        if payoff.len() != k * k {
            return Err(GameError::PayoffShape { expected: k * k, got: payoff.len() });
        }
        if payoff.iter().any(|u| !u.is_finite()) {
            return Err(GameError::NonFinitePayoff);
        }
        if rank.len() != k {
            return Err(GameError::InvalidRank(k));
        }
        let mut by_rank = vec![usize::MAX; k];
        for (g, &r) in rank.iter().enumerate() {
            if r >= k || by_rank[r] != usize::MAX {
                return Err(GameError::InvalidRank(k));
            }
            by_rank[r] = g;
        }
        let floor_payoff = payoff.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self { grid, payoff, rank, by_rank, floor_payoff, label, params })
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("game serializes")
    }

    pub fn k(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &ActionGrid {
        &self.grid
    }

    pub fn label(&self) -> GameLabel {
        self.label
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// The value `u̲`, minimum over the whole table.
    pub fn floor_payoff(&self) -> f64 {
        self.floor_payoff
    }

    /// Payoff of playing grid action `own` against grid action `opp`.
    #[inline]
    pub fn payoff(&self, own: usize, opp: usize) -> f64 {
        self.payoff[own * self.k() + opp]
    }

    /// Row-major payoff table in grid order.
    pub fn payoff_table(&self) -> &[f64] {
        &self.payoff
    }

    /// 0-based rank of a grid index (0 is the strict Nash action).
    pub fn rank_of(&self, grid_index: usize) -> usize {
        self.rank[grid_index]
    }

    /// Grid index holding 0-based rank `rank`.
    pub fn at_rank(&self, rank: usize) -> usize {
        self.by_rank[rank]
    }

    /// Grid index of `a_1`.
    pub fn nash_action(&self) -> usize {
        self.by_rank[0]
    }

    /// Payoff in rank coordinates: `u(a_k, a_k')` with 0-based ranks.
    pub fn payoff_by_rank(&self, k: usize, k2: usize) -> f64 {
        self.payoff(self.by_rank[k], self.by_rank[k2])
    }

    /// Demand share `q(own, opp)` for Bertrand-class games, `None` otherwise.
    pub fn demand(&self, own: usize, opp: usize) -> Option<f64> {
        if self.label != GameLabel::Bertrand {
            return None;
        }
        let wtp = self.param("wtp").unwrap_or(f64::INFINITY);
        let p = self.grid.value(own);
        if p > wtp {
            return Some(0.0);
        }
        Some(match own.cmp(&opp) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Greater => 0.0,
        })
    }

    /// Marginal cost for games with a demand decomposition.
    pub fn marginal_cost(&self) -> Option<f64> {
        match self.label {
            GameLabel::Bertrand => Some(self.param("cost").unwrap_or(0.0)),
            _ => None,
        }
    }
}

/// Bertrand duopoly with `k` evenly spaced prices in `[min_price, wtp]`.
pub fn make_bertrand(k: usize, min_price: f64, wtp: f64, cost: f64) -> Result<GameSpec, GameError> {
    if !(0.0 <= cost && cost < min_price && min_price <= wtp) {
        return Err(GameError::BertrandOrdering { cost, min_price, wtp });
    }
    let grid = ActionGrid::linspace(k, min_price, wtp)?;
    let mut payoff = Vec::with_capacity(k * k);
    for i in 0..k {
        let p = grid.value(i);
        for j in 0..k {
            let q = if p > wtp {
                0.0
            } else if i < j {
                1.0
            } else if i == j {
                0.5
            } else {
                0.0
            };
            payoff.push((p - cost) * q);
        }
    }
    let params = BTreeMap::from([
        ("k".to_string(), k as f64),
        ("min_price".to_string(), min_price),
        ("wtp".to_string(), wtp),
        ("cost".to_string(), cost),
    ]);
    GameSpec::from_parts(GameLabel::Bertrand, grid, payoff, (0..k).collect(), params)
}

/// Prisoner's dilemma. Grid index 0 is D (defect, `a_1`) and 1 is C.
pub fn make_prisoners_dilemma(u_cd: f64, u_dd: f64, u_cc: f64, u_dc: f64) -> Result<GameSpec, GameError> {
    if !(u_cd < u_dd && u_dd < u_cc && u_cc < u_dc) {
        return Err(GameError::DilemmaOrdering);
    }
    dilemma_table(u_cd, u_dd, u_cc, u_dc)
}

/// Same table as [`make_prisoners_dilemma`] without the ordering check, for
/// constructing deliberately broken instances.
pub fn dilemma_table(u_cd: f64, u_dd: f64, u_cc: f64, u_dc: f64) -> Result<GameSpec, GameError> {
    let grid = ActionGrid::new(vec![0.0, 1.0])?;
    // rows: own D, own C; cols: opp D, opp C
    let payoff = vec![u_dd, u_dc, u_cd, u_cc];
    let params = BTreeMap::from([
        ("u_cd".to_string(), u_cd),
        ("u_dd".to_string(), u_dd),
        ("u_cc".to_string(), u_cc),
        ("u_dc".to_string(), u_dc),
    ]);
    GameSpec::from_parts(GameLabel::Pd, grid, payoff, vec![0, 1], params)
}

/// `omega`·FPA + (1 − `omega`)·SPA over bids `{0, v/K, …, (K−1)v/K}`.
pub fn make_mixed_auction(k: usize, v: f64, omega: f64) -> Result<GameSpec, GameError> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(GameError::OmegaOutOfRange(omega));
    }
    if !(v > 0.0) {
        return Err(GameError::NonPositiveValue(v));
    }
    if k < 2 {
        return Err(GameError::TooFewActions(k));
    }
    let grid = ActionGrid::new((0..k).map(|i| i as f64 * v / k as f64).collect())?;
    let mut payoff = Vec::with_capacity(k * k);
    for i in 0..k {
        let own = grid.value(i);
        for j in 0..k {
            let opp = grid.value(j);
            let u = match i.cmp(&j) {
                std::cmp::Ordering::Greater => v - (omega * own + (1.0 - omega) * opp),
                std::cmp::Ordering::Equal => (v - own) / 2.0,
                std::cmp::Ordering::Less => 0.0,
            };
            payoff.push(u);
        }
    }
    let params = BTreeMap::from([("k".to_string(), k as f64), ("v".to_string(), v), ("omega".to_string(), omega)]);
    // highest bid is a_1
    let rank = (0..k).map(|g| k - 1 - g).collect();
    GameSpec::from_parts(GameLabel::MixedAuction, grid, payoff, rank, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AssumptionId {
    /// on-diagonal payoffs strictly increase in rank, all above `u̲`
    OnDiagonal,
    /// a higher-ranked action than the opponent's earns exactly `u̲`
    OffDiagonal,
    /// every `a_k`, k > 1, has a lower-ranked weakly profitable deviation
    LowerDeviation,
    /// payoffs are nondecreasing in the opponent's rank
    OpponentMonotone,
}

impl AssumptionId {
    pub fn code(&self) -> &'static str {
        match self {
            AssumptionId::OnDiagonal => "1.1",
            AssumptionId::OffDiagonal => "1.2",
            AssumptionId::LowerDeviation => "1.3",
            AssumptionId::OpponentMonotone => "1.4",
        }
    }
}

impl Serialize for AssumptionId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

/// One failed condition with a witness pair of 1-based ranks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub assumption: AssumptionId,
    pub witness: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub pass: bool,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn failed(&self, id: AssumptionId) -> bool {
        self.violations.iter().any(|v| v.assumption == id)
    }
}

/// Exhaustive check of the four payoff assumptions over the rank-ordered table.
pub fn check_assumptions(game: &GameSpec) -> AssumptionReport {
    let k = game.k();
    let u = |a: usize, b: usize| game.payoff_by_rank(a, b);
    let floor = game.floor_payoff();
    let mut violations = Vec::new();
    let mut push = |assumption, a: usize, b: usize| violations.push(Violation { assumption, witness: (a + 1, b + 1) });

    if !(floor < u(0, 0)) {
        push(AssumptionId::OnDiagonal, 0, 0);
    }
    for r in 1..k {
        if !(u(r - 1, r - 1) < u(r, r)) {
            push(AssumptionId::OnDiagonal, r - 1, r);
        }
    }
    for r in 0..k {
        for r2 in 0..r {
            if u(r, r2) != floor {
                push(AssumptionId::OffDiagonal, r, r2);
            }
        }
    }
    for r in 1..k {
        if !(0..r).any(|r2| u(r2, r) >= u(r, r)) {
            push(AssumptionId::LowerDeviation, r, r);
        }
    }
    for r in 0..k {
        for r2 in 0..k {
            for r3 in r2 + 1..k {
                if u(r, r2) > u(r, r3) {
                    push(AssumptionId::OpponentMonotone, r, r2);
                }
            }
        }
    }
    AssumptionReport { pass: violations.is_empty(), violations }
}

/// `(r_N, r_M)`: total profit at the strict Nash profile and the best total
/// profit over symmetric profiles.
pub fn benchmark_profits(game: &GameSpec) -> (f64, f64) {
    let a1 = game.nash_action();
    let r_n = 2.0 * game.payoff(a1, a1);
    let r_m = (0..game.k()).map(|a| 2.0 * game.payoff(a, a)).fold(f64::NEG_INFINITY, f64::max);
    (r_n, r_m)
}
