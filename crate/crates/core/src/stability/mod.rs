//! Exhaustive stochastic-stability verification on small grid-snapped
//! instances: recurrent classes, absorbing-state characterization, mutation
//! costs, rooted-tree costs, the order on absorbing states and the
//! auction perturbation sets.

mod arborescence;
mod auction;
mod graph;
mod order;
mod space;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::{make_bertrand, make_mixed_auction, make_prisoners_dilemma, GameSpec};

pub use arborescence::{min_arborescence, min_arborescence_brute};
pub use auction::{
    published_threshold, scan_valid_perturbations, spa_equivalence_threshold, valid_perturbations_auction,
    PerturbationInterval,
};
pub use graph::{closed_classes, cost_matrix, costs_from, one_step_cost, strongly_connected, unperturbed_closure, INF};
pub use order::{enumerate_g, g_candidates, order_compare, precedes, AbsorbingView, OrderRelation, Relation};
pub use space::{snap_toward, GridSpec, StateSpace};

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("grid misaligned: {0}")]
    Grid(String),
    #[error("state space of {states} states exceeds the budget of {budget}")]
    Budget { states: u128, budget: usize },
    #[error("invalid stability parameters: {0}")]
    Params(String),
}

fn default_alpha() -> f64 {
    0.5
}

fn default_budget() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub game: GameSpec,
    pub delta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub eta: f64,
    /// defaults to `max u/(1−δ)`
    #[serde(default)]
    pub q_upper: Option<f64>,
    #[serde(default = "default_budget")]
    pub max_states: usize,
}

impl StabilityConfig {
    pub fn new(name: &str, game: GameSpec, delta: f64, eta: f64) -> Self {
        Self {
            name: Some(name.to_string()),
            game,
            delta,
            alpha: default_alpha(),
            eta,
            q_upper: None,
            max_states: default_budget(),
        }
    }
}

/// The instances verified by default.
pub fn shipped_instances() -> Vec<StabilityConfig> {
    let pd = make_prisoners_dilemma(0.0, 1.0, 2.0, 3.0).expect("valid dilemma");
    let mut out = vec![
        StabilityConfig::new("pd_delta0", pd.clone(), 0.0, 0.25),
        StabilityConfig::new("pd_delta05", pd, 0.5, 0.25),
        StabilityConfig::new("bertrand_k3", make_bertrand(3, 0.2, 1.0, 0.0).expect("valid bertrand"), 0.0, 0.1),
    ];
    for (name, omega) in [("auction_k3_spa", 0.0), ("auction_k3_mixed", 0.5), ("auction_k3_fpa", 1.0)] {
        out.push(StabilityConfig::new(name, make_mixed_auction(3, 1.0, omega).expect("valid auction"), 0.0, 1.0 / 6.0));
    }
    out
}

/// Grid coordinates of `s^N`: `Q(a) = u(a, a_1) + δ·u(a_1, a_1)/(1−δ)` for both agents.
pub fn build_sn(game: &GameSpec, delta: f64, grid: &GridSpec) -> Result<[Vec<usize>; 2], StabilityError> {
    let a1 = game.nash_action();
    let tail = delta * game.payoff(a1, a1) / (1.0 - delta);
    let row = (0..game.k())
        .map(|a| {
            let v = game.payoff(a, a1) + tail;
            grid.index_of(v).ok_or_else(|| StabilityError::Grid(format!("s^N value {v} is off the grid")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok([row.clone(), row])
}

/// Both agents share a strict argmax `a` with `Q(a) = u(a,a)/(1−δ)`.
pub fn check_absorbing_characterization(q: &[Vec<usize>; 2], game: &GameSpec, delta: f64, grid: &GridSpec) -> bool {
    let strict_argmax = |row: &Vec<usize>| {
        let m = *row.iter().max()?;
        let mut it = row.iter().enumerate().filter(|(_, &v)| v == m);
        let first = it.next()?.0;
        it.next().is_none().then_some(first)
    };
    match (strict_argmax(&q[0]), strict_argmax(&q[1])) {
        (Some(a), Some(b)) if a == b => match grid.index_of(game.payoff(a, a) / (1.0 - delta)) {
            Some(target) => q[0][a] == target && q[1][a] == target,
            None => false,
        },
        _ => false,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AbsorbingState {
    pub id: u32,
    /// common greedy action, 1-based rank (`1` is `a_1`)
    pub action_rank: usize,
    pub q: [Vec<f64>; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderChecks {
    pub irreflexive: bool,
    pub transitive: bool,
    /// `s^N ≺ s` for every other absorbing state
    pub sn_lowest: bool,
    /// every other absorbing state has a cost-1 move to a lower state
    pub descent_ok: bool,
    pub g_choices_tried: usize,
    pub g_choices_passing: usize,
    /// a passing map as 1-based ranks, if any
    pub g_used: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub name: Option<String>,
    pub k: usize,
    pub delta: f64,
    pub alpha: f64,
    pub grid: GridSpec,
    pub points_per_axis: usize,
    pub state_count: usize,
    pub recurrent_class_sizes: Vec<usize>,
    pub all_singletons: bool,
    pub absorbing_characterization_ok: bool,
    pub absorbing: Vec<AbsorbingState>,
    pub s_n: u32,
    pub s_n_absorbing: bool,
    /// `C(s,s) = 0`, `C(s,s') ≥ 1` for distinct states, triangle inequality
    pub cost_sanity_ok: bool,
    /// leaving `s^N` costs at least 2, and every single deviation from it
    /// drifts back to `s^N`
    pub nash_escape_ok: bool,
    /// root → cost of the cheapest tree (`null` if some state cannot reach it)
    pub arborescence_costs: BTreeMap<u32, Option<u64>>,
    pub stable_set: Vec<u32>,
    /// `cost(s^N) + 1 ≤ cost(s)` for every other root
    pub sn_margin_ok: bool,
    pub order: OrderChecks,
    pub pass: bool,
    #[serde(skip)]
    pub cost_matrix: Vec<Vec<u32>>,
}

/// Runs every check on one instance.
pub fn verify(cfg: &StabilityConfig) -> Result<StabilityReport, StabilityError> {
    let game = &cfg.game;
    let k = game.k();
    let grid = GridSpec::for_game(game, cfg.delta, cfg.eta, cfg.q_upper)?;
    let sn_q = build_sn(game, cfg.delta, &grid)?;
    let space = StateSpace::build(game, &grid, cfg.alpha, cfg.delta, cfg.max_states)?;
    let s_n = space.encode(&sn_q);

    let classes = closed_classes(space.count, |s| space.successors(s));
    let all_singletons = classes.iter().all(|c| c.len() == 1);
    let absorbing: Vec<u32> = classes.iter().filter(|c| c.len() == 1).map(|c| c[0]).collect();

    let characterized: Vec<u32> = (0..space.count as u32)
        .into_par_iter()
        .filter(|&s| check_absorbing_characterization(&space.decode(s), game, cfg.delta, &grid))
        .collect();
    let absorbing_characterization_ok = all_singletons && characterized == absorbing;
    let sn_pos = absorbing.iter().position(|&s| s == s_n);
    let s_n_absorbing = sn_pos.is_some();

    let cost = cost_matrix(&space, &absorbing);
    let n = absorbing.len();
    let cost_sanity_ok = (0..n).into_par_iter().all(|i| {
        (0..n).all(|j| {
            let c = cost[i][j];
            let basic = if i == j { c == 0 } else { c >= 1 };
            basic
                && (0..n).all(|m| {
                    let (a, b) = (cost[i][m], cost[m][j]);
                    a == INF || b == INF || c as u64 <= a as u64 + b as u64
                })
        })
    });

    let nash_escape_ok = match sn_pos {
        None => false,
        Some(p) => {
            let far = (0..n).all(|j| j == p || cost[p][j] >= 2);
            let masks = space.masks[s_n as usize];
            let returns = (0..k * k).all(|prof| {
                let (a0, a1) = (prof / k, prof % k);
                let dev0 = (masks[0] >> a0) & 1 == 0;
                let dev1 = (masks[1] >> a1) & 1 == 0;
                if dev0 == dev1 {
                    return true;
                }
                let start = space.image(s_n, a0, a1);
                unperturbed_closure(&space, start).into_iter().all(|s| s == s_n || absorbing.binary_search(&s).is_err())
            });
            far && returns
        }
    };

    let roots: Vec<Option<u64>> = (0..n).into_par_iter().map(|r| min_arborescence(&cost, r)).collect();
    let arborescence_costs: BTreeMap<u32, Option<u64>> = absorbing.iter().copied().zip(roots.iter().copied()).collect();
    let best = roots.iter().flatten().copied().min();
    let stable_set: Vec<u32> = match best {
        Some(b) => absorbing.iter().zip(&roots).filter(|(_, c)| **c == Some(b)).map(|(s, _)| *s).collect(),
        None => Vec::new(),
    };
    let sn_margin_ok = match sn_pos.and_then(|p| roots[p]) {
        Some(c) => roots.iter().enumerate().all(|(j, r)| Some(j) == sn_pos || r.is_none_or(|r| r > c)),
        None => false,
    };

    let views: Vec<AbsorbingView> =
        absorbing.iter().map(|&s| AbsorbingView::new(game, &space.decode(s), &sn_q)).collect();
    let order = check_order(&views, &cost, sn_pos, game);

    let absorbing_states = absorbing
        .iter()
        .zip(&views)
        .map(|(&id, v)| {
            let q = space.decode(id);
            AbsorbingState {
                id,
                action_rank: v.action + 1,
                q: [q[0].iter().map(|&i| grid.value(i)).collect(), q[1].iter().map(|&i| grid.value(i)).collect()],
            }
        })
        .collect();

    let pass = all_singletons
        && absorbing_characterization_ok
        && s_n_absorbing
        && cost_sanity_ok
        && nash_escape_ok
        && stable_set == vec![s_n]
        && sn_margin_ok
        && order.irreflexive
        && order.transitive
        && order.sn_lowest
        && order.descent_ok;

    Ok(StabilityReport {
        name: cfg.name.clone(),
        k,
        delta: cfg.delta,
        alpha: cfg.alpha,
        grid,
        points_per_axis: space.points,
        state_count: space.count,
        recurrent_class_sizes: classes.iter().map(Vec::len).collect(),
        all_singletons,
        absorbing_characterization_ok,
        absorbing: absorbing_states,
        s_n,
        s_n_absorbing,
        cost_sanity_ok,
        nash_escape_ok,
        arborescence_costs,
        stable_set,
        sn_margin_ok,
        order,
        pass,
        cost_matrix: cost,
    })
}

const G_LIMIT: usize = 4096;

fn check_order(views: &[AbsorbingView], cost: &[Vec<u32>], sn_pos: Option<usize>, game: &GameSpec) -> OrderChecks {
    let maps = enumerate_g(&g_candidates(game), G_LIMIT);
    let n = views.len();
    let mut irreflexive = true;
    let mut transitive = true;
    let mut sn_lowest = true;
    let mut passing = 0;
    let mut g_used = None;
    for g in &maps {
        let rel = Relation::build(views, g);
        irreflexive &= rel.irreflexive();
        transitive &= rel.transitive();
        if let Some(p) = sn_pos {
            sn_lowest &= (0..n).all(|j| j == p || rel.get(p, j));
        }
        let descends =
            (0..n).into_par_iter().all(|i| Some(i) == sn_pos || (0..n).any(|j| cost[i][j] == 1 && rel.get(j, i)));
        if descends {
            passing += 1;
            if g_used.is_none() {
                g_used = Some(g.iter().map(|r| r + 1).collect());
            }
        }
    }
    OrderChecks {
        irreflexive,
        transitive,
        sn_lowest: sn_lowest && sn_pos.is_some(),
        descent_ok: passing > 0,
        g_choices_tried: maps.len(),
        g_choices_passing: passing,
        g_used,
    }
}

/// DOT dump of the absorbing-state cost digraph (finite edges only).
pub fn write_cost_dot<W: std::io::Write>(report: &StabilityReport, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "digraph costs {{")?;
    for (i, s) in report.absorbing.iter().enumerate() {
        let shape = if s.id == report.s_n { ", shape=doublecircle" } else { "" };
        writeln!(out, "  n{i} [label=\"{} a{}\"{shape}];", s.id, s.action_rank)?;
    }
    for (i, row) in report.cost_matrix.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if i != j && c != INF {
                writeln!(out, "  n{i} -> n{j} [label={c}];")?;
            }
        }
    }
    writeln!(out, "}}")
}
