//! Collusion diagnostics over session results and Q-tables.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::agents::QState;
use crate::engine::{SessionResult, Trace};
use crate::games::{benchmark_profits, GameLabel, GameSpec};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no converged sessions")]
    NoConverged,
    #[error("degenerate benchmarks: r_M = {r_m} is not above r_N = {r_n}")]
    DegenerateBenchmarks { r_n: f64, r_m: f64 },
    #[error("no qualifying periods in the window")]
    EmptyWindow,
    #[error("occupancy has {got} cells, expected {expected}")]
    Shape { expected: usize, got: usize },
}

/// Mean price of an action pair.
pub fn pair_price(game: &GameSpec, pair: (usize, usize)) -> f64 {
    0.5 * (game.grid().value(pair.0) + game.grid().value(pair.1))
}

/// Price a session settled on: the convergent pair's mean price, a cycle's
/// time-average price, or the constant-mode window price.
pub fn session_price(result: &SessionResult, game: &GameSpec) -> Option<f64> {
    if let Some(pair) = result.convergent_actions {
        return Some(pair_price(game, pair));
    }
    if let Some(cycle) = &result.cycle {
        let n = cycle.pairs.len() as f64;
        return Some(cycle.pairs.iter().map(|&p| pair_price(game, p)).sum::<f64>() / n);
    }
    result.window_weighted_price
}

/// Per-period total profit of a session's outcome, or `None` for constant runs.
pub fn session_profit(result: &SessionResult, game: &GameSpec) -> Option<f64> {
    let total = |(a, b): (usize, usize)| game.payoff(a, b) + game.payoff(b, a);
    if let Some(pair) = result.convergent_actions {
        return Some(total(pair));
    }
    result.cycle.as_ref().map(|c| c.pairs.iter().map(|&p| total(p)).sum::<f64>() / c.pairs.len() as f64)
}

/// Mean over converged sessions of [`session_price`].
pub fn avg_convergent_price(results: &[SessionResult], game: &GameSpec) -> Result<f64, MetricsError> {
    let prices: Vec<f64> = results.iter().filter(|r| r.converged).filter_map(|r| session_price(r, game)).collect();
    if prices.is_empty() {
        return Err(MetricsError::NoConverged);
    }
    Ok(prices.iter().sum::<f64>() / prices.len() as f64)
}

/// `(r̄ − r_N)/(r_M − r_N)` for a mean total profit `r̄`.
pub fn collusion_index_from_profit(mean_profit: f64, game: &GameSpec) -> Result<f64, MetricsError> {
    let (r_n, r_m) = benchmark_profits(game);
    if !(r_m > r_n) {
        return Err(MetricsError::DegenerateBenchmarks { r_n, r_m });
    }
    Ok((mean_profit - r_n) / (r_m - r_n))
}

/// Collusion index of a mean symmetric price. In the Bertrand game a
/// symmetric profile at price `p` earns total profit `p − c`; other games
/// use the symmetric profit at the nearest grid action.
pub fn collusion_index(mean_price: f64, game: &GameSpec) -> Result<f64, MetricsError> {
    let profit = match game.label() {
        GameLabel::Bertrand => mean_price - game.marginal_cost().unwrap_or(0.0),
        _ => {
            let a = game
                .grid()
                .values()
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - mean_price).abs().total_cmp(&(y.1 - mean_price).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            2.0 * game.payoff(a, a)
        }
    };
    collusion_index_from_profit(profit, game)
}

/// `(1 − δ)·Q⁽²⁾` of a memoryless table.
pub fn sustainable_price(q: &QState, delta: f64) -> f64 {
    sustainable_price_at(q, 0, delta)
}

/// Sustainable price read from observation row `obs` (memory agents).
pub fn sustainable_price_at(q: &QState, obs: usize, delta: f64) -> f64 {
    (1.0 - delta) * q.second_highest(obs)
}

/// `2(1 − δ)·max(Q⁽²⁾_i, Q⁽²⁾_j)` for memoryless tables.
pub fn stationary_price(q_i: &QState, q_j: &QState, delta: f64) -> f64 {
    2.0 * (1.0 - delta) * q_i.second_highest(0).max(q_j.second_highest(0))
}

/// Window price from per-profile visit counts (`occupancy[a0 * K + a1]`).
/// With `symmetric_only`, only `(p, p)` profiles count; otherwise every
/// profile contributes its mean price.
pub fn windowed_weighted_price(occupancy: &[u64], game: &GameSpec, symmetric_only: bool) -> Result<f64, MetricsError> {
    let k = game.k();
    if occupancy.len() != k * k {
        return Err(MetricsError::Shape { expected: k * k, got: occupancy.len() });
    }
    let mut weight = 0u64;
    let mut sum = 0.0;
    for a0 in 0..k {
        for a1 in 0..k {
            if symmetric_only && a0 != a1 {
                continue;
            }
            let n = occupancy[a0 * k + a1];
            weight += n;
            sum += n as f64 * pair_price(game, (a0, a1));
        }
    }
    if weight == 0 {
        return Err(MetricsError::EmptyWindow);
    }
    Ok(sum / weight as f64)
}

/// Sampled periods at which both agents' greedy actions moved strictly away
/// from the Nash action since the previous sample.
pub fn rebound_events(trace: &Trace, game: &GameSpec) -> Vec<u64> {
    trace
        .rows
        .windows(2)
        .filter(|w| {
            let up = |old: usize, new: usize| game.rank_of(new) > game.rank_of(old);
            up(w[0].argmax.0, w[1].argmax.0) && up(w[0].argmax.1, w[1].argmax.1)
        })
        .map(|w| w[1].t)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub sessions: usize,
    pub mean_price: Option<f64>,
    /// standard error of the mean price
    pub std_error: Option<f64>,
    pub collusion_index: Option<f64>,
    pub per_session_prices: Vec<Option<f64>>,
    pub share_converged: f64,
    pub cycle_length_histogram: BTreeMap<usize, usize>,
}

/// Folds a batch into summary statistics. Decay runs average converged
/// sessions; constant runs average window prices. The collusion index uses
/// mean total profit outside the Bertrand game.
pub fn aggregate(results: &[SessionResult], game: &GameSpec) -> AggregateReport {
    let per_session: Vec<Option<f64>> = results
        .iter()
        .map(|r| if r.converged || r.window_weighted_price.is_some() { session_price(r, game) } else { None })
        .collect();
    let prices: Vec<f64> = per_session.iter().flatten().copied().collect();
    let n = prices.len() as f64;
    let mean_price = (!prices.is_empty()).then(|| prices.iter().sum::<f64>() / n);
    let std_error = mean_price.filter(|_| prices.len() > 1).map(|m| {
        let var = prices.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    let collusion_index = match game.label() {
        GameLabel::Bertrand => mean_price.and_then(|p| collusion_index(p, game).ok()),
        _ => {
            let profits: Vec<f64> =
                results.iter().filter(|r| r.converged).filter_map(|r| session_profit(r, game)).collect();
            if profits.is_empty() {
                mean_price.and_then(|p| collusion_index(p, game).ok())
            } else {
                collusion_index_from_profit(profits.iter().sum::<f64>() / profits.len() as f64, game).ok()
            }
        }
    };
    let mut histogram = BTreeMap::new();
    for r in results.iter().filter(|r| r.converged) {
        if let Some(len) = r.cycle_length() {
            *histogram.entry(len).or_insert(0) += 1;
        }
    }
    let converged = results.iter().filter(|r| r.converged).count();
    AggregateReport {
        sessions: results.len(),
        mean_price,
        std_error,
        collusion_index,
        per_session_prices: per_session,
        share_converged: if results.is_empty() { 0.0 } else { converged as f64 / results.len() as f64 },
        cycle_length_histogram: histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Mode;
    use crate::games::make_bertrand;

    fn baseline() -> GameSpec {
        make_bertrand(10, 0.1, 1.0, 0.0).unwrap()
    }

    fn converged_at(a: usize) -> SessionResult {
        SessionResult {
            session: 0,
            seed: 0,
            converged: true,
            convergent_actions: Some((a, a)),
            cycle: None,
            periods_elapsed: 1,
            window_weighted_price: None,
            window_occupancy: None,
            final_profile: (a, a),
            final_q: Vec::new(),
            trace: None,
        }
    }

    #[test]
    fn average_price() {
        let g = baseline();
        assert!((avg_convergent_price(&[converged_at(0), converged_at(0)], &g).unwrap() - 0.1).abs() < 1e-12);
        assert!((avg_convergent_price(&[converged_at(0), converged_at(8)], &g).unwrap() - 0.5).abs() < 1e-12);
        let mut r = converged_at(3);
        r.converged = false;
        r.convergent_actions = None;
        assert_eq!(avg_convergent_price(&[r], &g), Err(MetricsError::NoConverged));
    }

    #[test]
    fn collusion_index_examples() {
        let g = baseline();
        assert!(collusion_index(0.1, &g).unwrap().abs() < 1e-12);
        assert!((collusion_index(1.0, &g).unwrap() - 1.0).abs() < 1e-12);
        assert!((collusion_index(0.55, &g).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sustainable_and_stationary() {
        let mut q = QState::filled(10, Mode::Memoryless, 0.0);
        q.set(0, 0, 7.0);
        q.set(0, 1, 6.5);
        assert!((sustainable_price(&q, 0.95) - 0.325).abs() < 1e-12);
        assert!(sustainable_price(&q, 1.0).abs() < 1e-12);
        let q3 = QState::from_values(3, Mode::Memoryless, vec![3.0, 5.0, 4.0]).unwrap();
        assert!((sustainable_price(&q3, 0.5) - 2.0).abs() < 1e-12);

        let a = QState::from_values(3, Mode::Memoryless, vec![9.0, 5.0, 1.0]).unwrap();
        let b = QState::from_values(3, Mode::Memoryless, vec![6.0, 9.0, 1.0]).unwrap();
        assert!((stationary_price(&a, &b, 0.95) - 0.6).abs() < 1e-12);
        let z = QState::filled(3, Mode::Memoryless, 0.0);
        assert_eq!(stationary_price(&z, &z, 0.95), 0.0);
    }

    #[test]
    fn window_prices() {
        let g = baseline();
        let mut occ = vec![0u64; 100];
        occ[0] = 10;
        assert!((windowed_weighted_price(&occ, &g, true).unwrap() - 0.1).abs() < 1e-12);
        occ[4 * 10 + 4] = 10;
        assert!((windowed_weighted_price(&occ, &g, true).unwrap() - 0.3).abs() < 1e-12);
        let mut occ = vec![0u64; 100];
        occ[1] = 99;
        occ[3 * 10 + 3] = 1;
        assert!((windowed_weighted_price(&occ, &g, true).unwrap() - 0.4).abs() < 1e-12);
        let inclusive = windowed_weighted_price(&occ, &g, false).unwrap();
        assert!((inclusive - (99.0 * 0.15 + 0.4) / 100.0).abs() < 1e-12);
        assert_eq!(windowed_weighted_price(&[0; 100], &g, true), Err(MetricsError::EmptyWindow));
    }

    #[test]
    fn histogram_counts_lengths() {
        let g = baseline();
        let rep = aggregate(&[converged_at(0), converged_at(2)], &g);
        assert_eq!(rep.cycle_length_histogram.get(&1), Some(&2));
        assert_eq!(rep.share_converged, 1.0);
        assert!((rep.mean_price.unwrap() - 0.2).abs() < 1e-12);
    }
}
