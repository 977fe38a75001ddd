//! Valid unilateral perturbations in `ω·FPA + (1−ω)·SPA`.

use serde::Serialize;

use super::StabilityError;
use crate::games::make_mixed_auction;

/// Bids `ã` with `b < ã ≤ upper`, and their grid indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationInterval {
    pub lower_exclusive: f64,
    /// `+∞` in the second-price case
    pub upper_inclusive: f64,
    pub grid_indices: Vec<usize>,
}

/// Valid perturbations from a symmetric bid profile at grid index `b`
/// (bid `b·v/K`): the bids `ã > b` with `u(ã, b) ≥ u(b, b)`. Winning at `ã`
/// pays `ω·ã + (1−ω)·b`, so the condition reads `ω·ã ≤ (v + (2ω − 1)·b)/2`.
pub fn valid_perturbations_auction(
    k: usize,
    v: f64,
    omega: f64,
    b: usize,
) -> Result<PerturbationInterval, StabilityError> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(StabilityError::Params(format!("ω must lie in [0, 1], got {omega}")));
    }
    if k < 2 || !(v > 0.0) {
        return Err(StabilityError::Params("auction needs K ≥ 2 and v > 0".into()));
    }
    if b + 1 >= k {
        return Err(StabilityError::Params(format!("bid index {b} is not below the Nash bid index {}", k - 1)));
    }
    let step = v / k as f64;
    let bid = b as f64 * step;
    let upper = if omega == 0.0 { f64::INFINITY } else { (v + (2.0 * omega - 1.0) * bid) / (2.0 * omega) };
    let tol = 1e-12 * v.max(1.0);
    let grid_indices = (b + 1..k).filter(|&i| i as f64 * step <= upper + tol).collect();
    Ok(PerturbationInterval { lower_exclusive: bid, upper_inclusive: upper, grid_indices })
}

/// Grid scan of the payoff criterion `u(ã, b) ≥ u(b, b)` over bids above `b`.
pub fn scan_valid_perturbations(k: usize, v: f64, omega: f64, b: usize) -> Result<Vec<usize>, StabilityError> {
    let game = make_mixed_auction(k, v, omega).map_err(|e| StabilityError::Params(e.to_string()))?;
    let base = game.payoff(b, b);
    Ok((b + 1..k).filter(|&a| game.payoff(a, b) >= base - 1e-12).collect())
}

/// The published two-case threshold `((K−1)v + (K+1)b) / (2[Kv + (K+1)b])`;
/// `0.45` for `K = 10`, `b = 0`.
pub fn published_threshold(k: usize, v: f64, bid: f64) -> f64 {
    let k = k as f64;
    ((k - 1.0) * v + (k + 1.0) * bid) / (2.0 * (k * v + (k + 1.0) * bid))
}

/// Largest `ω` at which every grid bid above `bid` is still valid, i.e. the
/// perturbation set coincides with the second-price one:
/// `(v − b) / (2(ā − b))` with `ā = (K−1)v/K`.
pub fn spa_equivalence_threshold(k: usize, v: f64, bid: f64) -> f64 {
    let top = (k as f64 - 1.0) * v / k as f64;
    (v - bid) / (2.0 * (top - bid))
}
