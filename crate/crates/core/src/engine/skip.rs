//! Closed-form composition of repeated identical Q-updates.

use crate::agents::{QState, UpdateRuleSpec};
use crate::games::GameSpec;

/// Q-value after `tau` updates of a cell that is its agent's own maximum and
/// keeps earning `payoff`:
/// `r^τ Q + (1 − r^τ)·payoff/(1 − δ)` with `r = 1 − α(1 − δ)`.
pub fn skip_update_closed_form(q_value: f64, payoff: f64, alpha: f64, delta: f64, tau: u64) -> f64 {
    if tau == 0 {
        return q_value;
    }
    let rate = 1.0 - alpha * (1.0 - delta);
    let decay = if tau <= i32::MAX as u64 { rate.powi(tau as i32) } else { rate.powf(tau as f64) };
    let fixed = payoff / (1.0 - delta);
    decay * q_value + (1.0 - decay) * fixed
}

/// The common action `a` if both agents' memoryless tables have `a` as a
/// strict argmax and `u(a,a)/(1−δ)` exceeds both second-highest values, so
/// greedy play cannot leave `(a, a)` during a skipped interval.
pub fn skip_profile(q: &[QState; 2], game: &GameSpec, rule: &UpdateRuleSpec) -> Option<usize> {
    let m0 = q[0].argmax_mask(0);
    let m1 = q[1].argmax_mask(0);
    if m0 != m1 || m0.count_ones() != 1 {
        return None;
    }
    let a = m0.trailing_zeros() as usize;
    let fixed = game.payoff(a, a) / (1.0 - rule.delta);
    if fixed > q[0].second_highest(0) && fixed > q[1].second_highest(0) {
        Some(a)
    } else {
        None
    }
}
