//! Grid-snapped state space: packed state ids, the snap-with-progress
//! update and the precomputed table of one-period images.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StabilityError;
use crate::games::GameSpec;

const ALIGN_TOL: f64 = 1e-7;

/// Uniform Q-value grid `q_lower + i·η`, `i = 0..points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub eta: f64,
    pub q_lower: f64,
    pub q_upper: f64,
}

impl GridSpec {
    /// Grid from `u̲/(1−δ)` to `q_upper` (default `max u/(1−δ)`), checking that
    /// every `u(a,a')/(1−δ)` is a grid point.
    pub fn for_game(game: &GameSpec, delta: f64, eta: f64, q_upper: Option<f64>) -> Result<Self, StabilityError> {
        if !(0.0..1.0).contains(&delta) {
            return Err(StabilityError::Params(format!("discount factor must lie in [0, 1), got {delta}")));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(StabilityError::Params(format!("grid spacing must be positive, got {eta}")));
        }
        let scaled: Vec<f64> = game.payoff_table().iter().map(|u| u / (1.0 - delta)).collect();
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let upper = q_upper.unwrap_or(hi);
        if upper < hi - ALIGN_TOL * eta {
            return Err(StabilityError::Grid(format!("q_upper {upper} is below max u/(1-δ) = {hi}")));
        }
        let grid = GridSpec { eta, q_lower: lo, q_upper: upper };
        if grid.index_of(upper).is_none() {
            return Err(StabilityError::Grid(format!("q_upper {upper} is not a multiple of η above {lo}")));
        }
        for v in scaled {
            if grid.index_of(v).is_none() {
                return Err(StabilityError::Grid(format!("payoff value {v} = u/(1-δ) is off the η = {eta} grid")));
            }
        }
        Ok(grid)
    }

    pub fn points(&self) -> usize {
        ((self.q_upper - self.q_lower) / self.eta).round() as usize + 1
    }

    pub fn value(&self, index: usize) -> f64 {
        self.q_lower + index as f64 * self.eta
    }

    /// Grid index of `value`, if it lies on the grid.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        let x = (value - self.q_lower) / self.eta;
        let r = x.round();
        if (x - r).abs() <= ALIGN_TOL && r >= 0.0 && self.q_lower + r * self.eta <= self.q_upper + ALIGN_TOL * self.eta
        {
            Some(r as usize)
        } else {
            None
        }
    }

    /// Position of `value` in grid units (not necessarily integral).
    pub fn coordinate(&self, value: f64) -> f64 {
        (value - self.q_lower) / self.eta
    }
}

/// Snaps an exact update in grid coordinates. `old` is on the grid, `target`
/// is the update target `V`, and `exact = (1−α)·old + α·V`. Rounds to the
/// nearest grid point (ties toward `V`), never past `V`; if that leaves the
/// value unchanged while `old ≠ V`, moves one step toward `V`.
pub fn snap_toward(old: usize, target: f64, exact: f64, points: usize) -> usize {
    const TOL: f64 = 1e-9;
    let o = old as f64;
    if (target - o).abs() <= TOL {
        return old;
    }
    let up = target > o;
    let fl = (exact + TOL).floor();
    let frac = exact - fl;
    let mut r = if (frac - 0.5).abs() <= TOL {
        if up {
            fl + 1.0
        } else {
            fl
        }
    } else {
        exact.round()
    };
    if up && r > target + TOL {
        r = (target + TOL).floor();
    }
    if !up && r < target - TOL {
        r = (target - TOL).ceil();
    }
    let mut idx = r.max(0.0) as usize;
    if idx == old {
        idx = if up { old + 1 } else { old - 1 };
    }
    idx.min(points - 1)
}

/// The enumerated state space with every state's `K²` one-period images.
pub struct StateSpace {
    pub k: usize,
    pub points: usize,
    pub count: usize,
    /// `images[s * K² + a0 * K + a1]`: state after profile `(a0, a1)`
    pub images: Vec<u32>,
    /// per state, the argmax masks of both agents
    pub masks: Vec<[u8; 2]>,
    pow: Vec<u64>,
}

impl StateSpace {
    /// Enumerates `points^(2K)` states and their images under the snapped
    /// standard update with learning rate `alpha`.
    pub fn build(
        game: &GameSpec,
        grid: &GridSpec,
        alpha: f64,
        delta: f64,
        max_states: usize,
    ) -> Result<Self, StabilityError> {
        let k = game.k();
        if k > 8 {
            return Err(StabilityError::Params("stability verification supports at most 8 actions".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(StabilityError::Params(format!("learning rate must lie in (0, 1], got {alpha}")));
        }
        let points = grid.points();
        if points > 255 {
            return Err(StabilityError::Budget { states: u128::MAX, budget: max_states });
        }
        let count = (points as u128).pow(2 * k as u32);
        if count > max_states as u128 || count > u32::MAX as u128 {
            return Err(StabilityError::Budget { states: count, budget: max_states });
        }
        let count = count as usize;
        let pow: Vec<u64> = (0..2 * k as u32).map(|d| (points as u64).pow(d)).collect();

        // snap[(pay * points + max) * points + old]
        let k2 = k * k;
        let mut snap = vec![0u8; k2 * points * points];
        for a in 0..k {
            for b in 0..k {
                let pay = a * k + b;
                let u = game.payoff(a, b);
                for m in 0..points {
                    let target = grid.coordinate(u + delta * grid.value(m));
                    for old in 0..points {
                        let exact = (1.0 - alpha) * old as f64 + alpha * target;
                        snap[(pay * points + m) * points + old] = snap_toward(old, target, exact, points) as u8;
                    }
                }
            }
        }

        let mut images = vec![0u32; count * k2];
        let mut masks = vec![[0u8; 2]; count];
        images.par_chunks_mut(k2).zip(masks.par_iter_mut()).enumerate().for_each(|(s, (img, mask))| {
            let mut digits = [0u8; 16];
            let mut rest = s;
            for d in digits.iter_mut().take(2 * k) {
                *d = (rest % points) as u8;
                rest /= points;
            }
            let mut maxes = [0u8; 2];
            for i in 0..2 {
                let row = &digits[i * k..(i + 1) * k];
                let m = *row.iter().max().unwrap();
                maxes[i] = m;
                mask[i] = row.iter().enumerate().filter(|(_, &v)| v == m).fold(0u8, |acc, (a, _)| acc | (1 << a));
            }
            for a0 in 0..k {
                for a1 in 0..k {
                    let o0 = digits[a0] as usize;
                    let o1 = digits[k + a1] as usize;
                    let n0 = snap[((a0 * k + a1) * points + maxes[0] as usize) * points + o0] as i64;
                    let n1 = snap[((a1 * k + a0) * points + maxes[1] as usize) * points + o1] as i64;
                    let id = s as i64 + (n0 - o0 as i64) * pow[a0] as i64 + (n1 - o1 as i64) * pow[k + a1] as i64;
                    img[a0 * k + a1] = id as u32;
                }
            }
        });
        Ok(Self { k, points, count, images, masks, pow })
    }

    #[inline]
    pub fn image(&self, s: u32, a0: usize, a1: usize) -> u32 {
        self.images[s as usize * self.k * self.k + a0 * self.k + a1]
    }

    /// Number of agents playing outside their argmax set under `(a0, a1)`.
    #[inline]
    pub fn profile_cost(&self, s: u32, a0: usize, a1: usize) -> u8 {
        let m = self.masks[s as usize];
        ((m[0] >> a0) & 1 == 0) as u8 + ((m[1] >> a1) & 1 == 0) as u8
    }

    /// Unperturbed successors: one per profile in `argmax₁ × argmax₂`
    /// (duplicates possible).
    pub fn successors(&self, s: u32) -> impl Iterator<Item = u32> + '_ {
        let m = self.masks[s as usize];
        let k = self.k;
        (0..k * k).filter_map(move |p| {
            let (a0, a1) = (p / k, p % k);
            ((m[0] >> a0) & 1 == 1 && (m[1] >> a1) & 1 == 1).then(|| self.images[s as usize * k * k + p])
        })
    }

    /// Grid coordinates of both agents' Q-vectors.
    pub fn decode(&self, s: u32) -> [Vec<usize>; 2] {
        let mut rest = s as usize;
        let mut digits = Vec::with_capacity(2 * self.k);
        for _ in 0..2 * self.k {
            digits.push(rest % self.points);
            rest /= self.points;
        }
        let q1 = digits.split_off(self.k);
        [digits, q1]
    }

    pub fn encode(&self, q: &[Vec<usize>; 2]) -> u32 {
        let mut id = 0u64;
        for (i, row) in q.iter().enumerate() {
            for (a, &d) in row.iter().enumerate() {
                id += d as u64 * self.pow[i * self.k + a];
            }
        }
        id as u32
    }
}
