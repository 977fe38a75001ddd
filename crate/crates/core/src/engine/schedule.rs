//! Exploration-event scheduling for constant-ε runs.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

/// Offsets (sorted, within `0..block`) of the periods in which one agent
/// explores during a block of `block` periods: the event count is drawn from
/// `B(block, eps)` and the positions uniformly without replacement.
pub fn schedule_explorations<R: Rng + ?Sized>(eps: f64, block: u64, rng: &mut R) -> Vec<u64> {
    assert!(eps > 0.0 && eps < 1.0, "exploration rate must lie in (0, 1)");
    if block == 0 {
        return Vec::new();
    }
    let count = Binomial::new(block, eps).expect("valid binomial").sample(rng);
    let mut offsets: Vec<u64> =
        index::sample(rng, block as usize, count as usize).into_iter().map(|i| i as u64).collect();
    offsets.sort_unstable();
    offsets
}

/// Block length `1/ε`, rounded to the nearest period.
pub fn block_length(eps: f64) -> u64 {
    (1.0 / eps).round().max(1.0) as u64
}

/// `⌈x⌉`, treating values within a relative 1e-9 of an integer as that integer
/// so that e.g. `1e4 / 1e-4` is exactly 10⁸ periods.
pub fn fuzzy_ceil(x: f64) -> u64 {
    if x <= 0.0 {
        return 0;
    }
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Lazily generated absolute exploration periods for one agent.
pub(crate) struct ExplorationClock {
    rng: ChaCha8Rng,
    eps: f64,
    block: u64,
    total: u64,
    block_start: u64,
    events: Vec<u64>,
    pos: usize,
}

impl ExplorationClock {
    pub(crate) fn new(rng: ChaCha8Rng, eps: f64, total: u64) -> Self {
        Self { rng, eps, block: block_length(eps), total, block_start: 0, events: Vec::new(), pos: 0 }
    }

    /// Next scheduled exploration period, if any remain before the horizon.
    pub(crate) fn peek(&mut self) -> Option<u64> {
        loop {
            if let Some(&e) = self.events.get(self.pos) {
                return Some(e);
            }
            if self.block_start >= self.total {
                return None;
            }
            let start = self.block_start;
            let total = self.total;
            self.events = if self.eps >= 1.0 {
                (start..(start + self.block).min(total)).collect()
            } else {
                schedule_explorations(self.eps, self.block, &mut self.rng)
                    .into_iter()
                    .map(|o| start + o)
                    .filter(|&p| p < total)
                    .collect()
            };
            self.pos = 0;
            self.block_start += self.block;
        }
    }

    pub(crate) fn advance(&mut self) {
        self.pos += 1;
    }
}
