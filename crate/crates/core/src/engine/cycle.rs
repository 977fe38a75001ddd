//! Greedy-orbit probing for one-period-memory agents.

use serde::{Deserialize, Serialize};

use crate::agents::{Mode, QState};

/// A repeating sequence of action pairs `(agent 0, agent 1)` under greedy play,
/// rotated so that the smallest joint observation comes first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub pairs: Vec<(usize, usize)>,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Greedy action per observation (lowest index among ties).
pub(crate) fn greedy_table(q: &QState) -> Vec<u16> {
    (0..q.obs_count()).map(|o| q.first_argmax(o) as u16).collect()
}

/// Terminal cycle of deterministic greedy play starting from the joint
/// observation `start = a0 * K + a1`. Memoryless agents always give a cycle of
/// length 1.
pub fn detect_cycle(q: &[QState; 2], start: usize) -> Cycle {
    let k = q[0].k();
    match q[0].mode() {
        Mode::Memoryless => Cycle { pairs: vec![(q[0].first_argmax(0), q[1].first_argmax(0))] },
        Mode::Memory => {
            let g0 = greedy_table(&q[0]);
            let g1 = greedy_table(&q[1]);
            let joint = orbit_cycle(&g0, &g1, k, start);
            Cycle { pairs: joint.iter().map(|&j| (j / k, j % k)).collect() }
        }
    }
}

/// Cycle of joint observations reached from `start` under the greedy tables,
/// canonically rotated.
pub(crate) fn orbit_cycle(g0: &[u16], g1: &[u16], k: usize, start: usize) -> Vec<usize> {
    let mut seen = vec![usize::MAX; k * k];
    let mut path = Vec::new();
    let mut j = start;
    while seen[j] == usize::MAX {
        seen[j] = path.len();
        path.push(j);
        let (a0, a1) = (j / k, j % k);
        let next0 = g0[a0 * k + a1] as usize;
        let next1 = g1[a1 * k + a0] as usize;
        j = next0 * k + next1;
    }
    let mut cycle = path.split_off(seen[j]);
    let min_pos = cycle.iter().enumerate().min_by_key(|(_, &v)| v).map(|(i, _)| i).unwrap_or(0);
    cycle.rotate_left(min_pos);
    cycle
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memoryless_point() {
        let mut a = QState::filled(3, Mode::Memoryless, 0.0);
        a.set(0, 2, 1.0);
        let mut b = QState::filled(3, Mode::Memoryless, 0.0);
        b.set(0, 1, 1.0);
        assert_eq!(detect_cycle(&[a, b], 0).pairs, vec![(2, 1)]);
    }

    #[test]
    fn constructed_two_cycle() {
        // K = 2: after (0,0) both play 1, after (1,1) both play 0
        let k = 2;
        let mut q = QState::filled(k, Mode::Memory, 0.0);
        q.set(0, 1, 1.0);
        q.set(3, 0, 1.0);
        q.set(1, 0, 1.0);
        q.set(2, 0, 1.0);
        let c = detect_cycle(&[q.clone(), q], 1);
        assert_eq!(c.len(), 2);
        assert_eq!(c.pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn memory_fixed_point() {
        let k = 3;
        let mut q = QState::filled(k, Mode::Memory, 0.0);
        for obs in 0..9 {
            q.set(obs, 1, 1.0);
        }
        let c = detect_cycle(&[q.clone(), q], 8);
        assert_eq!(c.pairs, vec![(1, 1)]);
    }
}
