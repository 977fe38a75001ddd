//! The strict partial order on absorbing states used to certify that the
//! Nash state has the cheapest rooted tree.

use std::cmp::Ordering;

use serde::Serialize;

use crate::games::GameSpec;

/// What the order needs to know about one absorbing state. All Q-values are
/// in grid units and indexed by rank (position 0 is `a_1`).
#[derive(Debug, Clone)]
pub struct AbsorbingView {
    /// rank of the common greedy action `a(s)`
    pub action: usize,
    /// Q-vectors by rank, per agent
    pub q: [Vec<usize>; 2],
    /// the agent with the lexicographically lower Q-vector (`i̲`); agent 0
    /// when the vectors coincide
    pub low: usize,
    /// `D(s)` in grid units
    pub distance: u64,
}

impl AbsorbingView {
    /// `q_by_grid` holds both agents' grid-indexed Q-vectors; `sn` the same for `s^N`.
    pub fn new(game: &GameSpec, q_by_grid: &[Vec<usize>; 2], sn: &[Vec<usize>; 2]) -> Self {
        let k = game.k();
        let by_rank = |row: &Vec<usize>| (0..k).map(|r| row[game.at_rank(r)]).collect::<Vec<_>>();
        let q = [by_rank(&q_by_grid[0]), by_rank(&q_by_grid[1])];
        let low = if q[1] < q[0] { 1 } else { 0 };
        let argmax = (0..k).max_by_key(|&r| (q[0][r], std::cmp::Reverse(r))).unwrap_or(0);
        let distance = (0..2)
            .flat_map(|i| (0..k).map(move |a| (i, a)))
            .map(|(i, a)| q_by_grid[i][a].abs_diff(sn[i][a]) as u64)
            .sum();
        Self { action: argmax, q, low, distance }
    }

    fn high(&self) -> usize {
        1 - self.low
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderRelation {
    Less,
    Greater,
    Incomparable,
}

/// Whether `s ≺_g s'` per the three conditions. `g` maps ranks to ranks.
pub fn precedes(s: &AbsorbingView, t: &AbsorbingView, g: &[usize]) -> bool {
    let m = s.action.min(t.action);
    let x = &s.q[s.low];
    let y = &t.q[t.low];
    // condition 1 on the lowest differing rank below min(a(s), a(s'))
    if let Some(j) = (0..m).find(|&j| x[j] != y[j]) {
        return x[j] < y[j];
    }
    // condition 1 fails in both directions from here
    match s.action.cmp(&t.action) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal if s.action != 0 => {
            let ga = g[s.action];
            s.q[s.high()][ga] > t.q[t.high()][ga]
        }
        Ordering::Equal => s.distance < t.distance,
    }
}

pub fn order_compare(s: &AbsorbingView, t: &AbsorbingView, g: &[usize]) -> OrderRelation {
    match (precedes(s, t, g), precedes(t, s, g)) {
        (true, false) => OrderRelation::Less,
        (false, true) => OrderRelation::Greater,
        (false, false) => OrderRelation::Incomparable,
        // an asymmetry failure; reported by the transitivity check
        (true, true) => OrderRelation::Incomparable,
    }
}

/// Bitset relation matrix `less[i]` with bit `j` set iff `views[i] ≺ views[j]`.
pub struct Relation {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Relation {
    pub fn build(views: &[AbsorbingView], g: &[usize]) -> Self {
        use rayon::prelude::*;
        let n = views.len();
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        bits.par_chunks_mut(words.max(1)).enumerate().for_each(|(i, row)| {
            if i >= n {
                return;
            }
            for j in 0..n {
                if precedes(&views[i], &views[j], g) {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
        });
        Self { n, words, bits }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn irreflexive(&self) -> bool {
        (0..self.n).all(|i| !self.get(i, i))
    }

    /// Checks `i ≺ j ≺ l ⇒ i ≺ l` over all triples via row inclusion.
    pub fn transitive(&self) -> bool {
        use rayon::prelude::*;
        (0..self.n).into_par_iter().all(|i| {
            let ri = self.row(i);
            (0..self.n).filter(|&j| self.get(i, j)).all(|j| self.row(j).iter().zip(ri).all(|(rj, ri)| rj & !ri == 0))
        })
    }
}

/// Per rank `r ≥ 1`, the ranks `r' < r` with `u(a_{r'}, a_r) ≥ u(a_r, a_r)`;
/// all other ranks when that set is empty. Rank 0 maps to itself.
pub fn g_candidates(game: &GameSpec) -> Vec<Vec<usize>> {
    let k = game.k();
    (0..k)
        .map(|r| {
            if r == 0 {
                return vec![0];
            }
            let a = game.at_rank(r);
            let valid: Vec<usize> =
                (0..r).filter(|&r2| game.payoff(game.at_rank(r2), a) >= game.payoff(a, a)).collect();
            if valid.is_empty() {
                (0..k).filter(|&r2| r2 != r).collect()
            } else {
                valid
            }
        })
        .collect()
}

/// All maps `g` in the product of the candidate sets, up to `limit`.
pub fn enumerate_g(candidates: &[Vec<usize>], limit: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for choices in candidates {
        let mut next = Vec::new();
        for prefix in &out {
            for &c in choices {
                if next.len() >= limit {
                    break;
                }
                let mut p = prefix.clone();
                p.push(c);
                next.push(p);
            }
        }
        out = next;
    }
    out
}
