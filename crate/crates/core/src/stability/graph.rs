//! Successor-graph structure: closed strongly connected components and
//! minimum mutation costs between absorbing states.

use rayon::prelude::*;

use super::space::StateSpace;

/// Strongly connected components of a digraph given by a successor
/// function (iterative Tarjan). Returns `(component id per node, count)`.
pub fn strongly_connected<F, I>(n: usize, mut succ: F) -> (Vec<u32>, usize)
where
    F: FnMut(u32) -> I,
    I: IntoIterator<Item = u32>,
{
    const UNSEEN: u32 = u32::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut next_index = 0u32;
    let mut comps = 0usize;
    // frames: (node, its successors, position)
    let mut frames: Vec<(u32, Vec<u32>, usize)> = Vec::new();

    for root in 0..n as u32 {
        if index[root as usize] != UNSEEN {
            continue;
        }
        index[root as usize] = next_index;
        low[root as usize] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        frames.push((root, succ(root).into_iter().collect(), 0));

        while let Some(frame) = frames.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if index[w as usize] == UNSEEN {
                    index[w as usize] = next_index;
                    low[w as usize] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    frames.push((w, succ(w).into_iter().collect(), 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
                continue;
            }
            frames.pop();
            if let Some(parent) = frames.last() {
                let p = parent.0 as usize;
                low[p] = low[p].min(low[v as usize]);
            }
            if low[v as usize] == index[v as usize] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w as usize] = false;
                    comp[w as usize] = comps as u32;
                    if w == v {
                        break;
                    }
                }
                comps += 1;
            }
        }
    }
    (comp, comps)
}

/// Closed components (no edge leaves them), as sorted member lists.
pub fn closed_classes<F, I>(n: usize, mut succ: F) -> Vec<Vec<u32>>
where
    F: FnMut(u32) -> I,
    I: IntoIterator<Item = u32>,
{
    let (comp, count) = strongly_connected(n, &mut succ);
    let mut closed = vec![true; count];
    for v in 0..n as u32 {
        let c = comp[v as usize];
        if succ(v).into_iter().any(|w| comp[w as usize] != c) {
            closed[c as usize] = false;
        }
    }
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); count];
    for v in 0..n as u32 {
        let c = comp[v as usize] as usize;
        if closed[c] {
            members[c].push(v);
        }
    }
    let mut classes: Vec<Vec<u32>> = members.into_iter().filter(|m| !m.is_empty()).collect();
    classes.sort();
    classes
}

/// Unreachable marker for costs.
pub const INF: u32 = u32::MAX;

/// Minimum one-step cost of moving `s → t`: 0 if some greedy profile maps
/// `s` to `t`, 1 or 2 if deviations are needed, `INF` if no profile does.
pub fn one_step_cost(space: &StateSpace, s: u32, t: u32) -> u32 {
    let k = space.k;
    let mut best = INF;
    for a0 in 0..k {
        for a1 in 0..k {
            if space.image(s, a0, a1) == t {
                best = best.min(space.profile_cost(s, a0, a1) as u32);
            }
        }
    }
    best
}

/// Shortest-path costs from `source` to every state (Dial's algorithm with
/// edge weights 0, 1, 2). Stops early once every state flagged in
/// `targets` is settled.
pub fn costs_from(space: &StateSpace, source: u32, targets: Option<(&[bool], usize)>) -> Vec<u32> {
    let k = space.k;
    let mut dist = vec![INF; space.count];
    let mut done = vec![false; space.count];
    let mut buckets: [Vec<u32>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    dist[source as usize] = 0;
    buckets[0].push(source);
    let mut d = 0u32;
    let mut remaining = targets.map(|(_, n)| n).unwrap_or(usize::MAX);
    loop {
        let b = (d % 3) as usize;
        if buckets.iter().all(Vec::is_empty) {
            break;
        }
        while let Some(v) = buckets[b].pop() {
            let vi = v as usize;
            if done[vi] || dist[vi] != d {
                continue;
            }
            done[vi] = true;
            if let Some((flags, _)) = targets {
                if flags[vi] {
                    remaining -= 1;
                    if remaining == 0 {
                        return dist;
                    }
                }
            }
            for a0 in 0..k {
                for a1 in 0..k {
                    let w = space.image(v, a0, a1);
                    let c = space.profile_cost(v, a0, a1) as u32;
                    let nd = d + c;
                    if nd < dist[w as usize] {
                        dist[w as usize] = nd;
                        buckets[((d + c) % 3) as usize].push(w);
                    }
                }
            }
        }
        d += 1;
    }
    dist
}

/// `C(s, s')` for every ordered pair of the given absorbing states.
pub fn cost_matrix(space: &StateSpace, absorbing: &[u32]) -> Vec<Vec<u32>> {
    let mut flags = vec![false; space.count];
    for &s in absorbing {
        flags[s as usize] = true;
    }
    absorbing
        .par_iter()
        .map(|&s| {
            let dist = costs_from(space, s, Some((&flags, absorbing.len())));
            absorbing.iter().map(|&t| dist[t as usize]).collect()
        })
        .collect()
}

/// States reachable from `start` along unperturbed transitions.
pub fn unperturbed_closure(space: &StateSpace, start: u32) -> Vec<u32> {
    let mut seen = vec![false; space.count];
    let mut order = vec![start];
    seen[start as usize] = true;
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        i += 1;
        for w in space.successors(v) {
            if !seen[w as usize] {
                seen[w as usize] = true;
                order.push(w);
            }
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closure_oracle(adj: &[Vec<u32>]) -> Vec<Vec<bool>> {
        let n = adj.len();
        let mut r = vec![vec![false; n]; n];
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = true;
            for &j in &adj[i] {
                row[j as usize] = true;
            }
        }
        for m in 0..n {
            for i in 0..n {
                if r[i][m] {
                    for j in 0..n {
                        if r[m][j] {
                            r[i][j] = true;
                        }
                    }
                }
            }
        }
        r
    }

    #[test]
    fn one_big_cycle() {
        let n = 50;
        let classes = closed_classes(n, |v| [(v + 1) % n as u32]);
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].len(), n);
    }

    #[test]
    fn scc_matches_closure_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.random_range(1..100usize);
            let adj: Vec<Vec<u32>> =
                (0..n).map(|_| (0..rng.random_range(0..3)).map(|_| rng.random_range(0..n as u32)).collect()).collect();
            let (comp, _) = strongly_connected(n, |v| adj[v as usize].clone());
            let reach = closure_oracle(&adj);
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(comp[i] == comp[j], reach[i][j] && reach[j][i]);
                }
            }
            let classes = closed_classes(n, |v| adj[v as usize].clone());
            for i in 0..n {
                let closed = (0..n).all(|j| !reach[i][j] || reach[j][i]);
                let found = classes.iter().any(|c| c.contains(&(i as u32)));
                assert_eq!(closed, found, "node {i}");
            }
        }
    }
}
