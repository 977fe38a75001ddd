//! Minimum-cost spanning arborescences oriented toward a root.

use super::graph::INF;

/// Cost of the cheapest spanning tree in which every non-root node has one
/// outgoing edge and all paths lead to `root`. `cost[u][v]` is the weight of
/// `u → v`; `INF` marks a missing edge. `None` if some node cannot reach
/// the root. Chu-Liu/Edmonds on the reversed graph.
pub fn min_arborescence(cost: &[Vec<u32>], root: usize) -> Option<u64> {
    let n = cost.len();
    // reversed: edge v -> u carries cost[u][v], so in-edges of u are out-edges in `cost`
    let mut edges: Vec<(usize, usize, u64)> = Vec::with_capacity(n * n);
    for (u, row) in cost.iter().enumerate() {
        for (v, &w) in row.iter().enumerate() {
            if u != v && w != INF {
                edges.push((v, u, w as u64));
            }
        }
    }
    directed_mst(n, root, edges)
}

/// Chu-Liu/Edmonds minimum out-arborescence from `root` over `(from, to, w)`.
fn directed_mst(mut n: usize, mut root: usize, mut edges: Vec<(usize, usize, u64)>) -> Option<u64> {
    const NONE: usize = usize::MAX;
    let mut total = 0u64;
    loop {
        let mut in_w = vec![u64::MAX; n];
        let mut pre = vec![NONE; n];
        for &(u, v, w) in &edges {
            if u != v && w < in_w[v] {
                in_w[v] = w;
                pre[v] = u;
            }
        }
        for v in 0..n {
            if v != root && pre[v] == NONE {
                return None;
            }
        }
        in_w[root] = 0;
        let mut id = vec![NONE; n];
        let mut mark = vec![NONE; n];
        let mut cycles = 0usize;
        for v in 0..n {
            total += in_w[v];
            let mut x = v;
            while mark[x] != v && id[x] == NONE && x != root {
                mark[x] = v;
                x = pre[x];
            }
            if x != root && id[x] == NONE {
                let mut y = pre[x];
                while y != x {
                    id[y] = cycles;
                    y = pre[y];
                }
                id[x] = cycles;
                cycles += 1;
            }
        }
        if cycles == 0 {
            return Some(total);
        }
        for slot in id.iter_mut() {
            if *slot == NONE {
                *slot = cycles;
                cycles += 1;
            }
        }
        edges = edges
            .into_iter()
            .filter_map(|(u, v, w)| {
                let (nu, nv) = (id[u], id[v]);
                (nu != nv).then(|| (nu, nv, w - in_w[v]))
            })
            .collect();
        n = cycles;
        root = id[root];
    }
}

/// Exhaustive oracle: tries every choice of one outgoing edge per non-root
/// node and keeps the acyclic ones. Feasible for roughly 8 nodes.
pub fn min_arborescence_brute(cost: &[Vec<u32>], root: usize) -> Option<u64> {
    let n = cost.len();
    let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    let mut parent = vec![usize::MAX; n];
    let mut best: Option<u64> = None;

    fn leads_to_root(parent: &[usize], root: usize, start: usize) -> bool {
        let mut x = start;
        for _ in 0..parent.len() {
            if x == root {
                return true;
            }
            x = parent[x];
        }
        x == root
    }

    fn search(
        depth: usize,
        others: &[usize],
        cost: &[Vec<u32>],
        root: usize,
        parent: &mut Vec<usize>,
        acc: u64,
        best: &mut Option<u64>,
    ) {
        if depth == others.len() {
            if others.iter().all(|&v| leads_to_root(parent, root, v)) && best.is_none_or(|b| acc < b) {
                *best = Some(acc);
            }
            return;
        }
        let v = others[depth];
        for p in 0..cost.len() {
            if p == v || cost[v][p] == INF {
                continue;
            }
            parent[v] = p;
            search(depth + 1, others, cost, root, parent, acc + cost[v][p] as u64, best);
        }
        parent[v] = usize::MAX;
    }

    search(0, &others, cost, root, &mut parent, 0, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn two_nodes() {
        let c = vec![vec![0, 1], vec![1, 0]];
        assert_eq!(min_arborescence(&c, 0), Some(1));
        assert_eq!(min_arborescence(&c, 1), Some(1));
    }

    #[test]
    fn three_nodes_asymmetric() {
        let c = vec![vec![0, 1, 5], vec![3, 0, 1], vec![2, 4, 0]];
        for r in 0..3 {
            assert_eq!(min_arborescence(&c, r), min_arborescence_brute(&c, r));
        }
        // into node 0: 2 -> 0 (2) and 1 -> 2 (1) beats 1 -> 0 (3)
        assert_eq!(min_arborescence(&c, 0), Some(3));
    }

    #[test]
    fn unreachable_root() {
        let c = vec![vec![0, INF], vec![1, 0]];
        assert_eq!(min_arborescence(&c, 1), None);
        assert_eq!(min_arborescence_brute(&c, 1), None);
        assert_eq!(min_arborescence(&c, 0), Some(1));
    }

    #[test]
    fn random_matches_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=7);
            let c: Vec<Vec<u32>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            if i == j {
                                0
                            } else if rng.random_bool(0.2) {
                                INF
                            } else {
                                rng.random_range(0..6)
                            }
                        })
                        .collect()
                })
                .collect();
            for r in 0..n {
                assert_eq!(min_arborescence(&c, r), min_arborescence_brute(&c, r), "{c:?} root {r}");
            }
        }
    }
}
