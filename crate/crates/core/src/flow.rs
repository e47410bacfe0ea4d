//! Maximum flow on small transportation networks.
//!
//! [`FlowNetwork`] is Dinic's algorithm over `f64` capacities. For supports
//! on the real line the threshold graph `{(i, j) : |x_i - y_j| <= r}` has
//! monotone neighbourhoods, and [`interval_max_flow`] solves it with a
//! linear-time greedy instead.

use std::collections::VecDeque;

/// Residual capacities at or below this are treated as saturated.
pub const RESIDUAL_EPS: f64 = 1e-15;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: f64,
}

/// Directed network with `f64` capacities.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0 });
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap > RESIDUAL_EPS && level[to] == usize::MAX {
                    level[to] = level[u] + 1;
                    queue.push_back(to);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    fn augment(&mut self, u: usize, t: usize, limit: f64, level: &[usize], next: &mut [usize]) -> f64 {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let Edge { to, cap } = self.edges[e];
            if cap > RESIDUAL_EPS && level[to] == level[u] + 1 {
                let pushed = self.augment(to, t, limit.min(cap), level, next);
                if pushed > 0.0 {
                    self.edges[e].cap -= pushed;
                    self.edges[e ^ 1].cap += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    /// Value of a maximum `s`-`t` flow. Consumes residual capacity.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0; self.adj.len()];
            loop {
                let pushed = self.augment(s, t, f64::INFINITY, &level, &mut next);
                if pushed <= 0.0 {
                    break;
                }
                total += pushed;
            }
        }
        total
    }
}

/// Max flow of the bipartite network `source -> i (supply[i]) -> j (demand[j]) -> sink`
/// with uncapacitated middle edges where `connected(i, j)`.
pub fn bipartite_max_flow(
    supply: &[f64],
    demand: &[f64],
    connected: impl Fn(usize, usize) -> bool,
) -> f64 {
    let (m, k) = (supply.len(), demand.len());
    let (s, t) = (m + k, m + k + 1);
    let mut net = FlowNetwork::new(m + k + 2);
    for (i, &a) in supply.iter().enumerate() {
        net.add_edge(s, i, a);
    }
    for (j, &b) in demand.iter().enumerate() {
        net.add_edge(m + j, t, b);
    }
    for i in 0..m {
        for j in 0..k {
            if connected(i, j) {
                net.add_edge(i, m + j, f64::INFINITY);
            }
        }
    }
    net.max_flow(s, t)
}

/// Max flow when source `i` reaches exactly the sinks `ranges[i].0 .. ranges[i].1`
/// and both range ends are nondecreasing in `i`.
///
/// Each source fills the leftmost sinks it can still reach; with monotone
/// ranges a sink skipped by source `i` is unreachable for every later source,
/// so the greedy is optimal.
pub fn interval_max_flow(supply: &[f64], demand: &[f64], ranges: &[(usize, usize)]) -> f64 {
    debug_assert_eq!(supply.len(), ranges.len());
    debug_assert!(ranges.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    let mut residual = demand.to_vec();
    let mut cursor = 0;
    let mut total = 0.0;
    for (&a, &(lo, hi)) in supply.iter().zip(ranges) {
        cursor = cursor.max(lo);
        let mut left = a;
        while left > RESIDUAL_EPS && cursor < hi {
            let take = left.min(residual[cursor]);
            left -= take;
            residual[cursor] -= take;
            total += take;
            if residual[cursor] <= RESIDUAL_EPS {
                cursor += 1;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn classic_network() {
        // CLRS figure 26.1: max flow 23
        let mut net = FlowNetwork::new(6);
        for (u, v, c) in [
            (0, 1, 16.0),
            (0, 2, 13.0),
            (1, 3, 12.0),
            (2, 1, 4.0),
            (2, 4, 14.0),
            (3, 2, 9.0),
            (3, 5, 20.0),
            (4, 3, 7.0),
            (4, 5, 4.0),
        ] {
            net.add_edge(u, v, c);
        }
        assert!((net.max_flow(0, 5) - 23.0).abs() < 1e-12);
    }

    #[test]
    fn bipartite_complete_and_empty() {
        let a = [0.2, 0.8];
        let b = [0.5, 0.5];
        assert!((bipartite_max_flow(&a, &b, |_, _| true) - 1.0).abs() < 1e-15);
        assert_eq!(bipartite_max_flow(&a, &b, |_, _| false), 0.0);
        assert!((bipartite_max_flow(&a, &b, |i, j| i == j) - 0.7).abs() < 1e-15);
    }

    fn sorted_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-3.0f64..3.0, 0.01f64..1.0), 1..9).prop_map(|mut v| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v.dedup_by(|a, b| a.0 == b.0);
            v
        })
    }

    proptest! {
        #[test]
        fn greedy_matches_dinic_on_threshold_graphs(
            xs in sorted_points(),
            ys in sorted_points(),
            r in 0.0f64..2.0,
        ) {
            let norm = |v: &[(f64, f64)]| {
                let t: f64 = v.iter().map(|p| p.1).sum();
                v.iter().map(|p| p.1 / t).collect::<Vec<_>>()
            };
            let (a, b) = (norm(&xs), norm(&ys));
            let ranges: Vec<(usize, usize)> = xs
                .iter()
                .map(|&(x, _)| {
                    let lo = ys.partition_point(|&(y, _)| x - y > r);
                    let hi = ys.partition_point(|&(y, _)| y - x <= r);
                    (lo, hi.max(lo))
                })
                .collect();
            let greedy = interval_max_flow(&a, &b, &ranges);
            let dinic = bipartite_max_flow(&a, &b, |i, j| (xs[i].0 - ys[j].0).abs() <= r);
            prop_assert!((greedy - dinic).abs() < 1e-12, "greedy {} dinic {}", greedy, dinic);
        }
    }
}
