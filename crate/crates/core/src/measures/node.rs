use std::collections::HashMap;

use crate::network::{CommNetwork, GraphIndex};
use crate::temporal::TemporalOrder;

use super::{BetweennessNorm, Direction, NodeMeasures};

fn collect(g: &GraphIndex<'_>, label: &'static str, direction: Option<Direction>, vals: Vec<f64>) -> NodeMeasures {
    NodeMeasures {
        label,
        direction,
        values: g.nodes.iter().map(|n| (*n).clone()).zip(vals).collect(),
    }
}

/// Number of distinct incoming or outgoing edges per node.
pub fn node_degree(net: &CommNetwork, direction: Direction) -> NodeMeasures {
    let g = GraphIndex::new(net);
    let vals = (0..g.len())
        .map(|i| match direction {
            Direction::In => g.inc[i].len() as f64,
            Direction::Out => g.out[i].len() as f64,
        })
        .collect();
    collect(&g, "degree", Some(direction), vals)
}

/// Closeness with each node set's own normalizer: `(2(n1−1)+n2)/d` for HCPs
/// and `(2(n2−1)+n1)/d` for notes, where `d` sums static hop distances to
/// (`Out`) or from (`In`) every other node. An unreachable node counts as
/// distance `n1 + n2`.
pub fn node_closeness(net: &CommNetwork, direction: Direction) -> NodeMeasures {
    let g = GraphIndex::new(net);
    let vals = closeness_values(&g, direction);
    collect(&g, "closeness", Some(direction), vals)
}

pub(crate) fn closeness_values(g: &GraphIndex<'_>, direction: Direction) -> Vec<f64> {
    let n = g.len();
    let n1 = g.n_hcp;
    let n2 = g.n_note();
    let penalty = n;
    (0..n)
        .map(|k| {
            let dist = g.bfs(k, direction == Direction::In);
            let d: usize = dist
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, d)| d.unwrap_or(penalty))
                .sum();
            if d == 0 {
                return 0.0;
            }
            let norm = if g.is_hcp(k) {
                2 * (n1 - 1) + n2
            } else {
                2 * (n2 - 1) + n1
            };
            norm as f64 / d as f64
        })
        .collect()
}

/// Mean static hop distance of the shortest incoming path to each HCP,
/// over every node that can reach it; 0 when nothing reaches the HCP.
pub fn node_distance(net: &CommNetwork) -> NodeMeasures {
    let g = GraphIndex::new(net);
    let vals: Vec<f64> = (0..g.n_hcp)
        .map(|h| {
            let dist = g.bfs(h, true);
            let (sum, count) = dist
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != h)
                .filter_map(|(_, d)| *d)
                .fold((0usize, 0usize), |(s, c), d| (s + d, c + 1));
            if count == 0 {
                0.0
            } else {
                sum as f64 / count as f64
            }
        })
        .collect();
    NodeMeasures {
        label: "distance",
        direction: Some(Direction::In),
        values: g.nodes[..g.n_hcp].iter().map(|n| (*n).clone()).zip(vals).collect(),
    }
}

/// Largest betweenness (ordered pairs) a node in a set of size `own` can
/// attain in a bipartite graph whose other set has size `other`.
pub fn bipartite_betweenness_max(own: usize, other: usize) -> f64 {
    if own == 0 || other == 0 {
        return 0.0;
    }
    let m = other as f64;
    let s = ((own - 1) / other) as f64;
    let t = ((own - 1) % other) as f64;
    m * m * (s + 1.0).powi(2) + m * (s + 1.0) * (2.0 * t - s - 1.0) - t * (2.0 * s - t + 3.0)
}

/// Betweenness over hop-minimal time-respecting paths: for every ordered
/// pair `(s, t)` the fraction of its hop-minimal time-respecting paths
/// that pass through the node. Paths are counted as node sequences.
pub fn node_betweenness(net: &CommNetwork, order: TemporalOrder, norm: BetweennessNorm) -> NodeMeasures {
    let g = GraphIndex::new(net);
    let mut vals = betweenness_raw(&g, order);
    if norm == BetweennessNorm::BipartiteMax {
        let n1 = g.n_hcp;
        let n2 = g.n_note();
        let max1 = bipartite_betweenness_max(n1, n2);
        let max2 = bipartite_betweenness_max(n2, n1);
        for (i, v) in vals.iter_mut().enumerate() {
            let m = if g.is_hcp(i) { max1 } else { max2 };
            *v = if m > 0.0 { *v / m } else { 0.0 };
        }
    }
    collect(&g, "betweenness", None, vals)
}

#[derive(Debug)]
struct State {
    node: usize,
    arrival: i64,
    paths: f64,
    succ: Vec<usize>,
}

/// Layered search over `(node, earliest arrival)` states from each source.
///
/// A node sequence is time-respecting iff taking the earliest admissible
/// timestamp at every step succeeds, so each sequence maps to exactly one
/// state per layer. A state is discarded when the same node was already
/// reached at an earlier layer no later in time; nothing routed through it
/// can be hop-minimal.
pub(crate) fn betweenness_raw(g: &GraphIndex<'_>, order: TemporalOrder) -> Vec<f64> {
    let n = g.len();
    let mut bc = vec![0.0; n];
    for s in 0..n {
        let mut layers: Vec<Vec<State>> = vec![vec![State {
            node: s,
            arrival: i64::MIN,
            paths: 1.0,
            succ: Vec::new(),
        }]];
        // best (earliest) arrival seen so far per node, across earlier layers
        let mut best: Vec<Option<i64>> = vec![None; n];
        best[s] = Some(i64::MIN);
        let mut first_layer: Vec<Option<usize>> = vec![None; n];
        first_layer[s] = Some(0);
        for depth in 0..n.saturating_sub(1) {
            let mut next: Vec<State> = Vec::new();
            let mut slot: HashMap<(usize, i64), usize> = HashMap::new();
            let cur = &mut layers[depth];
            for st in cur.iter_mut() {
                for &(v, ei) in &g.out[st.node] {
                    let Some(t) = order.next_after(&g.edges[ei].timestamps, st.arrival) else {
                        continue;
                    };
                    if best[v].is_some_and(|b| b <= t) {
                        continue;
                    }
                    let idx = *slot.entry((v, t)).or_insert_with(|| {
                        next.push(State {
                            node: v,
                            arrival: t,
                            paths: 0.0,
                            succ: Vec::new(),
                        });
                        next.len() - 1
                    });
                    next[idx].paths += st.paths;
                    st.succ.push(idx);
                }
            }
            if next.is_empty() {
                break;
            }
            for st in &next {
                if best[st.node].is_none_or(|b| st.arrival < b) {
                    best[st.node] = Some(st.arrival);
                }
                first_layer[st.node].get_or_insert(depth + 1);
            }
            layers.push(next);
        }
        let mut sigma = vec![0.0; n];
        for (depth, layer) in layers.iter().enumerate() {
            for st in layer {
                if first_layer[st.node] == Some(depth) {
                    sigma[st.node] += st.paths;
                }
            }
        }
        // g(x): sum over targets t of (#continuations from x ending at t at
        // its first layer) / sigma_st
        let mut carry: Vec<f64> = Vec::new();
        for depth in (1..layers.len()).rev() {
            let layer = &layers[depth];
            let mut here = vec![0.0; layer.len()];
            for (i, st) in layer.iter().enumerate() {
                let terminal = if first_layer[st.node] == Some(depth) {
                    1.0 / sigma[st.node]
                } else {
                    0.0
                };
                let downstream: f64 = st.succ.iter().map(|&j| carry[j]).sum();
                here[i] = terminal + downstream;
                bc[st.node] += st.paths * downstream;
            }
            carry = here;
        }
    }
    bc
}
