//! Time-respecting reachability, path enumeration and per-edge flow
//! statistics around an ego node.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{CommNetwork, GraphIndex, NodeRef};
use crate::time::{self, Timestamp};

/// Order required between consecutive accesses on a path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalOrder {
    #[default]
    Strict,
    NonDecreasing,
}

impl TemporalOrder {
    /// Whether an access at `next` may follow one at `prev`.
    pub fn follows(self, prev: Timestamp, next: Timestamp) -> bool {
        match self {
            TemporalOrder::Strict => next > prev,
            TemporalOrder::NonDecreasing => next >= prev,
        }
    }

    /// Earliest instant in the sorted `timestamps` that may follow `prev`.
    pub fn next_after(self, timestamps: &[Timestamp], prev: Timestamp) -> Option<Timestamp> {
        let i = timestamps.partition_point(|&t| !self.follows(prev, t));
        timestamps.get(i).copied()
    }

    /// Latest instant in the sorted `timestamps` that `next` may follow and
    /// that is no later than `cutoff`.
    pub fn last_before(self, timestamps: &[Timestamp], next: Timestamp, cutoff: Timestamp) -> Option<Timestamp> {
        let a = timestamps.partition_point(|&t| self.follows(t, next));
        let b = timestamps.partition_point(|&t| t <= cutoff);
        a.min(b).checked_sub(1).map(|i| timestamps[i])
    }
}

/// Which side of the ego a reachable subnetwork covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    /// Nodes whose information reaches the ego.
    Reviewed,
    /// Nodes the ego's information reaches.
    Disseminated,
}

impl std::str::FromStr for FlowDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reviewed" => Ok(FlowDirection::Reviewed),
            "disseminated" => Ok(FlowDirection::Disseminated),
            _ => Err(Error::InvalidInput(format!(
                "direction `{s}` is not one of reviewed, disseminated"
            ))),
        }
    }
}

fn ego_index<'a>(g: &GraphIndex<'a>, ego: &NodeRef) -> Result<usize> {
    g.index
        .get(ego)
        .copied()
        .ok_or_else(|| Error::UnknownNode(ego.to_string()))
}

/// Nodes reachable from `ego` along time-respecting paths using accesses no
/// later than `cutoff`. Earliest-arrival traversal.
pub fn influence_set(
    net: &CommNetwork,
    ego: &NodeRef,
    cutoff: Timestamp,
    order: TemporalOrder,
) -> Result<BTreeSet<NodeRef>> {
    let g = GraphIndex::new(net);
    let e = ego_index(&g, ego)?;
    let mut arrival: Vec<Option<Timestamp>> = vec![None; g.len()];
    arrival[e] = Some(Timestamp::MIN);
    let mut heap = BinaryHeap::from([Reverse((Timestamp::MIN, e))]);
    while let Some(Reverse((t, u))) = heap.pop() {
        if arrival[u] != Some(t) {
            continue;
        }
        for &(v, ei) in &g.out[u] {
            let Some(tv) = order.next_after(&g.edges[ei].timestamps, t).filter(|&tv| tv <= cutoff) else {
                continue;
            };
            if arrival[v].is_none_or(|a| tv < a) {
                arrival[v] = Some(tv);
                heap.push(Reverse((tv, v)));
            }
        }
    }
    Ok(collect_reached(&g, e, &arrival))
}

/// Nodes that reach `ego` along time-respecting paths using accesses no
/// later than `cutoff`. Latest-departure traversal on reversed time.
pub fn source_set(
    net: &CommNetwork,
    ego: &NodeRef,
    cutoff: Timestamp,
    order: TemporalOrder,
) -> Result<BTreeSet<NodeRef>> {
    let g = GraphIndex::new(net);
    let e = ego_index(&g, ego)?;
    let mut departure: Vec<Option<Timestamp>> = vec![None; g.len()];
    departure[e] = Some(Timestamp::MAX);
    let mut heap = BinaryHeap::from([(Timestamp::MAX, e)]);
    while let Some((t, v)) = heap.pop() {
        if departure[v] != Some(t) {
            continue;
        }
        for &(u, ei) in &g.inc[v] {
            let Some(tu) = order.last_before(&g.edges[ei].timestamps, t, cutoff) else {
                continue;
            };
            if departure[u].is_none_or(|d| tu > d) {
                departure[u] = Some(tu);
                heap.push((tu, u));
            }
        }
    }
    Ok(collect_reached(&g, e, &departure))
}

fn collect_reached(g: &GraphIndex<'_>, ego: usize, label: &[Option<Timestamp>]) -> BTreeSet<NodeRef> {
    label
        .iter()
        .enumerate()
        .filter(|(i, l)| *i != ego && l.is_some())
        .map(|(i, _)| g.nodes[i].clone())
        .collect()
}

/// Reached fraction of each node set, the ego excluded from its own set.
pub fn reachability_ratios(net: &CommNetwork, reachable: &BTreeSet<NodeRef>, ego: &NodeRef) -> (f64, f64) {
    let ratio = |hits: usize, total: usize| if total == 0 { 0.0 } else { hits as f64 / total as f64 };
    let hcps = reachable.iter().filter(|n| n.is_hcp()).count();
    let notes = reachable.len() - hcps;
    let n1 = net.hcp_count() - usize::from(ego.is_hcp() && net.contains(ego));
    let n2 = net.note_count() - usize::from(!ego.is_hcp() && net.contains(ego));
    (ratio(hcps, n1), ratio(notes, n2))
}

/// One access used by a path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventStep {
    pub src: NodeRef,
    pub dst: NodeRef,
    #[serde(with = "time::rfc3339")]
    pub at: Timestamp,
}

/// Simple time-respecting path in chronological order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrPath {
    pub steps: Vec<EventStep>,
}

impl TrPath {
    pub fn nodes(&self) -> impl Iterator<Item = &NodeRef> {
        self.steps
            .first()
            .map(|s| &s.src)
            .into_iter()
            .chain(self.steps.iter().map(|s| &s.dst))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationCaps {
    pub max_depth: usize,
    pub max_paths: usize,
}

impl Default for EnumerationCaps {
    fn default() -> Self {
        Self {
            max_depth: 12,
            max_paths: 100_000,
        }
    }
}

/// Which enumerated paths are returned.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// Only paths that cannot be extended away from the ego.
    #[default]
    Maximal,
    /// Every simple time-respecting path with the ego at its end.
    AllSimple,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowOptions {
    #[serde(default)]
    pub order: TemporalOrder,
    #[serde(default)]
    pub caps: EnumerationCaps,
    #[serde(default)]
    pub mode: PathMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<TrPath>,
    /// Set when a cap stopped the enumeration early.
    pub truncated: bool,
}

struct Enumerator<'a, 'g> {
    g: &'a GraphIndex<'g>,
    forward: bool,
    cutoff: Timestamp,
    opts: FlowOptions,
    cancel: Option<&'a AtomicBool>,
    visited: Vec<bool>,
    /// `(from, to, at)` in traversal order, away from the ego.
    stack: Vec<(usize, usize, Timestamp)>,
    out: Vec<TrPath>,
    truncated: bool,
    full: bool,
    ticks: u32,
}

impl Enumerator<'_, '_> {
    fn extensions(&self, node: usize, bound: Timestamp) -> Vec<(usize, Timestamp)> {
        let mut ext = Vec::new();
        if self.forward {
            for &(v, ei) in &self.g.out[node] {
                if self.visited[v] {
                    continue;
                }
                for &t in &self.g.edges[ei].timestamps {
                    if t > self.cutoff {
                        break;
                    }
                    if self.opts.order.follows(bound, t) {
                        ext.push((v, t));
                    }
                }
            }
        } else {
            for &(u, ei) in &self.g.inc[node] {
                if self.visited[u] {
                    continue;
                }
                for &t in &self.g.edges[ei].timestamps {
                    if t > self.cutoff {
                        break;
                    }
                    if self.opts.order.follows(t, bound) {
                        ext.push((u, t));
                    }
                }
            }
        }
        ext
    }

    fn emit(&mut self) {
        if self.out.len() >= self.opts.caps.max_paths {
            self.truncated = true;
            self.full = true;
            return;
        }
        let step = |&(a, b, t): &(usize, usize, Timestamp)| {
            let (src, dst) = if self.forward { (a, b) } else { (b, a) };
            EventStep {
                src: self.g.nodes[src].clone(),
                dst: self.g.nodes[dst].clone(),
                at: t,
            }
        };
        let mut steps: Vec<EventStep> = self.stack.iter().map(step).collect();
        if !self.forward {
            steps.reverse();
        }
        self.out.push(TrPath { steps });
    }

    fn visit(&mut self, node: usize, bound: Timestamp) -> Result<()> {
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks % 1024 == 1 && self.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Err(Error::Cancelled);
        }
        let ext = self.extensions(node, bound);
        if !self.stack.is_empty() && (self.opts.mode == PathMode::AllSimple || ext.is_empty()) {
            self.emit();
        }
        if ext.is_empty() || self.full {
            return Ok(());
        }
        if self.stack.len() >= self.opts.caps.max_depth {
            self.truncated = true;
            if self.opts.mode == PathMode::Maximal {
                self.emit();
            }
            return Ok(());
        }
        for (next, t) in ext {
            self.visited[next] = true;
            self.stack.push((node, next, t));
            self.visit(next, t)?;
            self.stack.pop();
            self.visited[next] = false;
            if self.full {
                break;
            }
        }
        Ok(())
    }
}

/// Simple time-respecting paths starting at `ego` (disseminated) or ending
/// at it (reviewed), one per combination of usable access instants, within
/// `cutoff`. The ego never repeats.
pub fn enumerate_paths(
    net: &CommNetwork,
    ego: &NodeRef,
    direction: FlowDirection,
    cutoff: Timestamp,
    opts: &FlowOptions,
    cancel: Option<&AtomicBool>,
) -> Result<PathSet> {
    if opts.caps.max_depth == 0 || opts.caps.max_paths == 0 {
        return Err(Error::InvalidInput("caps must be positive".into()));
    }
    let g = GraphIndex::new(net);
    let e = ego_index(&g, ego)?;
    let forward = direction == FlowDirection::Disseminated;
    let mut en = Enumerator {
        g: &g,
        forward,
        cutoff,
        opts: *opts,
        cancel,
        visited: vec![false; g.len()],
        stack: Vec::new(),
        out: Vec::new(),
        truncated: false,
        full: false,
        ticks: 0,
    };
    en.visited[e] = true;
    en.visit(e, if forward { Timestamp::MIN } else { Timestamp::MAX })?;
    Ok(PathSet {
        paths: en.out,
        truncated: en.truncated,
    })
}

/// [`enumerate_paths`] restricted to maximal paths.
pub fn enumerate_maximal_paths(
    net: &CommNetwork,
    ego: &NodeRef,
    direction: FlowDirection,
    cutoff: Timestamp,
    caps: EnumerationCaps,
    order: TemporalOrder,
) -> Result<PathSet> {
    let opts = FlowOptions {
        order,
        caps,
        mode: PathMode::Maximal,
    };
    enumerate_paths(net, ego, direction, cutoff, &opts, None)
}

/// Latency and frequency of one edge over a set of paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEdgeStats {
    pub src: NodeRef,
    pub dst: NodeRef,
    pub mean_latency_s: f64,
    pub frequency: u64,
}

/// Per-edge mean latency (a path's first step has latency 0, later steps
/// the gap since the previous step) and frequency (accesses at the used
/// instant, summed over the paths containing the edge).
pub fn flow_stats(net: &CommNetwork, paths: &[TrPath]) -> Vec<FlowEdgeStats> {
    let mut acc: BTreeMap<(&NodeRef, &NodeRef), (i64, u64, u64)> = BTreeMap::new();
    for p in paths {
        let mut prev: Option<Timestamp> = None;
        for s in &p.steps {
            let lat = prev.map_or(0, |t| s.at - t);
            prev = Some(s.at);
            let mult = net
                .edge(&s.src, &s.dst)
                .map_or(1, |e| e.multiplicity_at(s.at).max(1)) as u64;
            let entry = acc.entry((&s.src, &s.dst)).or_default();
            entry.0 += lat;
            entry.1 += 1;
            entry.2 += mult;
        }
    }
    acc.into_iter()
        .map(|((src, dst), (lat, n, freq))| FlowEdgeStats {
            src: src.clone(),
            dst: dst.clone(),
            mean_latency_s: lat as f64 / n as f64,
            frequency: freq,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachableSubnetwork {
    pub ego: NodeRef,
    pub direction: FlowDirection,
    pub truncated: bool,
    pub nodes: Vec<NodeRef>,
    pub edges: Vec<FlowEdgeStats>,
    pub hcp_ratio: f64,
    pub note_ratio: f64,
}

/// Reviewed or disseminated subnetwork of `ego` up to `cutoff`: the
/// reachable nodes, the edges used by the enumerated paths with their
/// flow statistics, and the reached fraction of each node set.
pub fn build_reachable_subnetwork(
    net: &CommNetwork,
    ego: &NodeRef,
    direction: FlowDirection,
    cutoff: Timestamp,
    opts: &FlowOptions,
    cancel: Option<&AtomicBool>,
) -> Result<ReachableSubnetwork> {
    let reach = match direction {
        FlowDirection::Disseminated => influence_set(net, ego, cutoff, opts.order)?,
        FlowDirection::Reviewed => source_set(net, ego, cutoff, opts.order)?,
    };
    let paths = enumerate_paths(net, ego, direction, cutoff, opts, cancel)?;
    let (hcp_ratio, note_ratio) = reachability_ratios(net, &reach, ego);
    Ok(ReachableSubnetwork {
        ego: ego.clone(),
        direction,
        truncated: paths.truncated,
        nodes: reach.into_iter().collect(),
        edges: flow_stats(net, &paths.paths),
        hcp_ratio,
        note_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::*;
    use crate::network::{build_network, TimeWindow};
    use proptest::prelude::*;

    fn set(keys: &[&str]) -> BTreeSet<NodeRef> {
        keys.iter().map(|k| k.parse().unwrap()).collect()
    }

    fn node(k: &str) -> NodeRef {
        k.parse().unwrap()
    }

    const S: TemporalOrder = TemporalOrder::Strict;

    #[test]
    fn influence_examples() {
        let g1 = g1();
        assert_eq!(
            influence_set(&g1, &node("hcp:H1"), 5, S).unwrap(),
            set(&["note:N1", "hcp:H2", "note:N2"])
        );
        assert_eq!(influence_set(&g1, &node("hcp:H2"), 5, S).unwrap(), set(&["note:N2", "hcp:H1"]));
        assert!(influence_set(&g1, &node("hcp:H1"), 0, S).unwrap().is_empty());
        assert!(matches!(
            influence_set(&g1, &node("hcp:X"), 5, S),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn source_examples() {
        let g1 = g1();
        assert_eq!(
            source_set(&g1, &node("hcp:H1"), 5, S).unwrap(),
            set(&["note:N1", "hcp:H2", "note:N2"])
        );
        assert_eq!(source_set(&g1, &node("hcp:H2"), 5, S).unwrap(), set(&["hcp:H1", "note:N1"]));
        assert!(source_set(&g3(), &node("hcp:H3"), 5, S).unwrap().is_empty());
    }

    #[test]
    fn ratio_examples() {
        let g1 = g1();
        let r = influence_set(&g1, &node("hcp:H1"), 5, S).unwrap();
        assert_eq!(reachability_ratios(&g1, &r, &node("hcp:H1")), (1.0, 1.0));
        let g3 = g3();
        let r = influence_set(&g3, &node("hcp:H1"), 5, S).unwrap();
        assert_eq!(reachability_ratios(&g3, &r, &node("hcp:H1")), (0.5, 2.0 / 3.0));
        assert_eq!(reachability_ratios(&g3, &BTreeSet::new(), &node("hcp:H1")), (0.0, 0.0));
    }

    fn describe(p: &TrPath) -> Vec<(String, String, Timestamp)> {
        p.steps.iter().map(|s| (s.src.to_string(), s.dst.to_string(), s.at)).collect()
    }

    fn triple(a: &str, b: &str, t: Timestamp) -> (String, String, Timestamp) {
        (a.into(), b.into(), t)
    }

    #[test]
    fn maximal_paths_on_g1() {
        let caps = EnumerationCaps::default();
        let d = enumerate_maximal_paths(&g1(), &node("hcp:H1"), FlowDirection::Disseminated, 5, caps, S).unwrap();
        assert!(!d.truncated);
        assert_eq!(d.paths.len(), 1);
        assert_eq!(
            describe(&d.paths[0]),
            vec![triple("hcp:H1", "note:N1", 1), triple("note:N1", "hcp:H2", 2), triple("hcp:H2", "note:N2", 3)]
        );
        let r = enumerate_maximal_paths(&g1(), &node("hcp:H1"), FlowDirection::Reviewed, 5, caps, S).unwrap();
        assert_eq!(r.paths.len(), 1);
        assert_eq!(
            describe(&r.paths[0]),
            vec![triple("note:N1", "hcp:H2", 2), triple("hcp:H2", "note:N2", 3), triple("note:N2", "hcp:H1", 5)]
        );
    }

    #[test]
    fn isolated_ego_has_no_paths() {
        let net = CommNetwork::from_edges(
            "P",
            TimeWindow { start: 0, end: 9 },
            vec![(node("hcp:H1"), node("note:N1"), vec![1])],
        )
        .unwrap();
        let caps = EnumerationCaps::default();
        let p = enumerate_maximal_paths(&net, &node("note:N1"), FlowDirection::Disseminated, 9, caps, S).unwrap();
        assert!(p.paths.is_empty());
        let sub = build_reachable_subnetwork(
            &net,
            &node("note:N1"),
            FlowDirection::Disseminated,
            9,
            &FlowOptions::default(),
            None,
        )
        .unwrap();
        assert!(sub.nodes.is_empty() && sub.edges.is_empty());
        assert_eq!((sub.hcp_ratio, sub.note_ratio), (0.0, 0.0));
    }

    #[test]
    fn reviewed_latencies_on_g1() {
        let g1 = g1();
        let sub = build_reachable_subnetwork(
            &g1,
            &node("hcp:H1"),
            FlowDirection::Reviewed,
            5,
            &FlowOptions::default(),
            None,
        )
        .unwrap();
        let got: Vec<(String, String, f64, u64)> = sub
            .edges
            .iter()
            .map(|e| (e.src.to_string(), e.dst.to_string(), e.mean_latency_s, e.frequency))
            .collect();
        assert_eq!(
            got,
            vec![
                ("hcp:H2".into(), "note:N2".into(), 1.0, 1),
                ("note:N1".into(), "hcp:H2".into(), 0.0, 1),
                ("note:N2".into(), "hcp:H1".into(), 2.0, 1),
            ]
        );
    }

    #[test]
    fn latency_is_averaged_over_participations() {
        let st = |a: &str, b: &str, t| EventStep {
            src: node(a),
            dst: node(b),
            at: t,
        };
        let paths = vec![
            TrPath {
                steps: vec![st("hcp:A", "note:X", 1), st("note:X", "hcp:B", 2)],
            },
            TrPath {
                steps: vec![st("hcp:C", "note:X", 0), st("note:X", "hcp:B", 3)],
            },
            TrPath {
                steps: vec![st("hcp:D", "note:Y", 7)],
            },
        ];
        let net = CommNetwork::empty("P", TimeWindow { start: 0, end: 9 });
        let stats = flow_stats(&net, &paths);
        let xb = stats.iter().find(|s| s.src == node("note:X")).unwrap();
        assert_eq!((xb.mean_latency_s, xb.frequency), (2.0, 2));
        let dy = stats.iter().find(|s| s.src == node("hcp:D")).unwrap();
        assert_eq!((dy.mean_latency_s, dy.frequency), (0.0, 1));
    }

    #[test]
    fn frequency_counts_duplicate_accesses() {
        let mut evs = g1_events();
        evs.push(evs[1].clone());
        let net = build_network(&evs).unwrap();
        let p = enumerate_maximal_paths(
            &net,
            &node("hcp:H1"),
            FlowDirection::Disseminated,
            5,
            EnumerationCaps::default(),
            S,
        )
        .unwrap();
        let stats = flow_stats(&net, &p.paths);
        let n1h2 = stats.iter().find(|s| s.src == node("note:N1")).unwrap();
        assert_eq!(n1h2.frequency, 2);
    }

    #[test]
    fn g3_subnetwork_excludes_isolated_pair() {
        let sub = build_reachable_subnetwork(
            &g3(),
            &node("hcp:H1"),
            FlowDirection::Disseminated,
            5,
            &FlowOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(sub.nodes.len(), 3);
        assert_eq!(sub.edges.len(), 3);
        assert!(!sub.nodes.contains(&node("hcp:H3")) && !sub.nodes.contains(&node("note:N3")));
        let json = serde_json::to_value(&sub).unwrap();
        for k in ["ego", "direction", "truncated", "nodes", "edges", "hcp_ratio", "note_ratio"] {
            assert!(json.get(k).is_some(), "{k}");
        }
        assert_eq!(json["direction"], "disseminated");
        assert!(json["edges"][0].get("mean_latency_s").is_some());
    }

    #[test]
    fn caps_flag_truncation() {
        let caps = EnumerationCaps {
            max_depth: 2,
            max_paths: 10,
        };
        let p = enumerate_maximal_paths(&g1(), &node("hcp:H1"), FlowDirection::Disseminated, 5, caps, S).unwrap();
        assert!(p.truncated);
        assert_eq!(p.paths[0].steps.len(), 2);
        let caps = EnumerationCaps {
            max_depth: 12,
            max_paths: 1,
        };
        let net = complete(3, 3, 0);
        let net = CommNetwork::from_edges(
            "P",
            net.window,
            net.edges().map(|e| (e.src.clone(), e.dst.clone(), vec![0, 1, 2, 3])),
        )
        .unwrap();
        let p = enumerate_maximal_paths(&net, &node("hcp:h0"), FlowDirection::Disseminated, 3, caps, S).unwrap();
        assert!(p.truncated);
        assert_eq!(p.paths.len(), 1);
    }

    #[test]
    fn cancellation_stops_enumeration() {
        let net = complete(4, 4, 0);
        let net = CommNetwork::from_edges(
            "P",
            net.window,
            net.edges().map(|e| (e.src.clone(), e.dst.clone(), (0..10).collect())),
        )
        .unwrap();
        let cancel = AtomicBool::new(true);
        let r = enumerate_paths(
            &net,
            &node("hcp:h0"),
            FlowDirection::Disseminated,
            10,
            &FlowOptions::default(),
            Some(&cancel),
        );
        assert!(matches!(r, Err(Error::Cancelled)));
    }

    #[test]
    fn all_simple_mode_includes_prefixes() {
        let opts = FlowOptions {
            mode: PathMode::AllSimple,
            ..Default::default()
        };
        let p = enumerate_paths(&g1(), &node("hcp:H1"), FlowDirection::Disseminated, 5, &opts, None).unwrap();
        assert_eq!(p.paths.len(), 3);
    }

    #[test]
    fn non_decreasing_order_admits_ties() {
        let net = CommNetwork::from_edges(
            "P",
            TimeWindow { start: 0, end: 9 },
            vec![
                (node("hcp:H1"), node("note:N1"), vec![1]),
                (node("note:N1"), node("hcp:H2"), vec![1]),
            ],
        )
        .unwrap();
        assert_eq!(influence_set(&net, &node("hcp:H1"), 9, S).unwrap().len(), 1);
        assert_eq!(
            influence_set(&net, &node("hcp:H1"), 9, TemporalOrder::NonDecreasing).unwrap().len(),
            2
        );
    }

    fn arb_net() -> impl Strategy<Value = CommNetwork> {
        prop::collection::vec((0u8..4, 0u8..4, prop::bool::ANY, 0i64..8), 1..15).prop_map(|v| {
            let edges = v.into_iter().map(|(h, n, w, t)| {
                let h = NodeRef::hcp(format!("H{h}"));
                let n = NodeRef::note(format!("N{n}"));
                if w {
                    (h, n, vec![t])
                } else {
                    (n, h, vec![t])
                }
            });
            CommNetwork::from_edges("P", TimeWindow { start: 0, end: 8 }, edges).unwrap()
        })
    }

    proptest! {
        #[test]
        fn traversal_matches_path_union(net in arb_net(), cutoff in 0i64..9, strict in prop::bool::ANY) {
            let order = if strict { S } else { TemporalOrder::NonDecreasing };
            for ego in net.nodes() {
                for (dir, set) in [
                    (FlowDirection::Disseminated, influence_set(&net, ego, cutoff, order).unwrap()),
                    (FlowDirection::Reviewed, source_set(&net, ego, cutoff, order).unwrap()),
                ] {
                    let p = enumerate_maximal_paths(&net, ego, dir, cutoff, EnumerationCaps::default(), order).unwrap();
                    prop_assert!(!p.truncated);
                    let union: BTreeSet<NodeRef> =
                        p.paths.iter().flat_map(|p| p.nodes().cloned()).filter(|n| n != ego).collect();
                    prop_assert_eq!(&set, &union);
                    for path in &p.paths {
                        prop_assert!(path.steps.windows(2).all(|w| w[0].dst == w[1].src && order.follows(w[0].at, w[1].at)));
                    }
                }
            }
        }

        #[test]
        fn influence_is_monotone_and_dual(net in arb_net(), a in 0i64..9, b in 0i64..9) {
            let (lo, hi) = (a.min(b), a.max(b));
            for e in net.nodes() {
                let small = influence_set(&net, e, lo, S).unwrap();
                let big = influence_set(&net, e, hi, S).unwrap();
                prop_assert!(small.is_subset(&big));
                for v in net.nodes() {
                    if v == e {
                        continue;
                    }
                    prop_assert_eq!(big.contains(v), source_set(&net, v, hi, S).unwrap().contains(e));
                }
            }
        }

        #[test]
        fn stats_bounds(net in arb_net(), cutoff in 0i64..9) {
            for ego in net.nodes() {
                let p = enumerate_maximal_paths(&net, ego, FlowDirection::Disseminated, cutoff, EnumerationCaps::default(), S).unwrap();
                for s in flow_stats(&net, &p.paths) {
                    prop_assert!(s.mean_latency_s >= 0.0);
                    prop_assert!(s.mean_latency_s <= (cutoff - net.window.start) as f64);
                    let max_mult = net.edge(&s.src, &s.dst).unwrap().multiplicity.iter().copied().max().unwrap();
                    prop_assert!(s.frequency <= p.paths.len() as u64 * max_mult as u64);
                }
            }
        }
    }
}
