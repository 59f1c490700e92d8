//! Directed bipartite temporal communication network for one patient.
//!
//! A write creates the edge HCP → note, a read creates note → HCP. All
//! accesses on the same ordered pair share one [`TemporalEdge`] carrying the
//! sorted, de-duplicated access instants and the multiplicity of each.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::Days;
use serde::{Deserialize, Serialize};

use crate::cohort::{AccessEvent, Action, FilterPolicy, PatientRecord};
use crate::error::{Error, Result};
use crate::time::{self, Timestamp, SECONDS_PER_DAY};

pub use crate::time::TimeWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Hcp,
    Note,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Hcp => "hcp",
            NodeKind::Note => "note",
        }
    }
}

/// Node identity. Ordering puts every HCP before every note.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub id: String,
}

impl NodeRef {
    pub fn hcp(id: impl Into<String>) -> Self {
        Self {
            kind: NodeKind::Hcp,
            id: id.into(),
        }
    }

    pub fn note(id: impl Into<String>) -> Self {
        Self {
            kind: NodeKind::Note,
            id: id.into(),
        }
    }

    pub fn is_hcp(&self) -> bool {
        self.kind == NodeKind::Hcp
    }

    /// `kind:id`, used as a JSON object key.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.id)
    }
}

impl FromStr for NodeRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("hcp", id)) if !id.is_empty() => Ok(NodeRef::hcp(id)),
            Some(("note", id)) if !id.is_empty() => Ok(NodeRef::note(id)),
            _ => Err(Error::InvalidInput(format!(
                "node key `{s}` is not of the form hcp:<id> or note:<id>"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalEdge {
    pub src: NodeRef,
    pub dst: NodeRef,
    /// Strictly increasing access instants.
    pub timestamps: Vec<Timestamp>,
    /// Number of identical accesses at each instant; parallel to `timestamps`.
    pub multiplicity: Vec<u32>,
}

impl TemporalEdge {
    fn from_instants(src: NodeRef, dst: NodeRef, mut instants: Vec<Timestamp>) -> Self {
        instants.sort_unstable();
        let mut timestamps = Vec::with_capacity(instants.len());
        let mut multiplicity: Vec<u32> = Vec::with_capacity(instants.len());
        for t in instants {
            if timestamps.last() == Some(&t) {
                *multiplicity.last_mut().unwrap() += 1;
            } else {
                timestamps.push(t);
                multiplicity.push(1);
            }
        }
        Self {
            src,
            dst,
            timestamps,
            multiplicity,
        }
    }

    pub fn event_count(&self) -> u64 {
        self.multiplicity.iter().map(|&m| m as u64).sum()
    }

    pub fn multiplicity_at(&self, ts: Timestamp) -> u32 {
        self.timestamps
            .binary_search(&ts)
            .map(|i| self.multiplicity[i])
            .unwrap_or(0)
    }

    /// Expands back into one instant per access.
    pub fn instants(&self) -> impl Iterator<Item = Timestamp> + '_ {
        self.timestamps
            .iter()
            .zip(&self.multiplicity)
            .flat_map(|(&t, &m)| std::iter::repeat_n(t, m as usize))
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeWire {
    src: NodeRef,
    dst: NodeRef,
    #[serde(with = "time::rfc3339::vec")]
    timestamps: Vec<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    multiplicity: Option<Vec<u32>>,
}

impl Serialize for TemporalEdge {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let multiplicity = self
            .multiplicity
            .iter()
            .any(|&m| m != 1)
            .then(|| self.multiplicity.clone());
        EdgeWire {
            src: self.src.clone(),
            dst: self.dst.clone(),
            timestamps: self.timestamps.clone(),
            multiplicity,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TemporalEdge {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = EdgeWire::deserialize(d)?;
        let mult = w.multiplicity.unwrap_or_else(|| vec![1; w.timestamps.len()]);
        if mult.len() != w.timestamps.len() {
            return Err(serde::de::Error::custom("multiplicity length mismatch"));
        }
        let instants = w
            .timestamps
            .iter()
            .zip(&mult)
            .flat_map(|(&t, &m)| std::iter::repeat_n(t, m as usize))
            .collect();
        Ok(TemporalEdge::from_instants(w.src, w.dst, instants))
    }
}

/// Immutable per-patient network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommNetwork {
    pub patient_id: String,
    nodes: BTreeSet<NodeRef>,
    edges: BTreeMap<(NodeRef, NodeRef), TemporalEdge>,
    pub window: TimeWindow,
}

impl CommNetwork {
    /// Assembles a network from edges given as `(src, dst, instants)`.
    /// Instants on the same ordered pair are merged; nodes are the edge
    /// endpoints.
    pub fn from_edges<I>(patient_id: impl Into<String>, window: TimeWindow, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeRef, NodeRef, Vec<Timestamp>)>,
    {
        let mut acc: BTreeMap<(NodeRef, NodeRef), Vec<Timestamp>> = BTreeMap::new();
        for (src, dst, ts) in edges {
            if src.kind == dst.kind {
                return Err(Error::InvalidInput(format!(
                    "edge {src} -> {dst} joins two nodes of the same kind"
                )));
            }
            if ts.is_empty() {
                return Err(Error::InvalidInput(format!("edge {src} -> {dst} has no timestamps")));
            }
            acc.entry((src, dst)).or_default().extend(ts);
        }
        let mut nodes = BTreeSet::new();
        let mut out = BTreeMap::new();
        for ((src, dst), ts) in acc {
            nodes.insert(src.clone());
            nodes.insert(dst.clone());
            out.insert((src.clone(), dst.clone()), TemporalEdge::from_instants(src, dst, ts));
        }
        Ok(Self {
            patient_id: patient_id.into(),
            nodes,
            edges: out,
            window,
        })
    }

    pub fn empty(patient_id: impl Into<String>, window: TimeWindow) -> Self {
        Self {
            patient_id: patient_id.into(),
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
            window,
        }
    }

    pub fn nodes(&self) -> &BTreeSet<NodeRef> {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = &TemporalEdge> {
        self.edges.values()
    }

    pub fn edge(&self, src: &NodeRef, dst: &NodeRef) -> Option<&TemporalEdge> {
        self.edges.get(&(src.clone(), dst.clone()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, node: &NodeRef) -> bool {
        self.nodes.contains(node)
    }

    pub fn hcp_nodes(&self) -> impl Iterator<Item = &NodeRef> {
        self.nodes.iter().filter(|n| n.is_hcp())
    }

    pub fn note_nodes(&self) -> impl Iterator<Item = &NodeRef> {
        self.nodes.iter().filter(|n| !n.is_hcp())
    }

    pub fn hcp_count(&self) -> usize {
        self.hcp_nodes().count()
    }

    pub fn note_count(&self) -> usize {
        self.note_nodes().count()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn event_count(&self) -> u64 {
        self.edges.values().map(TemporalEdge::event_count).sum()
    }

    /// Nodes adjacent to `node` in either direction.
    pub fn neighbors(&self, node: &NodeRef) -> BTreeSet<NodeRef> {
        self.edges
            .keys()
            .filter_map(|(s, d)| {
                if s == node {
                    Some(d.clone())
                } else if d == node {
                    Some(s.clone())
                } else {
                    None
                }
            })
            .collect()
    }

    /// Copy without `removed` nodes and their incident edges. Nodes left
    /// without edges are dropped as well.
    pub fn without_nodes(&self, removed: &BTreeSet<NodeRef>) -> CommNetwork {
        let edges: BTreeMap<(NodeRef, NodeRef), TemporalEdge> = self
            .edges
            .iter()
            .filter(|((s, d), _)| !removed.contains(s) && !removed.contains(d))
            .map(|(k, e)| (k.clone(), e.clone()))
            .collect();
        let nodes = edges.keys().flat_map(|(s, d)| [s.clone(), d.clone()]).collect();
        CommNetwork {
            patient_id: self.patient_id.clone(),
            nodes,
            edges,
            window: self.window,
        }
    }

    /// Back to access events (one per counted access), sorted by time.
    pub fn to_events(&self, titles: &HashMap<String, crate::cohort::HcpTitle>) -> Vec<AccessEvent> {
        let mut out: Vec<AccessEvent> = self
            .edges
            .values()
            .flat_map(|e| {
                let (hcp, note, action) = if e.src.is_hcp() {
                    (&e.src, &e.dst, Action::Write)
                } else {
                    (&e.dst, &e.src, Action::Read)
                };
                let title = titles
                    .get(&hcp.id)
                    .copied()
                    .unwrap_or(crate::cohort::HcpTitle::Other);
                e.instants().map(move |t| AccessEvent {
                    patient_id: self.patient_id.clone(),
                    hcp_id: hcp.id.clone(),
                    hcp_title: title,
                    note_id: note.id.clone(),
                    action,
                    timestamp: t,
                })
            })
            .collect();
        out.sort_by(|a, b| {
            (a.timestamp, &a.hcp_id, &a.note_id, a.action).cmp(&(b.timestamp, &b.hcp_id, &b.note_id, b.action))
        });
        out
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkWire {
    patient_id: String,
    nodes: Vec<NodeRef>,
    edges: Vec<TemporalEdge>,
    window: TimeWindow,
}

impl Serialize for CommNetwork {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NetworkWire {
            patient_id: self.patient_id.clone(),
            nodes: self.nodes.iter().cloned().collect(),
            edges: self.edges.values().cloned().collect(),
            window: self.window,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CommNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = NetworkWire::deserialize(d)?;
        let mut net = CommNetwork::from_edges(
            w.patient_id,
            w.window,
            w.edges.iter().map(|e| (e.src.clone(), e.dst.clone(), e.instants().collect())),
        )
        .map_err(serde::de::Error::custom)?;
        net.nodes.extend(w.nodes);
        Ok(net)
    }
}

/// Builds one patient's network from that patient's events.
pub fn build_network(events: &[AccessEvent]) -> Result<CommNetwork> {
    let first = events
        .first()
        .ok_or_else(|| Error::EmptyNetwork("no events to build a network from".into()))?;
    if let Some(e) = events.iter().find(|e| e.patient_id != first.patient_id) {
        return Err(Error::InvalidInput(format!(
            "events mix patients `{}` and `{}`",
            first.patient_id, e.patient_id
        )));
    }
    let start = events.iter().map(|e| e.timestamp).min().unwrap();
    let end = events.iter().map(|e| e.timestamp).max().unwrap();
    let edges = events.iter().map(|e| {
        let hcp = NodeRef::hcp(&e.hcp_id);
        let note = NodeRef::note(&e.note_id);
        match e.action {
            Action::Write => (hcp, note, vec![e.timestamp]),
            Action::Read => (note, hcp, vec![e.timestamp]),
        }
    });
    CommNetwork::from_edges(first.patient_id.clone(), TimeWindow { start, end }, edges)
}

/// Groups events by patient and builds every network.
pub fn build_networks(events: &[AccessEvent]) -> Result<BTreeMap<String, CommNetwork>> {
    let mut by_patient: BTreeMap<&str, Vec<AccessEvent>> = BTreeMap::new();
    for e in events {
        by_patient.entry(e.patient_id.as_str()).or_default().push(e.clone());
    }
    by_patient
        .into_iter()
        .map(|(p, evs)| build_network(&evs).map(|n| (p.to_string(), n)))
        .collect()
}

/// Prefix of `net` up to and including `cutoff`.
pub fn slice(net: &CommNetwork, cutoff: Timestamp) -> Result<CommNetwork> {
    if cutoff < net.window.start {
        return Err(Error::EmptyNetwork(format!(
            "cutoff {} precedes the first event",
            time::format_timestamp(cutoff)
        )));
    }
    let mut edges = BTreeMap::new();
    let mut nodes = BTreeSet::new();
    for (key, e) in &net.edges {
        let keep = e.timestamps.partition_point(|&t| t <= cutoff);
        if keep == 0 {
            continue;
        }
        nodes.insert(e.src.clone());
        nodes.insert(e.dst.clone());
        edges.insert(
            key.clone(),
            TemporalEdge {
                src: e.src.clone(),
                dst: e.dst.clone(),
                timestamps: e.timestamps[..keep].to_vec(),
                multiplicity: e.multiplicity[..keep].to_vec(),
            },
        );
    }
    if edges.is_empty() {
        return Err(Error::EmptyNetwork(format!(
            "no accesses at or before {}",
            time::format_timestamp(cutoff)
        )));
    }
    Ok(CommNetwork {
        patient_id: net.patient_id.clone(),
        nodes,
        edges,
        window: TimeWindow {
            start: net.window.start,
            end: cutoff.min(net.window.end),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekBin {
    pub window: TimeWindow,
    pub milestone: bool,
}

pub const BIN_SECONDS: i64 = 7 * SECONDS_PER_DAY;

/// Contiguous 7-day bins starting at `diagnosis − days_before`, covering the
/// observation window (and the network window, if it extends further).
pub fn weekly_bins(net: &CommNetwork, patient: &PatientRecord, policy: &FilterPolicy) -> Vec<WeekBin> {
    let obs = patient.observation_window(policy);
    let start = obs.start;
    let cover = obs.end.max(net.window.end);
    let n_bins = ((cover - start).max(0) / BIN_SECONDS + 1) as usize;
    let first_day = patient.diagnosis_date - Days::new(policy.days_before);
    let mut flags = vec![false; n_bins];
    for m in &patient.milestones {
        let offset = (m.date - first_day).num_days();
        if offset >= 0 {
            let k = (offset / 7) as usize;
            if k < n_bins {
                flags[k] = true;
            }
        }
    }
    (0..n_bins)
        .map(|k| {
            let s = start + k as i64 * BIN_SECONDS;
            WeekBin {
                window: TimeWindow {
                    start: s,
                    end: s + BIN_SECONDS - 1,
                },
                milestone: flags[k],
            }
        })
        .collect()
}

/// Index-based adjacency view used by the graph algorithms.
///
/// Node indices follow [`NodeRef`] order, so HCPs occupy `0..n_hcp`.
#[derive(Debug, Clone)]
pub struct GraphIndex<'a> {
    pub nodes: Vec<&'a NodeRef>,
    pub index: HashMap<&'a NodeRef, usize>,
    pub n_hcp: usize,
    pub edges: Vec<&'a TemporalEdge>,
    /// Per node: `(neighbor, edge index)` for outgoing edges.
    pub out: Vec<Vec<(usize, usize)>>,
    /// Per node: `(neighbor, edge index)` for incoming edges.
    pub inc: Vec<Vec<(usize, usize)>>,
}

impl<'a> GraphIndex<'a> {
    pub fn new(net: &'a CommNetwork) -> Self {
        let nodes: Vec<&NodeRef> = net.nodes.iter().collect();
        let index: HashMap<&NodeRef, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let n_hcp = nodes.iter().filter(|n| n.is_hcp()).count();
        let edges: Vec<&TemporalEdge> = net.edges.values().collect();
        let mut out = vec![Vec::new(); nodes.len()];
        let mut inc = vec![Vec::new(); nodes.len()];
        for (ei, e) in edges.iter().enumerate() {
            let s = index[&e.src];
            let d = index[&e.dst];
            out[s].push((d, ei));
            inc[d].push((s, ei));
        }
        Self {
            nodes,
            index,
            n_hcp,
            edges,
            out,
            inc,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_note(&self) -> usize {
        self.nodes.len() - self.n_hcp
    }

    pub fn is_hcp(&self, i: usize) -> bool {
        i < self.n_hcp
    }

    /// Hop distances from `src` following edge direction (`reverse` follows
    /// incoming edges instead). `None` marks unreachable nodes.
    pub fn bfs(&self, src: usize, reverse: bool) -> Vec<Option<usize>> {
        let adj = if reverse { &self.inc } else { &self.out };
        let mut dist = vec![None; self.len()];
        dist[src] = Some(0);
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &(v, _) in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Small hand-checkable networks shared by tests and the acceptance suite.
pub mod fixtures {
    use super::*;

    fn ev(h: &str, n: &str, action: Action, t: Timestamp) -> AccessEvent {
        AccessEvent {
            patient_id: "P1".into(),
            hcp_id: h.into(),
            hcp_title: crate::cohort::HcpTitle::MD,
            note_id: n.into(),
            action,
            timestamp: t,
        }
    }

    /// H1 writes N1 @1, H2 reads N1 @2, H2 writes N2 @3, H1 reads N2 @5.
    pub fn g1_events() -> Vec<AccessEvent> {
        vec![
            ev("H1", "N1", Action::Write, 1),
            ev("H2", "N1", Action::Read, 2),
            ev("H2", "N2", Action::Write, 3),
            ev("H1", "N2", Action::Read, 5),
        ]
    }

    pub fn g1() -> CommNetwork {
        build_network(&g1_events()).expect("fixture")
    }

    /// G1 plus the isolated pair H3 writes N3 @4.
    pub fn g3() -> CommNetwork {
        let mut evs = g1_events();
        evs.push(ev("H3", "N3", Action::Write, 4));
        build_network(&evs).expect("fixture")
    }

    /// Two-star on `n1` HCPs and `n2` notes: HCP `i` is joined both ways to
    /// every note, note `j` both ways to every HCP. All accesses at `t`.
    pub fn two_star(n1: usize, n2: usize, t: Timestamp) -> CommNetwork {
        let hcps: Vec<NodeRef> = std::iter::once(NodeRef::hcp("i"))
            .chain((1..n1).map(|k| NodeRef::hcp(format!("a{k}"))))
            .collect();
        let notes: Vec<NodeRef> = std::iter::once(NodeRef::note("j"))
            .chain((1..n2).map(|k| NodeRef::note(format!("c{k}"))))
            .collect();
        let mut edges = Vec::new();
        for n in &notes {
            edges.push((hcps[0].clone(), n.clone(), vec![t]));
            edges.push((n.clone(), hcps[0].clone(), vec![t]));
        }
        for h in &hcps[1..] {
            edges.push((notes[0].clone(), h.clone(), vec![t]));
            edges.push((h.clone(), notes[0].clone(), vec![t]));
        }
        CommNetwork::from_edges("two-star", TimeWindow { start: t, end: t }, edges).expect("fixture")
    }

    /// G2: the two-star with HCPs {i, a, b} and notes {j, c, d}.
    pub fn g2() -> CommNetwork {
        let net = two_star(3, 3, 1);
        let rename = |n: &NodeRef| match n.id.as_str() {
            "a1" => NodeRef::hcp("a"),
            "a2" => NodeRef::hcp("b"),
            "c1" => NodeRef::note("c"),
            "c2" => NodeRef::note("d"),
            _ => n.clone(),
        };
        CommNetwork::from_edges(
            "G2",
            net.window,
            net.edges().map(|e| (rename(&e.src), rename(&e.dst), e.timestamps.clone())),
        )
        .expect("fixture")
    }

    /// Complete bidirectional bipartite graph K_{n1,n2}, all accesses at `t`.
    pub fn complete(n1: usize, n2: usize, t: Timestamp) -> CommNetwork {
        let mut edges = Vec::new();
        for h in 0..n1 {
            for n in 0..n2 {
                let hr = NodeRef::hcp(format!("h{h}"));
                let nr = NodeRef::note(format!("n{n}"));
                edges.push((hr.clone(), nr.clone(), vec![t]));
                edges.push((nr, hr, vec![t]));
            }
        }
        CommNetwork::from_edges("complete", TimeWindow { start: t, end: t }, edges).expect("fixture")
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::cohort::{HcpTitle, Milestone, Outcome, Sex};
    use proptest::prelude::*;

    fn edge_list(net: &CommNetwork) -> Vec<(String, String, Vec<Timestamp>)> {
        net.edges()
            .map(|e| (e.src.to_string(), e.dst.to_string(), e.timestamps.clone()))
            .collect()
    }

    #[test]
    fn g1_structure() {
        let g1 = g1();
        assert_eq!(g1.nodes().len(), 4);
        assert_eq!(g1.edge_count(), 4);
        let mut got = edge_list(&g1);
        got.sort();
        let mut want = vec![
            ("hcp:H1".to_string(), "note:N1".to_string(), vec![1]),
            ("note:N1".into(), "hcp:H2".into(), vec![2]),
            ("hcp:H2".into(), "note:N2".into(), vec![3]),
            ("note:N2".into(), "hcp:H1".into(), vec![5]),
        ];
        want.sort();
        assert_eq!(got, want);
        assert_eq!(g1.window, TimeWindow { start: 1, end: 5 });
    }

    #[test]
    fn repeated_writes_merge_into_one_edge() {
        let mut evs = g1_events();
        evs.truncate(1);
        let mut second = evs[0].clone();
        second.timestamp = 4;
        evs.push(second);
        let net = build_network(&evs).unwrap();
        assert_eq!(net.edge_count(), 1);
        let e = net.edge(&NodeRef::hcp("H1"), &NodeRef::note("N1")).unwrap();
        assert_eq!(e.timestamps, vec![1, 4]);
    }

    #[test]
    fn duplicate_instants_record_multiplicity() {
        let mut evs = g1_events();
        evs.push(evs[0].clone());
        let net = build_network(&evs).unwrap();
        let e = net.edge(&NodeRef::hcp("H1"), &NodeRef::note("N1")).unwrap();
        assert_eq!(e.timestamps, vec![1]);
        assert_eq!(e.multiplicity, vec![2]);
        assert_eq!(net.event_count(), 5);
    }

    #[test]
    fn single_event_network() {
        let net = build_network(&g1_events()[..1]).unwrap();
        assert_eq!(net.nodes().len(), 2);
        assert_eq!(net.edge_count(), 1);
    }

    #[test]
    fn empty_and_mixed_inputs_error() {
        assert!(matches!(build_network(&[]), Err(Error::EmptyNetwork(_))));
        let mut evs = g1_events();
        evs[1].patient_id = "P2".into();
        assert!(build_network(&evs).is_err());
    }

    #[test]
    fn slice_examples() {
        let g1 = g1();
        let s = slice(&g1, 2).unwrap();
        let mut got = edge_list(&s);
        got.sort();
        assert_eq!(
            got,
            vec![
                ("hcp:H1".to_string(), "note:N1".to_string(), vec![1]),
                ("note:N1".into(), "hcp:H2".into(), vec![2]),
            ]
        );
        let nodes: Vec<String> = s.nodes().iter().map(|n| n.to_string()).collect();
        assert_eq!(nodes, vec!["hcp:H1", "hcp:H2", "note:N1"]);
        assert_eq!(s.window.end, 2);
        assert_eq!(slice(&g1, 5).unwrap(), g1);
        assert!(matches!(slice(&g1, 0), Err(Error::EmptyNetwork(_))));
    }

    fn patient_with(milestones: Vec<Milestone>) -> PatientRecord {
        let dx = time::parse_date("2021-04-01").unwrap();
        PatientRecord {
            patient_id: "P1".into(),
            age: 70,
            sex: Sex::Male,
            cancer_type: "Lung".into(),
            stage: "3".into(),
            payer: "Medicare".into(),
            outcome: Outcome::Alive,
            diagnosis_date: dx,
            last_contact_date: dx,
            death_date: None,
            milestones,
        }
    }

    #[test]
    fn weekly_bins_cover_observation_window() {
        let p = patient_with(vec![]);
        let policy = FilterPolicy::default();
        let obs = p.observation_window(&policy);
        let net = CommNetwork::empty("P1", obs);
        let bins = weekly_bins(&net, &p, &policy);
        // 456 inclusive days → floor(455 / 7) + 1 = 66 bins
        assert_eq!(bins.len(), 66);
        assert!(bins.iter().all(|b| !b.milestone));
        assert_eq!(bins[0].window.start, obs.start);
        assert!(bins.last().unwrap().window.end >= obs.end);
        assert!(bins.windows(2).all(|w| w[1].window.start == w[0].window.end + 1));
    }

    #[test]
    fn milestone_on_diagnosis_flags_bin_twelve() {
        let dx = time::parse_date("2021-04-01").unwrap();
        let p = patient_with(vec![Milestone {
            date: dx,
            label: "Diagnosis".into(),
        }]);
        let policy = FilterPolicy::default();
        let net = CommNetwork::empty("P1", p.observation_window(&policy));
        let bins = weekly_bins(&net, &p, &policy);
        let flagged: Vec<usize> = bins.iter().enumerate().filter(|(_, b)| b.milestone).map(|(i, _)| i).collect();
        assert_eq!(flagged, vec![12]);
        assert!(bins[12].window.contains(time::day_start(dx)));
    }

    #[test]
    fn network_json_shape() {
        let v = serde_json::to_value(g1()).unwrap();
        assert_eq!(v["patient_id"], "P1");
        assert_eq!(v["nodes"][0], serde_json::json!({"kind": "hcp", "id": "H1"}));
        assert_eq!(v["edges"][0]["timestamps"][0], "1970-01-01T00:00:01Z");
        assert!(v["edges"][0].get("multiplicity").is_none());
        assert_eq!(v["window"]["end"], "1970-01-01T00:00:05Z");
        let back: CommNetwork = serde_json::from_value(v).unwrap();
        assert_eq!(back, g1());
    }

    #[test]
    fn node_key_parse() {
        let n: NodeRef = "note:N1".parse().unwrap();
        assert_eq!(n, NodeRef::note("N1"));
        assert!("bad".parse::<NodeRef>().is_err());
    }

    fn arb_events() -> impl Strategy<Value = Vec<AccessEvent>> {
        prop::collection::vec((0u8..4, 0u8..4, prop::bool::ANY, 0i64..20), 1..25).prop_map(|v| {
            v.into_iter()
                .map(|(h, n, w, t)| AccessEvent {
                    patient_id: "P".into(),
                    hcp_id: format!("H{h}"),
                    hcp_title: HcpTitle::RN,
                    note_id: format!("N{n}"),
                    action: if w { Action::Write } else { Action::Read },
                    timestamp: t,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn built_networks_are_bipartite_and_conserve_events(evs in arb_events()) {
            let net = build_network(&evs).unwrap();
            prop_assert!(net.edges().all(|e| e.src.kind != e.dst.kind));
            prop_assert_eq!(net.event_count(), evs.len() as u64);
            for e in net.edges() {
                prop_assert!(e.timestamps.windows(2).all(|w| w[0] < w[1]));
            }
        }

        #[test]
        fn slicing_composes(evs in arb_events(), a in 0i64..20, b in 0i64..20) {
            let net = build_network(&evs).unwrap();
            let direct = slice(&net, a.min(b));
            let nested = slice(&net, a).and_then(|s| slice(&s, b));
            match (direct, nested) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
                (Err(_), Err(_)) => {}
                (x, y) => prop_assert!(false, "mismatch: {:?} vs {:?}", x.is_ok(), y.is_ok()),
            }
        }
    }
}
