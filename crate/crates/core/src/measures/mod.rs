//! Node-level measures, directed bipartite centralization indices and the
//! per-patient measure vector that forms the metric search space.

mod centralization;
mod node;
mod structure;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{self, CommNetwork, NodeRef, WeekBin};
use crate::temporal::TemporalOrder;
use crate::time::{self, Timestamp};

pub use centralization::{
    betweenness_denominators, centralization, closeness_denominators, closeness_nonstar_value,
    degree_diff_v1, degree_diff_v2, CentralityBase,
};
pub use node::{
    bipartite_betweenness_max, node_betweenness, node_closeness, node_degree, node_distance,
};
pub use structure::{hierarchy, network_level, weak_components, NetworkLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MeasureId {
    AvgDistance,
    InDegreeCent,
    OutDegreeCent,
    BetweennessCent,
    InClosenessCent,
    OutClosenessCent,
    HcpSize,
    NoteSize,
    Components,
    Density,
    Hierarchy,
}

impl MeasureId {
    /// Canonical search-space layout.
    pub const ALL: [MeasureId; 11] = [
        MeasureId::AvgDistance,
        MeasureId::InDegreeCent,
        MeasureId::OutDegreeCent,
        MeasureId::BetweennessCent,
        MeasureId::InClosenessCent,
        MeasureId::OutClosenessCent,
        MeasureId::HcpSize,
        MeasureId::NoteSize,
        MeasureId::Components,
        MeasureId::Density,
        MeasureId::Hierarchy,
    ];

    pub const COUNT: usize = 11;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MeasureId::AvgDistance => "AvgDistance",
            MeasureId::InDegreeCent => "InDegreeCent",
            MeasureId::OutDegreeCent => "OutDegreeCent",
            MeasureId::BetweennessCent => "BetweennessCent",
            MeasureId::InClosenessCent => "InClosenessCent",
            MeasureId::OutClosenessCent => "OutClosenessCent",
            MeasureId::HcpSize => "HcpSize",
            MeasureId::NoteSize => "NoteSize",
            MeasureId::Components => "Components",
            MeasureId::Density => "Density",
            MeasureId::Hierarchy => "Hierarchy",
        }
    }

    /// Size, components, density and hierarchy are defined on the whole
    /// network; the rest aggregate node-level values.
    pub fn is_network_level(self) -> bool {
        matches!(
            self,
            MeasureId::HcpSize
                | MeasureId::NoteSize
                | MeasureId::Components
                | MeasureId::Density
                | MeasureId::Hierarchy
        )
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasureId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown measure `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

/// Per-node betweenness scaling before centralization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetweennessNorm {
    #[default]
    Raw,
    /// Divide by the largest betweenness a node of the same set can reach in
    /// a bipartite graph of the same shape.
    BipartiteMax,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasureConfig {
    #[serde(default)]
    pub order: TemporalOrder,
    #[serde(default)]
    pub betweenness_norm: BetweennessNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeMeasures {
    pub label: &'static str,
    pub direction: Option<Direction>,
    pub values: BTreeMap<NodeRef, f64>,
}

impl NodeMeasures {
    pub fn get(&self, node: &NodeRef) -> Option<f64> {
        self.values.get(node).copied()
    }
}

/// Value of every measure for one patient, in [`MeasureId::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMeasureVector {
    pub patient_id: String,
    pub values: [f64; MeasureId::COUNT],
}

impl NetworkMeasureVector {
    pub fn get(&self, m: MeasureId) -> f64 {
        self.values[m.index()]
    }
}

struct MeasureMap<'a>(&'a [f64; MeasureId::COUNT]);

impl Serialize for MeasureMap<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(MeasureId::COUNT))?;
        for m in MeasureId::ALL {
            map.serialize_entry(m.as_str(), &self.0[m.index()])?;
        }
        map.end()
    }
}

impl Serialize for NetworkMeasureVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("patient_id", &self.patient_id)?;
        map.serialize_entry("measures", &MeasureMap(&self.values))?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for NetworkMeasureVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            patient_id: String,
            measures: BTreeMap<String, f64>,
        }
        let w = Wire::deserialize(d)?;
        let mut values = [0.0; MeasureId::COUNT];
        for m in MeasureId::ALL {
            values[m.index()] = *w
                .measures
                .get(m.as_str())
                .ok_or_else(|| serde::de::Error::custom(format!("missing measure {m}")))?;
        }
        Ok(Self {
            patient_id: w.patient_id,
            values,
        })
    }
}

/// Every measure that is defined on `net`; centralization entries are
/// `None` on degenerate shapes and `AvgDistance` is `None` without HCPs.
pub fn measure_values(net: &CommNetwork, cfg: &MeasureConfig) -> [Option<f64>; MeasureId::COUNT] {
    let mut out = [None; MeasureId::COUNT];
    let dist = node_distance(net);
    if !dist.values.is_empty() {
        let sum: f64 = dist.values.values().sum();
        out[MeasureId::AvgDistance.index()] = Some(sum / dist.values.len() as f64);
    }
    let cent = |base, dir| centralization(net, base, dir, cfg).ok();
    out[MeasureId::InDegreeCent.index()] = cent(CentralityBase::Degree, Direction::In);
    out[MeasureId::OutDegreeCent.index()] = cent(CentralityBase::Degree, Direction::Out);
    out[MeasureId::BetweennessCent.index()] = cent(CentralityBase::Betweenness, Direction::Out);
    out[MeasureId::InClosenessCent.index()] = cent(CentralityBase::Closeness, Direction::In);
    out[MeasureId::OutClosenessCent.index()] = cent(CentralityBase::Closeness, Direction::Out);
    let nl = network_level(net);
    out[MeasureId::HcpSize.index()] = Some(nl.hcp_size as f64);
    out[MeasureId::NoteSize.index()] = Some(nl.note_size as f64);
    out[MeasureId::Components.index()] = Some(nl.components as f64);
    out[MeasureId::Density.index()] = Some(nl.density);
    out[MeasureId::Hierarchy.index()] = Some(nl.hierarchy as f64);
    out
}

/// Single measure on `net`, `None` where undefined.
pub fn measure_value(net: &CommNetwork, m: MeasureId, cfg: &MeasureConfig) -> Option<f64> {
    match m {
        MeasureId::AvgDistance => {
            let dist = node_distance(net);
            (!dist.values.is_empty()).then(|| dist.values.values().sum::<f64>() / dist.values.len() as f64)
        }
        MeasureId::InDegreeCent => centralization(net, CentralityBase::Degree, Direction::In, cfg).ok(),
        MeasureId::OutDegreeCent => centralization(net, CentralityBase::Degree, Direction::Out, cfg).ok(),
        MeasureId::BetweennessCent => {
            centralization(net, CentralityBase::Betweenness, Direction::Out, cfg).ok()
        }
        MeasureId::InClosenessCent => {
            centralization(net, CentralityBase::Closeness, Direction::In, cfg).ok()
        }
        MeasureId::OutClosenessCent => {
            centralization(net, CentralityBase::Closeness, Direction::Out, cfg).ok()
        }
        _ => Some(network_level(net).get(m).expect("network-level measure")),
    }
}

pub fn measure_vector(net: &CommNetwork, cfg: &MeasureConfig) -> Result<NetworkMeasureVector> {
    let n1 = net.hcp_count();
    let n2 = net.note_count();
    if n1 < 2 || n2 < 2 {
        return Err(Error::DegenerateShape { n1, n2 });
    }
    let partial = measure_values(net, cfg);
    let mut values = [0.0; MeasureId::COUNT];
    for m in MeasureId::ALL {
        values[m.index()] = partial[m.index()].ok_or_else(|| Error::MissingMeasure(m.to_string()))?;
    }
    Ok(NetworkMeasureVector {
        patient_id: net.patient_id.clone(),
        values,
    })
}

/// Measure vectors for many networks, computed in parallel; output order
/// follows the input.
pub fn measure_vectors(nets: &[&CommNetwork], cfg: &MeasureConfig) -> Result<Vec<NetworkMeasureVector>> {
    nets.par_iter().map(|n| measure_vector(n, cfg)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPoint {
    #[serde(with = "time::rfc3339")]
    pub start: Timestamp,
    #[serde(with = "time::rfc3339")]
    pub end: Timestamp,
    pub milestone: bool,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSeries {
    pub measure: MeasureId,
    pub bins: Vec<EvolutionPoint>,
}

/// Measures of the growing prefix `slice(net, bin.end)` for every bin.
/// Bins before the first access, and measures undefined on a prefix, are
/// `None`.
pub fn measure_evolution(net: &CommNetwork, bins: &[WeekBin], cfg: &MeasureConfig) -> Vec<MeasureSeries> {
    // consecutive bins without new accesses share one computation
    let prefixes: Vec<Option<(usize, u64)>> = bins
        .iter()
        .map(|b| network::slice(net, b.window.end).ok().map(|s| (s.edge_count(), s.event_count())))
        .collect();
    let mut distinct: Vec<usize> = Vec::new();
    for (k, p) in prefixes.iter().enumerate() {
        if p.is_some() && (k == 0 || prefixes[k - 1] != *p) {
            distinct.push(k);
        }
    }
    let computed: BTreeMap<usize, [Option<f64>; MeasureId::COUNT]> = distinct
        .par_iter()
        .map(|&k| {
            let s = network::slice(net, bins[k].window.end).expect("non-empty prefix");
            (k, measure_values(&s, cfg))
        })
        .collect();
    let mut per_bin: Vec<[Option<f64>; MeasureId::COUNT]> = Vec::with_capacity(bins.len());
    for (k, p) in prefixes.iter().enumerate() {
        let row = match (p, computed.get(&k)) {
            (None, _) => [None; MeasureId::COUNT],
            (Some(_), Some(v)) => *v,
            (Some(_), None) => per_bin[k - 1],
        };
        per_bin.push(row);
    }
    MeasureId::ALL
        .into_iter()
        .map(|m| MeasureSeries {
            measure: m,
            bins: bins
                .iter()
                .zip(&per_bin)
                .map(|(b, row)| EvolutionPoint {
                    start: b.window.start,
                    end: b.window.end,
                    milestone: b.milestone,
                    value: row[m.index()],
                })
                .collect(),
        })
        .collect()
}
