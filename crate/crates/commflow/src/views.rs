//! Wire shapes served by the API and printed by the command line, each a
//! pure function of the workspace and the request parameters.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use commflow_core::cohort::{CohortCriteria, Outcome};
use commflow_core::measures::{
    measure_evolution, measure_value, measure_values, node_betweenness, node_closeness, node_degree,
    node_distance, Direction, EvolutionPoint, NodeMeasures,
};
use commflow_core::metric::{extended_real, quantile_sorted, MetricModel};
use commflow_core::network::{slice, weekly_bins};
use commflow_core::perturbation::importance_map;
use commflow_core::temporal::{build_reachable_subnetwork, FlowDirection, FlowOptions, ReachableSubnetwork};
use commflow_core::time::{self, parse_instant_lenient, Timestamp};
use commflow_core::{CommNetwork, MeasureId, NodeKind, NodeRef};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::AppError;
use crate::workspace::{Workspace, ALL_GROUP};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group_id: String,
    pub criteria: CohortCriteria,
    pub size: usize,
    pub alive: usize,
    pub dead: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwarmPoint {
    pub patient_id: String,
    pub score: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Swarm {
    pub group_id: String,
    #[serde(with = "extended_real")]
    pub threshold: f64,
    pub points: Vec<SwarmPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatientMeasures {
    pub patient_id: String,
    pub outcome: Outcome,
    pub measures: BTreeMap<MeasureId, Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub n: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quartiles {
    /// Type-7 quartiles of `values`; `None` when empty.
    pub fn of(mut values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        Some(Self {
            n: values.len(),
            min: values[0],
            q25: quantile_sorted(&values, 0.25),
            median: quantile_sorted(&values, 0.5),
            q75: quantile_sorted(&values, 0.75),
            max: values[values.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Boxplot {
    pub patient_id: String,
    pub group_id: String,
    pub measure: MeasureId,
    pub outcome: Outcome,
    pub value: Option<f64>,
    pub alive: Option<Quartiles>,
    pub dead: Option<Quartiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evolution {
    pub patient_id: String,
    pub measure: MeasureId,
    pub bins: Vec<EvolutionPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    /// Node-level value underlying the measure.
    Node,
    /// Perturbation importance for a network-level measure.
    Importance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphNode {
    pub key: String,
    pub kind: NodeKind,
    pub id: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphEdge {
    pub src: String,
    pub dst: String,
    #[serde(with = "time::rfc3339::vec")]
    pub timestamps: Vec<Timestamp>,
    pub multiplicity: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphView {
    pub patient_id: String,
    #[serde(with = "time::rfc3339")]
    pub until: Timestamp,
    pub measure: Option<MeasureId>,
    pub value_kind: Option<ValueKind>,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachView {
    pub patient_id: String,
    #[serde(with = "time::rfc3339")]
    pub until: Timestamp,
    #[serde(flatten)]
    pub subnetwork: ReachableSubnetwork,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct BoxplotQuery {
    pub measure: Option<String>,
    pub group: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct EvolutionQuery {
    pub measure: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct GraphQuery {
    pub until: Option<String>,
    pub measure: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ReachQuery {
    pub ego: Option<String>,
    pub direction: Option<String>,
    pub until: Option<String>,
    pub order: Option<String>,
    pub mode: Option<String>,
    pub max_depth: Option<String>,
    pub max_paths: Option<String>,
}

fn parse_with<T: FromStr>(field: &str, raw: &str) -> Result<T, AppError>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| AppError::bad(field, e))
}

fn parse_snake<T: DeserializeOwned>(field: &str, raw: &str) -> Result<T, AppError> {
    serde_json::from_value(serde_json::Value::String(raw.to_string()))
        .map_err(|_| AppError::bad(field, format!("unrecognized value `{raw}`")))
}

pub fn parse_measure(raw: Option<&str>) -> Result<MeasureId, AppError> {
    parse_with("measure", raw.ok_or_else(|| AppError::missing("measure"))?)
}

/// Cutoff instant, defaulting to the end of the network's window.
pub fn parse_until(net: &CommNetwork, raw: Option<&str>) -> Result<Timestamp, AppError> {
    match raw {
        None => Ok(net.window.end),
        Some(s) => parse_instant_lenient(s).map_err(|e| AppError::bad("until", e)),
    }
}

/// `hcp:<id>`/`note:<id>`, or a bare id when it names exactly one node.
pub fn parse_ego(net: &CommNetwork, raw: &str) -> Result<NodeRef, AppError> {
    if raw.contains(':') {
        let n: NodeRef = parse_with("ego", raw)?;
        return if net.contains(&n) {
            Ok(n)
        } else {
            Err(AppError::NotFound {
                what: "node",
                id: n.to_string(),
            })
        };
    }
    let found: Vec<NodeRef> = [NodeRef::hcp(raw), NodeRef::note(raw)]
        .into_iter()
        .filter(|n| net.contains(n))
        .collect();
    match found.len() {
        0 => Err(AppError::NotFound {
            what: "node",
            id: raw.to_string(),
        }),
        1 => Ok(found.into_iter().next().unwrap()),
        _ => Err(AppError::bad("ego", format!("`{raw}` names both an HCP and a note; prefix hcp: or note:"))),
    }
}

pub fn groups(ws: &Workspace) -> Vec<GroupSummary> {
    ws.groups()
        .map(|g| {
            let alive = g
                .member_ids
                .iter()
                .filter(|id| ws.patient(id).is_ok_and(|p| p.outcome == Outcome::Alive))
                .count();
            GroupSummary {
                group_id: g.group_id.clone(),
                criteria: g.criteria.clone(),
                size: g.member_ids.len(),
                alive,
                dead: g.member_ids.len() - alive,
            }
        })
        .collect()
}

pub fn metric(ws: &Workspace, group: &str) -> Result<Arc<MetricModel>, AppError> {
    ws.metric(group, None)
}

/// Metric scores in ascending order (ties by patient id) with the cut-off.
pub fn swarm(ws: &Workspace, group: &str) -> Result<Swarm, AppError> {
    let m = ws.metric(group, None)?;
    let mut points: Vec<SwarmPoint> = m
        .patients
        .iter()
        .map(|p| SwarmPoint {
            patient_id: p.patient_id.clone(),
            score: p.score,
            outcome: p.outcome,
        })
        .collect();
    points.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.patient_id.cmp(&b.patient_id)));
    Ok(Swarm {
        group_id: group.to_string(),
        threshold: m.threshold,
        points,
    })
}

pub fn patient_measures(ws: &Workspace, patient: &str) -> Result<PatientMeasures, AppError> {
    let p = ws.patient(patient)?;
    let net = ws.network(patient)?;
    let values = measure_values(net, &ws.settings().measures);
    Ok(PatientMeasures {
        patient_id: p.patient_id.clone(),
        outcome: p.outcome,
        measures: MeasureId::ALL.into_iter().map(|m| (m, values[m.index()])).collect(),
    })
}

/// Measure rows of every group member with a network, in id order.
pub fn measure_table(ws: &Workspace, group: &str) -> Result<Vec<PatientMeasures>, AppError> {
    let g = ws.group(group)?;
    let ids: Vec<&String> = g.member_ids.iter().filter(|id| ws.network(id).is_ok()).collect();
    ids.par_iter().map(|id| patient_measures(ws, id)).collect()
}

pub fn boxplot(ws: &Workspace, patient: &str, q: &BoxplotQuery) -> Result<Boxplot, AppError> {
    let measure = parse_measure(q.measure.as_deref())?;
    let group_id = q.group.as_deref().unwrap_or(ALL_GROUP);
    let g = ws.group(group_id)?;
    let p = ws.patient(patient)?;
    let cfg = ws.settings().measures;
    let value = ws.network(patient).ok().and_then(|n| measure_value(n, measure, &cfg));
    let rows: Vec<(Outcome, f64)> = g
        .member_ids
        .par_iter()
        .filter_map(|id| {
            let v = measure_value(ws.network(id).ok()?, measure, &cfg)?;
            Some((ws.patient(id).ok()?.outcome, v))
        })
        .collect();
    let class = |o: Outcome| Quartiles::of(rows.iter().filter(|r| r.0 == o).map(|r| r.1).collect());
    Ok(Boxplot {
        patient_id: p.patient_id.clone(),
        group_id: group_id.to_string(),
        measure,
        outcome: p.outcome,
        value,
        alive: class(Outcome::Alive),
        dead: class(Outcome::Dead),
    })
}

pub fn evolution(ws: &Workspace, patient: &str, q: &EvolutionQuery) -> Result<Evolution, AppError> {
    let measure = parse_measure(q.measure.as_deref())?;
    let p = ws.patient(patient)?;
    let net = ws.network(patient)?;
    let bins = weekly_bins(net, p, &ws.settings().policy);
    let series = measure_evolution(net, &bins, &ws.settings().measures)
        .into_iter()
        .find(|s| s.measure == measure)
        .expect("every measure has a series");
    Ok(Evolution {
        patient_id: p.patient_id.clone(),
        measure,
        bins: series.bins,
    })
}

fn node_values(net: &CommNetwork, m: MeasureId, ws: &Workspace) -> NodeMeasures {
    let cfg = ws.settings().measures;
    match m {
        MeasureId::AvgDistance => node_distance(net),
        MeasureId::InDegreeCent => node_degree(net, Direction::In),
        MeasureId::OutDegreeCent => node_degree(net, Direction::Out),
        MeasureId::BetweennessCent => node_betweenness(net, cfg.order, cfg.betweenness_norm),
        MeasureId::InClosenessCent => node_closeness(net, Direction::In),
        MeasureId::OutClosenessCent => node_closeness(net, Direction::Out),
        _ => unreachable!("network-level measures use importance"),
    }
}

/// Prefix network up to `until` with per-node values of the selected
/// measure: node-level values for aggregated measures, perturbation
/// importance for network-level ones.
pub fn graph(ws: &Workspace, patient: &str, q: &GraphQuery) -> Result<GraphView, AppError> {
    let net = ws.network(patient)?;
    let until = parse_until(net, q.until.as_deref())?;
    let measure = q.measure.as_deref().map(|s| parse_with::<MeasureId>("measure", s)).transpose()?;
    let prefix = slice(net, until).map_err(|e| AppError::from_core(e, "until"))?;
    let (kind, values): (Option<ValueKind>, BTreeMap<NodeRef, f64>) = match measure {
        None => (None, BTreeMap::new()),
        Some(m) if m.is_network_level() => (Some(ValueKind::Importance), importance_map(&prefix, m)?.values),
        Some(m) => (Some(ValueKind::Node), node_values(&prefix, m, ws).values),
    };
    Ok(GraphView {
        patient_id: net.patient_id.clone(),
        until,
        measure,
        value_kind: kind,
        nodes: prefix
            .nodes()
            .iter()
            .map(|n| GraphNode {
                key: n.key(),
                kind: n.kind,
                id: n.id.clone(),
                value: values.get(n).copied(),
            })
            .collect(),
        edges: prefix
            .edges()
            .map(|e| GraphEdge {
                src: e.src.key(),
                dst: e.dst.key(),
                timestamps: e.timestamps.clone(),
                multiplicity: e.multiplicity.clone(),
            })
            .collect(),
    })
}

pub fn reach(ws: &Workspace, patient: &str, q: &ReachQuery, cancel: Option<&AtomicBool>) -> Result<ReachView, AppError> {
    let net = ws.network(patient)?;
    let direction: FlowDirection = parse_with("direction", q.direction.as_deref().ok_or_else(|| AppError::missing("direction"))?)?;
    let until = parse_until(net, q.until.as_deref())?;
    let ego = parse_ego(net, q.ego.as_deref().ok_or_else(|| AppError::missing("ego"))?)?;
    let mut opts: FlowOptions = ws.settings().flow;
    if let Some(s) = &q.order {
        opts.order = parse_snake("order", s)?;
    }
    if let Some(s) = &q.mode {
        opts.mode = parse_snake("mode", s)?;
    }
    if let Some(s) = &q.max_depth {
        opts.caps.max_depth = parse_with("max_depth", s)?;
    }
    if let Some(s) = &q.max_paths {
        opts.caps.max_paths = parse_with("max_paths", s)?;
    }
    let subnetwork = build_reachable_subnetwork(net, &ego, direction, until, &opts, cancel)
        .map_err(|e| AppError::from_core(e, "ego"))?;
    Ok(ReachView {
        patient_id: net.patient_id.clone(),
        until,
        subnetwork,
    })
}

/// Deterministic pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("wire types serialize");
    s.push('\n');
    s
}
