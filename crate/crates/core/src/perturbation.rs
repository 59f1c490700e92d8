//! Per-node importance of network-level measures by node removal.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{network_level, MeasureId};
use crate::network::{CommNetwork, NodeRef};

/// Removes `node`, its edges, and every neighbor whose edges all connect to
/// `node`.
pub fn perturb(net: &CommNetwork, node: &NodeRef) -> Result<CommNetwork> {
    if !net.contains(node) {
        return Err(Error::UnknownNode(node.to_string()));
    }
    let mut removed = BTreeSet::from([node.clone()]);
    for nb in net.neighbors(node) {
        if net.neighbors(&nb).iter().all(|x| x == node) {
            removed.insert(nb);
        }
    }
    Ok(net.without_nodes(&removed))
}

fn checked(measure: MeasureId) -> Result<()> {
    if measure.is_network_level() {
        Ok(())
    } else {
        Err(Error::NotNetworkLevel(measure.to_string()))
    }
}

fn level_value(net: &CommNetwork, measure: MeasureId) -> f64 {
    network_level(net).get(measure).unwrap_or(0.0)
}

/// `|m(net) − m(perturb(net, node))|` for a network-level measure `m`.
pub fn node_importance(net: &CommNetwork, node: &NodeRef, measure: MeasureId) -> Result<f64> {
    checked(measure)?;
    let after = perturb(net, node)?;
    Ok((level_value(net, measure) - level_value(&after, measure)).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceMap {
    pub measure: MeasureId,
    #[serde(with = "node_keyed")]
    pub values: BTreeMap<NodeRef, f64>,
}

/// Importance of every node of `net` for `measure`.
pub fn importance_map(net: &CommNetwork, measure: MeasureId) -> Result<ImportanceMap> {
    checked(measure)?;
    let base = level_value(net, measure);
    let nodes: Vec<&NodeRef> = net.nodes().iter().collect();
    let values = nodes
        .par_iter()
        .map(|n| {
            let after = perturb(net, n)?;
            Ok(((*n).clone(), (base - level_value(&after, measure)).abs()))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(ImportanceMap { measure, values })
}

mod node_keyed {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::network::NodeRef;

    pub fn serialize<S: Serializer>(m: &BTreeMap<NodeRef, f64>, s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|(k, v)| (k.key(), *v))
            .collect::<BTreeMap<String, f64>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<NodeRef, f64>, D::Error> {
        BTreeMap::<String, f64>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| k.parse().map(|n| (n, v)).map_err(serde::de::Error::custom))
            .collect()
    }
}
