use petgraph::algo::{connected_components, tarjan_scc};
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::network::{CommNetwork, GraphIndex};

use super::MeasureId;

/// Whole-network structural measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkLevel {
    pub hcp_size: usize,
    pub note_size: usize,
    pub components: usize,
    pub density: f64,
    pub hierarchy: usize,
}

impl NetworkLevel {
    pub fn get(&self, m: MeasureId) -> Option<f64> {
        match m {
            MeasureId::HcpSize => Some(self.hcp_size as f64),
            MeasureId::NoteSize => Some(self.note_size as f64),
            MeasureId::Components => Some(self.components as f64),
            MeasureId::Density => Some(self.density),
            MeasureId::Hierarchy => Some(self.hierarchy as f64),
            _ => None,
        }
    }
}

fn digraph(g: &GraphIndex<'_>) -> DiGraph<(), ()> {
    let mut d = DiGraph::with_capacity(g.len(), g.edges.len());
    for _ in 0..g.len() {
        d.add_node(());
    }
    for (s, outs) in g.out.iter().enumerate() {
        for &(t, _) in outs {
            d.add_edge((s as u32).into(), (t as u32).into(), ());
        }
    }
    d
}

/// Number of weakly connected components.
pub fn weak_components(net: &CommNetwork) -> usize {
    let g = GraphIndex::new(net);
    connected_components(&digraph(&g))
}

/// Number of nodes that lie on no directed cycle.
pub fn hierarchy(net: &CommNetwork) -> usize {
    let g = GraphIndex::new(net);
    tarjan_scc(&digraph(&g)).iter().filter(|c| c.len() == 1).count()
}

pub fn network_level(net: &CommNetwork) -> NetworkLevel {
    let n1 = net.hcp_count();
    let n2 = net.note_count();
    let density = if n1 == 0 || n2 == 0 {
        0.0
    } else {
        net.edge_count() as f64 / (2 * n1 * n2) as f64
    };
    NetworkLevel {
        hcp_size: n1,
        note_size: n2,
        components: weak_components(net),
        density,
        hierarchy: hierarchy(net),
    }
}
