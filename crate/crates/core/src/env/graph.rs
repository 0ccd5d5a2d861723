use serde::{Deserialize, Serialize};

use crate::geometry::{AntennaLayout, Scenario, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeType {
    Antenna,
    User,
    Target,
}

impl NodeType {
    pub fn one_hot(self) -> [f64; 3] {
        match self {
            NodeType::Antenna => [1.0, 0.0, 0.0],
            NodeType::User => [0.0, 1.0, 0.0],
            NodeType::Target => [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    /// antenna <-> user
    Communicates,
    /// antenna <-> target
    Senses,
    /// user <-> target
    Interference,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::Communicates, Relation::Senses, Relation::Interference];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::Communicates => "communicates",
            Relation::Senses => "senses",
            Relation::Interference => "interference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub kind: NodeType,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub relation: Relation,
}

/// Typed, undirected graph over antennas, users and targets. Every edge is
/// stored in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<Edge>,
}

/// Optional per-node scalar context appended to the node features.
#[derive(Debug, Clone, Default)]
pub struct NodeContext {
    /// Last rate of each user (bps/Hz).
    pub user_rates: Vec<f64>,
    /// Last sensing SNR of each target (linear).
    pub target_snrs: Vec<f64>,
}

impl HeteroGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.features.len())
    }

    pub fn edge_count(&self, relation: Relation) -> usize {
        self.edges.iter().filter(|e| e.relation == relation).count()
    }

    /// `(src, dst)` pairs per relation, indexed by [`Relation::index`].
    pub fn pairs_by_relation(&self) -> [Vec<(usize, usize)>; 3] {
        let mut out: [Vec<(usize, usize)>; 3] = Default::default();
        for e in &self.edges {
            out[e.relation.index()].push((e.src, e.dst));
        }
        out
    }

    /// Renumbers nodes so that old node `i` becomes node `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> HeteroGraph {
        assert_eq!(perm.len(), self.nodes.len());
        let mut nodes = self.nodes.clone();
        for (old, node) in self.nodes.iter().enumerate() {
            nodes[perm[old]] = node.clone();
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge { src: perm[e.src], dst: perm[e.dst], relation: e.relation })
            .collect();
        HeteroGraph { nodes, edges }
    }
}

fn node(kind: NodeType, p: Vec3, scale: f64, context: Option<f64>) -> GraphNode {
    let mut features = Vec::with_capacity(7);
    features.extend(kind.one_hot());
    features.extend(p.to_array().map(|c| c / scale));
    features.extend(context);
    GraphNode { kind, features }
}

fn connect(edges: &mut Vec<Edge>, a: usize, b: usize, relation: Relation) {
    edges.push(Edge { src: a, dst: b, relation });
    edges.push(Edge { src: b, dst: a, relation });
}

/// Builds the graph state: nodes are antennas, then users, then targets.
///
/// Node features are the type one-hot followed by the position divided by
/// `position_scale`; with `context` a seventh scalar is appended (user: last
/// rate, target: last SNR in dB / 10, antenna: 0).
pub fn build_graph(
    scenario: &Scenario,
    layout: &AntennaLayout,
    position_scale: f64,
    context: Option<&NodeContext>,
) -> HeteroGraph {
    let m = layout.len();
    let k = scenario.num_users();
    let l = scenario.num_targets();
    let ctx = |v: Option<f64>| context.map(|_| v.unwrap_or(0.0));

    let mut nodes = Vec::with_capacity(m + k + l);
    nodes.extend(layout.positions().iter().map(|p| node(NodeType::Antenna, *p, position_scale, ctx(None))));
    nodes.extend(scenario.users.iter().enumerate().map(|(i, p)| {
        let rate = context.and_then(|c| c.user_rates.get(i).copied());
        node(NodeType::User, *p, position_scale, ctx(rate))
    }));
    nodes.extend(scenario.targets.iter().enumerate().map(|(i, p)| {
        let snr = context
            .and_then(|c| c.target_snrs.get(i).copied())
            .map(|g| if g > 0.0 { g.log10() } else { 0.0 });
        node(NodeType::Target, *p, position_scale, ctx(snr))
    }));

    let mut edges = Vec::with_capacity(2 * (m * k + m * l + k * l));
    for a in 0..m {
        for u in 0..k {
            connect(&mut edges, a, m + u, Relation::Communicates);
        }
    }
    for a in 0..m {
        for t in 0..l {
            connect(&mut edges, a, m + k + t, Relation::Senses);
        }
    }
    for u in 0..k {
        for t in 0..l {
            connect(&mut edges, m + u, m + k + t, Relation::Interference);
        }
    }
    HeteroGraph { nodes, edges }
}
