//! Compound graphs: one node per placed object, edges between objects that
//! touch or overlap.

use crate::encoder::LatentFeature;
use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::nn::{AdjacencyNorm, Tensor};
use crate::simulator::{CompoundState, Mode, ObjectView, SLOT_X};

pub const SLOTS: usize = SLOT_X.len();
/// Bounding-box inflation used when testing consecutive placements for an edge.
pub const EDGE_INFLATION: f64 = 0.001;

/// What the graph needs to know about one compound member.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub feature: LatentFeature,
    pub slot: usize,
    pub aabb: Aabb,
    pub supports: Vec<usize>,
}

impl NodeInfo {
    pub fn from_view(view: &ObjectView, feature: LatentFeature) -> Self {
        NodeInfo { feature, slot: view.slot, aabb: view.aabb, supports: view.supports.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompoundGraph {
    pub node_features: Tensor,
    pub edges: Vec<(usize, usize)>,
    pub adjacency: AdjacencyNorm,
}

impl CompoundGraph {
    pub fn len(&self) -> usize {
        self.node_features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn slot_one_hot(slot: usize) -> [f64; SLOTS] {
    let mut v = [0.0; SLOTS];
    v[slot.min(SLOTS - 1)] = 1.0;
    v
}

/// Node feature width: the object feature, the member's slot in nonlinear
/// mode, and its depth below the top of the placement order.
pub fn node_dim(mode: Mode) -> usize {
    match mode {
        Mode::Linear => LatentFeature::dim(mode) + 1,
        Mode::Nonlinear => LatentFeature::dim(mode) + SLOTS + 1,
    }
}

/// `depth` counts placements made after this one (0 for the top member).
pub fn node_vector(node: &NodeInfo, mode: Mode, depth: usize) -> Vec<f64> {
    let mut v = node.feature.to_vec();
    if mode == Mode::Nonlinear {
        v.extend(slot_one_hot(node.slot));
    }
    v.push(depth as f64);
    v
}

/// Consecutive placements are linked when their boxes touch; any resting
/// contact adds a link as well. Edges point from the later placement.
pub fn edge_creation(nodes: &[NodeInfo]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 1..nodes.len() {
        let consecutive = nodes[i].aabb.intersects(&nodes[i - 1].aabb, EDGE_INFLATION) || nodes[i].supports.contains(&(i - 1));
        if consecutive {
            edges.push((i, i - 1));
        }
        for &s in &nodes[i].supports {
            if s + 1 < i && !edges.contains(&(i, s)) {
                edges.push((i, s));
            }
        }
    }
    edges
}

pub fn build_graph(nodes: &[NodeInfo], mode: Mode) -> Result<CompoundGraph> {
    if nodes.is_empty() {
        return Err(Error::EmptyCompound);
    }
    let edges = match mode {
        Mode::Linear => (1..nodes.len()).map(|i| (i, i - 1)).collect(),
        Mode::Nonlinear => edge_creation(nodes),
    };
    let f = node_dim(mode);
    let mut data = Vec::with_capacity(nodes.len() * f);
    for (i, n) in nodes.iter().enumerate() {
        let v = node_vector(n, mode, nodes.len() - 1 - i);
        if v.len() != f {
            return Err(Error::ShapeMismatch(format!("node feature has {} values, expected {f}", v.len())));
        }
        data.extend(v);
    }
    let adjacency = AdjacencyNorm::new(nodes.len(), &edges);
    Ok(CompoundGraph { node_features: Tensor::from_vec(nodes.len(), f, data), edges, adjacency })
}

/// Node descriptions for a simulated compound, with features supplied per member.
pub fn nodes_from_compound(compound: &CompoundState, features: &[LatentFeature]) -> Result<Vec<NodeInfo>> {
    if features.len() != compound.len() {
        return Err(Error::ShapeMismatch(format!("{} features for {} placements", features.len(), compound.len())));
    }
    Ok(compound
        .placements
        .iter()
        .zip(features)
        .map(|(p, f)| NodeInfo { feature: *f, slot: p.slot, aabb: p.aabb(), supports: p.supports.clone() })
        .collect())
}
