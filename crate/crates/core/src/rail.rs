//! Position-dependent rail resistances along one track of the corridor.
//!
//! The third rail and the running-rail return are both modelled as uniform
//! per-metre resistances. Every electrical element (substation or train) sits at a
//! node; consecutive nodes are joined by one branch whose resistances are the node
//! spacing times the per-metre values. As trains move, the two branches around a
//! train trade resistance one for one, which is the section bookkeeping done by
//! hand for the two-station case.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Positions closer than this are merged into one node, m.
pub const MERGE_DISTANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("train {train} at {position} m is outside the layout extent [{min}, {max}] m (t = {t} s)")]
    Placement { train: usize, position: f64, min: f64, max: f64, t: f64 },
    #[error("invalid layout: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackLayout {
    /// Passenger stations, strictly increasing, m.
    pub station_positions: Vec<f64>,
    /// Substation busbar positions, m.
    pub substation_positions: Vec<f64>,
    /// Third-rail resistance, ohm/m.
    pub r_power_per_m: f64,
    /// Return-rail resistance, ohm/m.
    pub r_traction_per_m: f64,
    /// (min, max) track extent, m.
    pub extent: (f64, f64),
}

impl TrackLayout {
    pub fn validate(&self) -> Result<(), LayoutError> {
        let (lo, hi) = self.extent;
        if !(lo < hi) {
            return Err(LayoutError::Invalid("extent min must be < max".into()));
        }
        if !(self.r_power_per_m > 0.0 && self.r_traction_per_m > 0.0) {
            return Err(LayoutError::Invalid("per-metre resistances must be > 0".into()));
        }
        if self.station_positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LayoutError::Invalid("station positions must be strictly increasing".into()));
        }
        let inside = |x: &f64| (lo..=hi).contains(x);
        if !self.station_positions.iter().all(inside) {
            return Err(LayoutError::Invalid("station outside extent".into()));
        }
        if !self.substation_positions.iter().all(inside) {
            return Err(LayoutError::Invalid("substation outside extent".into()));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.extent.0..=self.extent.1).contains(&x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Substation,
    Train,
    Junction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub position: f64,
    /// Indices into the layout's substation list.
    pub substations: Vec<usize>,
    /// Indices into the train position list the graph was built from.
    pub trains: Vec<usize>,
}

impl Node {
    pub fn kind(&self) -> NodeKind {
        if !self.substations.is_empty() {
            NodeKind::Substation
        } else if !self.trains.is_empty() {
            NodeKind::Train
        } else {
            NodeKind::Junction
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r_power: f64,
    pub r_traction: f64,
}

impl Branch {
    /// Series loop resistance (feed plus return).
    pub fn resistance(&self) -> f64 {
        self.r_power + self.r_traction
    }
}

/// A linear chain: `branches[i]` joins `nodes[i]` and `nodes[i + 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkGraph {
    pub nodes: Vec<Node>,
    pub branches: Vec<Branch>,
}

impl NetworkGraph {
    /// Chain from explicit nodes; positions must be non-decreasing.
    pub fn from_nodes(nodes: Vec<Node>, r_power_per_m: f64, r_traction_per_m: f64) -> Self {
        let branches = nodes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let len = w[1].position - w[0].position;
                Branch { from: i, to: i + 1, r_power: len * r_power_per_m, r_traction: len * r_traction_per_m }
            })
            .collect();
        Self { nodes, branches }
    }

    /// Node holding train `k`, if any.
    pub fn node_of_train(&self, k: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.trains.contains(&k))
    }

    pub fn node_of_substation(&self, s: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.substations.contains(&s))
    }
}

/// Places substations and trains on one track and derives the branch resistances
/// for the current train positions. `t` only labels placement errors.
pub fn build_graph(layout: &TrackLayout, train_positions: &[f64], t: f64) -> Result<NetworkGraph, LayoutError> {
    let (min, max) = layout.extent;
    for (train, &position) in train_positions.iter().enumerate() {
        if !layout.contains(position) || !position.is_finite() {
            return Err(LayoutError::Placement { train, position, min, max, t });
        }
    }

    #[derive(Clone, Copy)]
    enum Element {
        Substation(usize),
        Train(usize),
    }
    let mut elements: Vec<(f64, Element)> = layout
        .substation_positions
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, Element::Substation(i)))
        .chain(train_positions.iter().enumerate().map(|(i, &x)| (x, Element::Train(i))))
        .collect();
    elements.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut nodes: Vec<Node> = Vec::with_capacity(elements.len());
    for (x, e) in elements {
        let merge = nodes.last().is_some_and(|n| (x - n.position).abs() <= MERGE_DISTANCE);
        if !merge {
            nodes.push(Node { position: x, substations: Vec::new(), trains: Vec::new() });
        }
        let node = nodes.last_mut().expect("node pushed above");
        match e {
            Element::Substation(i) => node.substations.push(i),
            Element::Train(i) => node.trains.push(i),
        }
    }
    Ok(NetworkGraph::from_nodes(nodes, layout.r_power_per_m, layout.r_traction_per_m))
}

/// Series feed + return resistance between two nodes of the chain.
pub fn loop_resistance(graph: &NetworkGraph, a: usize, b: usize) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    graph.branches[lo..hi].iter().map(Branch::resistance).sum()
}
