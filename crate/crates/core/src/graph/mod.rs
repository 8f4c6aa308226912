//! Process graphs encoded in the DOT dialect used for BPMN models.
//!
//! A diagram is a `digraph` whose nodes are BPMN flow elements. Events are
//! small circles, activities are boxes and gateways are diamonds labelled
//! `+` (parallel) or `X` (exclusive):
//!
//! ```text
//! digraph process {
//! graph [rankdir=LR]
//! START_NODE [label="" shape=circle width=0.3]
//! "Gather Requirements" [shape=box width=0.6]
//! "AND_SPLIT" [label="+" fixedsize=true shape=diamond width=0.5]
//! START_NODE -> "Gather Requirements"
//! "Gather Requirements" -> "AND_SPLIT"
//! }
//! ```

mod parse;
mod render;
mod sanitize;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_dot, parse_dot_with_warnings, ClassificationWarning, ParseError};
pub use render::render_canonical;
pub use sanitize::sanitize_dot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GatewayType {
    And,
    Xor,
}

impl GatewayType {
    /// Label written for this gateway type when a node carries none.
    pub fn symbol(self) -> &'static str {
        match self {
            GatewayType::And => "+",
            GatewayType::Xor => "X",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GatewayRole {
    Split,
    Join,
    /// At most one incoming and at most one outgoing flow.
    Degenerate,
}

impl GatewayRole {
    /// Role implied by a gateway's degrees. A node that both splits and joins
    /// is reported as a split.
    pub fn from_degrees(in_degree: usize, out_degree: usize) -> Self {
        if out_degree > 1 {
            GatewayRole::Split
        } else if in_degree > 1 {
            GatewayRole::Join
        } else {
            GatewayRole::Degenerate
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    StartEvent,
    EndEvent,
    Activity,
    Gateway { gateway: GatewayType, role: GatewayRole },
}

impl NodeKind {
    pub fn is_gateway(&self) -> bool {
        matches!(self, NodeKind::Gateway { .. })
    }

    pub fn is_event(&self) -> bool {
        matches!(self, NodeKind::StartEvent | NodeKind::EndEvent)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::StartEvent => f.write_str("start event"),
            NodeKind::EndEvent => f.write_str("end event"),
            NodeKind::Activity => f.write_str("activity"),
            NodeKind::Gateway { gateway, role } => write!(f, "{gateway:?} {role:?} gateway"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub kind: NodeKind,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub label: Option<String>,
}

/// A typed directed graph of BPMN elements.
///
/// Nodes and edges keep the order in which they first appeared in the source
/// text; equality is element-wise.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<Edge>,
    /// Declared `rankdir`. Conflicting declarations are kept joined with `;`.
    pub orientation: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub gateway_count: usize,
}

pub fn graph_stats(g: &ProcessGraph) -> GraphStats {
    GraphStats {
        node_count: g.nodes.len(),
        edge_count: g.edges.len(),
        gateway_count: g.nodes.iter().filter(|n| n.kind.is_gateway()).count(),
    }
}

impl ProcessGraph {
    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// `(in_degree, out_degree)` per node, indexed like `nodes`.
    pub fn degrees(&self) -> Vec<(usize, usize)> {
        let index: HashMap<&str, usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        let mut deg = vec![(0, 0); self.nodes.len()];
        for e in &self.edges {
            if let Some(&s) = index.get(e.source.as_str()) {
                deg[s].1 += 1;
            }
            if let Some(&t) = index.get(e.target.as_str()) {
                deg[t].0 += 1;
            }
        }
        deg
    }

    /// True when every node can reach every other ignoring edge direction.
    /// The empty graph is not connected.
    pub fn is_weakly_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let index: HashMap<&str, usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let (Some(&a), Some(&b)) = (index.get(e.source.as_str()), index.get(e.target.as_str()))
            else {
                continue;
            };
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        let root = find(&mut parent, 0);
        (1..self.nodes.len()).all(|i| find(&mut parent, i) == root)
    }

    /// Checks the structural invariants: unique node ids, edge endpoints
    /// exist, and every gateway's stored role matches its degrees.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = HashMap::new();
        for n in &self.nodes {
            if seen.insert(n.id.as_str(), ()).is_some() {
                return Err(format!("duplicate node id {:?}", n.id));
            }
        }
        for e in &self.edges {
            for end in [&e.source, &e.target] {
                if !seen.contains_key(end.as_str()) {
                    return Err(format!("edge endpoint {end:?} is not a node"));
                }
            }
        }
        for (n, (i, o)) in self.nodes.iter().zip(self.degrees()) {
            if let NodeKind::Gateway { role, .. } = n.kind {
                if role != GatewayRole::from_degrees(i, o) {
                    return Err(format!("gateway {:?} has role {role:?} but degrees ({i}, {o})", n.id));
                }
            }
        }
        Ok(())
    }

    /// Recomputes gateway roles from the current edge set.
    pub fn refresh_gateway_roles(&mut self) {
        let degrees = self.degrees();
        for (n, (i, o)) in self.nodes.iter_mut().zip(degrees) {
            if let NodeKind::Gateway { role, .. } = &mut n.kind {
                *role = GatewayRole::from_degrees(i, o);
            }
        }
    }
}
