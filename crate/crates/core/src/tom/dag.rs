use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{ActionKind, Feature, StateKey};

/// Variables of the Theory-of-Mind network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    BombType,
    Distance,
    Time,
    Action,
}

pub const N_NODES: usize = 4;

impl Node {
    pub const ALL: [Node; N_NODES] = [Node::BombType, Node::Distance, Node::Time, Node::Action];
    pub const OBSERVED: [Node; 3] = [Node::BombType, Node::Distance, Node::Time];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Node {
        Node::ALL[i]
    }

    pub fn cardinality(self) -> usize {
        match self {
            Node::Action => 2,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Node::BombType => "bomb_type",
            Node::Distance => "distance",
            Node::Time => "time",
            Node::Action => "action",
        }
    }

    pub fn feature(self) -> Option<Feature> {
        match self {
            Node::BombType => Some(Feature::BombType),
            Node::Distance => Some(Feature::Distance),
            Node::Time => Some(Feature::Time),
            Node::Action => None,
        }
    }

    pub fn from_feature(f: Feature) -> Node {
        match f {
            Feature::BombType => Node::BombType,
            Feature::Distance => Node::Distance,
            Feature::Time => Node::Time,
        }
    }
}

/// One row of network data: ordinals of (bomb_type, distance, time, action).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation(pub [usize; N_NODES]);

impl Observation {
    pub fn new(key: &StateKey, action: ActionKind) -> Observation {
        let [b, d, t] = key.observation();
        Observation([b, d, t, action.index()])
    }

    pub fn get(&self, node: Node) -> usize {
        self.0[node.index()]
    }

    pub fn check(&self) -> Result<()> {
        for node in Node::ALL {
            if self.get(node) >= node.cardinality() {
                return Err(Error::Data(format!(
                    "value {} out of range for {} (cardinality {})",
                    self.get(node),
                    node.name(),
                    node.cardinality()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: Node,
    pub to: Node,
}

/// Directed graph over the four nodes, stored as parent bitmasks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<Edge>", try_from = "Vec<Edge>")]
pub struct Dag {
    parents: [u8; N_NODES],
}

impl Dag {
    pub fn empty() -> Dag {
        Dag::default()
    }

    pub fn from_edges(edges: &[(Node, Node)]) -> Result<Dag> {
        let mut dag = Dag::empty();
        for &(from, to) in edges {
            if from == to {
                return Err(Error::Data(format!("self loop on {}", from.name())));
            }
            dag.parents[to.index()] |= 1 << from.index();
        }
        if !dag.is_acyclic() {
            return Err(Error::Data("edge set contains a cycle".into()));
        }
        Ok(dag)
    }

    pub fn has_edge(&self, from: Node, to: Node) -> bool {
        self.parents[to.index()] & (1 << from.index()) != 0
    }

    pub fn parent_mask(&self, node: Node) -> u8 {
        self.parents[node.index()]
    }

    pub fn parents(&self, node: Node) -> Vec<Node> {
        mask_nodes(self.parents[node.index()])
    }

    /// Observation features the action node depends on.
    pub fn action_parents(&self) -> Vec<Feature> {
        self.parents(Node::Action).into_iter().filter_map(Node::feature).collect()
    }

    pub(crate) fn with_parent_mask(&self, node: Node, mask: u8) -> Dag {
        let mut out = *self;
        out.parents[node.index()] = mask;
        out
    }

    /// Edges in lexicographic `(from, to)` order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for from in Node::ALL {
            for to in Node::ALL {
                if self.has_edge(from, to) {
                    out.push(Edge { from, to });
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(|m| m.count_ones() as usize).sum()
    }

    pub fn is_acyclic(&self) -> bool {
        // Kahn's algorithm on four nodes
        let mut remaining: u8 = (1 << N_NODES) - 1;
        loop {
            let ready = Node::ALL
                .into_iter()
                .find(|n| remaining & (1 << n.index()) != 0 && self.parents[n.index()] & remaining == 0);
            match ready {
                Some(n) => remaining &= !(1 << n.index()),
                None => return remaining == 0,
            }
        }
    }

    /// Compact identity string, e.g. `bomb_type>action;time>action`.
    pub fn signature(&self) -> String {
        self.edges()
            .iter()
            .map(|e| format!("{}>{}", e.from.name(), e.to.name()))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tom {\n");
        for n in Node::ALL {
            out.push_str(&format!("  {};\n", n.name()));
        }
        for e in self.edges() {
            out.push_str(&format!("  {} -> {};\n", e.from.name(), e.to.name()));
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.signature())
    }
}

impl From<Dag> for Vec<Edge> {
    fn from(dag: Dag) -> Self {
        dag.edges()
    }
}

impl TryFrom<Vec<Edge>> for Dag {
    type Error = Error;

    fn try_from(edges: Vec<Edge>) -> Result<Self> {
        Dag::from_edges(&edges.iter().map(|e| (e.from, e.to)).collect::<Vec<_>>())
    }
}

pub(crate) fn mask_nodes(mask: u8) -> Vec<Node> {
    Node::ALL.into_iter().filter(|n| mask & (1 << n.index()) != 0).collect()
}

/// Edges the structure search may never use.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    forbidden: Vec<Edge>,
}

impl Default for ConstraintSet {
    /// Observations are generated by the environment: only observation -> action
    /// edges are admissible.
    fn default() -> Self {
        let mut forbidden = Vec::new();
        for from in Node::ALL {
            for to in Node::ALL {
                if from != to && !(to == Node::Action && from != Node::Action) {
                    forbidden.push(Edge { from, to });
                }
            }
        }
        ConstraintSet { forbidden }
    }
}

impl ConstraintSet {
    /// No forbidden edges: every DAG is admissible.
    pub fn unconstrained() -> Self {
        ConstraintSet { forbidden: Vec::new() }
    }

    pub fn forbid(mut self, from: Node, to: Node) -> Self {
        self.forbidden.push(Edge { from, to });
        self
    }

    pub fn allows(&self, from: Node, to: Node) -> bool {
        from != to && !self.forbidden.contains(&Edge { from, to })
    }

    pub fn admits(&self, dag: &Dag) -> bool {
        dag.is_acyclic() && dag.edges().iter().all(|e| self.allows(e.from, e.to))
    }

    /// Every admissible DAG, in increasing edge-bitmask order.
    pub fn structures(&self) -> Vec<Dag> {
        let pairs: Vec<(Node, Node)> = Node::ALL
            .into_iter()
            .flat_map(|a| Node::ALL.into_iter().map(move |b| (a, b)))
            .filter(|(a, b)| self.allows(*a, *b))
            .collect();
        (0u32..1 << pairs.len())
            .filter_map(|bits| {
                let chosen: Vec<(Node, Node)> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| bits & (1 << i) != 0)
                    .map(|(_, p)| *p)
                    .collect();
                Dag::from_edges(&chosen).ok()
            })
            .collect()
    }
}
