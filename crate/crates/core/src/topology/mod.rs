//! Inter-datacenter network graph: nodes, fiber links, datacenter sites and
//! the path computations built on top of them.
//!
//! A [`Topology`] is immutable once validated. Links are undirected and
//! identified by their index ([`LinkId`]) in the topology's link list, which
//! is also the index used by the spectrum grid.

mod ksp;
mod modulation;
mod presets;

pub use ksp::{k_shortest_paths, shortest_path};
pub use modulation::{modulation_level, ModulationStep, ModulationTable};
pub use presets::{preset, PRESET_NAMES};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a network node. Datacenters are addressed by the node they
/// are attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a link inside [`Topology::links`].
pub type LinkId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("topology has no nodes")]
    Empty,
    #[error("node {0} listed twice")]
    DuplicateNode(NodeId),
    #[error("link {a}-{b} references unknown node {node}")]
    UnknownNode { a: NodeId, b: NodeId, node: NodeId },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate link {0}-{1}")]
    DuplicateLink(NodeId, NodeId),
    #[error("link {a}-{b} has invalid length {length_km} km")]
    BadLength { a: NodeId, b: NodeId, length_km: f64 },
    #[error("slot capacity must be positive")]
    ZeroCapacity,
    #[error("datacenter node {0} is not a topology node")]
    UnknownDatacenter(NodeId),
    #[error("graph is disconnected: node {unreachable} cannot be reached from {from}")]
    Disconnected { from: NodeId, unreachable: NodeId },
    #[error("invalid modulation table: {0}")]
    Modulation(String),
    #[error("unknown topology preset `{0}`")]
    UnknownPreset(String),
    #[error("cannot read topology file: {0}")]
    Io(String),
    #[error("cannot parse topology description: {0}")]
    Parse(String),
}

/// Undirected fiber link. Endpoints are stored with `a < b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub length_km: f64,
}

impl Link {
    /// The endpoint opposite to `node`, if `node` is an endpoint.
    pub fn other(&self, node: NodeId) -> Option<NodeId> {
        if node == self.a {
            Some(self.b)
        } else if node == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

/// Structured topology description as read from a preset or a TOML file.
///
/// ```toml
/// nodes = [1, 2]
/// links = [[1, 2, 1200.0]]
/// slot_capacity = 300
/// dc_nodes = [1, 2]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    #[serde(default)]
    pub name: Option<String>,
    pub nodes: Vec<u32>,
    /// `(u, v, length_km)` triples.
    pub links: Vec<(u32, u32, f64)>,
    pub slot_capacity: usize,
    pub dc_nodes: Vec<u32>,
}

impl TopologySpec {
    pub fn from_toml_str(text: &str) -> Result<Self, TopologyError> {
        toml::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct Topology {
    name: String,
    nodes: Vec<NodeId>,
    links: Vec<Link>,
    dc_nodes: Vec<NodeId>,
    slot_capacity: usize,
    adjacency: BTreeMap<NodeId, Vec<(NodeId, LinkId)>>,
    link_lookup: BTreeMap<(NodeId, NodeId), LinkId>,
}

impl Topology {
    /// Validates a description and builds the graph. Rejects duplicate
    /// links, self-loops, unknown node references and disconnected graphs.
    pub fn from_spec(spec: &TopologySpec) -> Result<Self, TopologyError> {
        if spec.nodes.is_empty() {
            return Err(TopologyError::Empty);
        }
        if spec.slot_capacity == 0 {
            return Err(TopologyError::ZeroCapacity);
        }
        let mut node_set = BTreeSet::new();
        for &n in &spec.nodes {
            if !node_set.insert(NodeId(n)) {
                return Err(TopologyError::DuplicateNode(NodeId(n)));
            }
        }
        let nodes: Vec<NodeId> = node_set.iter().copied().collect();

        let mut links = Vec::with_capacity(spec.links.len());
        let mut link_lookup = BTreeMap::new();
        let mut adjacency: BTreeMap<NodeId, Vec<(NodeId, LinkId)>> =
            nodes.iter().map(|&n| (n, Vec::new())).collect();
        for &(u, v, length_km) in &spec.links {
            let (u, v) = (NodeId(u), NodeId(v));
            for n in [u, v] {
                if !node_set.contains(&n) {
                    return Err(TopologyError::UnknownNode { a: u, b: v, node: n });
                }
            }
            if u == v {
                return Err(TopologyError::SelfLoop(u));
            }
            if !(length_km.is_finite() && length_km > 0.0) {
                return Err(TopologyError::BadLength { a: u, b: v, length_km });
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            if link_lookup.contains_key(&(a, b)) {
                return Err(TopologyError::DuplicateLink(a, b));
            }
            let id = links.len();
            links.push(Link { a, b, length_km });
            link_lookup.insert((a, b), id);
            adjacency.get_mut(&a).unwrap().push((b, id));
            adjacency.get_mut(&b).unwrap().push((a, id));
        }
        for list in adjacency.values_mut() {
            list.sort();
        }

        let mut dc_nodes = Vec::with_capacity(spec.dc_nodes.len());
        let mut seen = BTreeSet::new();
        for &d in &spec.dc_nodes {
            let d = NodeId(d);
            if !node_set.contains(&d) {
                return Err(TopologyError::UnknownDatacenter(d));
            }
            if seen.insert(d) {
                dc_nodes.push(d);
            }
        }
        dc_nodes.sort();

        let topo = Topology {
            name: spec.name.clone().unwrap_or_else(|| "custom".to_string()),
            nodes,
            links,
            dc_nodes,
            slot_capacity: spec.slot_capacity,
            adjacency,
            link_lookup,
        };
        topo.check_connected()?;
        Ok(topo)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, TopologyError> {
        Self::from_spec(&TopologySpec::from_toml_str(text)?)
    }

    pub fn from_file(path: impl AsRef<FsPath>) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| TopologyError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    /// Resolves either an embedded preset name or a path to a TOML file.
    pub fn resolve(name_or_path: &str) -> Result<Self, TopologyError> {
        match preset(name_or_path) {
            Ok(t) => Ok(t),
            Err(TopologyError::UnknownPreset(_)) if FsPath::new(name_or_path).exists() => {
                Self::from_file(name_or_path)
            }
            Err(e) => Err(e),
        }
    }

    fn check_connected(&self) -> Result<(), TopologyError> {
        let start = self.nodes[0];
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for &(m, _) in &self.adjacency[&n] {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        match self.nodes.iter().find(|n| !seen.contains(n)) {
            Some(&unreachable) => Err(TopologyError::Disconnected { from: start, unreachable }),
            None => Ok(()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    pub fn dc_nodes(&self) -> &[NodeId] {
        &self.dc_nodes
    }

    /// Spectrum slots per link (`c_e`), uniform over the topology.
    pub fn slot_capacity(&self) -> usize {
        self.slot_capacity
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.adjacency.contains_key(&node)
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency.get(&node).map_or(0, Vec::len)
    }

    /// Neighbours of `node` with the connecting link, sorted by neighbour id.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, LinkId)] {
        self.adjacency.get(&node).map_or(&[], Vec::as_slice)
    }

    pub fn link_between(&self, u: NodeId, v: NodeId) -> Option<LinkId> {
        let key = if u < v { (u, v) } else { (v, u) };
        self.link_lookup.get(&key).copied()
    }

    /// Returns a copy with a different per-link slot capacity.
    pub fn with_slot_capacity(&self, slot_capacity: usize) -> Result<Self, TopologyError> {
        if slot_capacity == 0 {
            return Err(TopologyError::ZeroCapacity);
        }
        let mut t = self.clone();
        t.slot_capacity = slot_capacity;
        Ok(t)
    }

    pub fn to_spec(&self) -> TopologySpec {
        TopologySpec {
            name: Some(self.name.clone()),
            nodes: self.nodes.iter().map(|n| n.0).collect(),
            links: self.links.iter().map(|l| (l.a.0, l.b.0, l.length_km)).collect(),
            slot_capacity: self.slot_capacity,
            dc_nodes: self.dc_nodes.iter().map(|n| n.0).collect(),
        }
    }
}

/// Convenience wrapper matching the other constructors.
pub fn load_topology(spec: &TopologySpec) -> Result<Topology, TopologyError> {
    Topology::from_spec(spec)
}

/// A simple path through the topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    nodes: Vec<NodeId>,
    links: Vec<LinkId>,
    length_km: f64,
}

impl Path {
    /// Builds a path from a node sequence. Returns `None` if consecutive
    /// nodes are not adjacent, a node repeats, or fewer than two nodes are
    /// given.
    pub fn from_nodes(topo: &Topology, nodes: &[NodeId]) -> Option<Path> {
        if nodes.len() < 2 {
            return None;
        }
        let mut seen = BTreeSet::new();
        if !nodes.iter().all(|n| seen.insert(*n)) {
            return None;
        }
        let links = nodes
            .windows(2)
            .map(|w| topo.link_between(w[0], w[1]))
            .collect::<Option<Vec<_>>>()?;
        let length_km = links.iter().map(|&l| topo.link(l).length_km).sum();
        Some(Path { nodes: nodes.to_vec(), links, length_km })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    /// Hop count `H(p)`.
    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn target(&self) -> NodeId {
        *self.nodes.last().unwrap()
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.nodes.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("-"))
    }
}

/// True iff the two paths have at least one link in common.
pub fn paths_share_link(p1: &Path, p2: &Path) -> bool {
    p1.links.iter().any(|l| p2.links.contains(l))
}
