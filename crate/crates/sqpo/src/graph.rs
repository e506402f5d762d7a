//! Simple directed graphs with attributed nodes and edges.
//!
//! A [`Graph`] keeps at most one edge per ordered node pair; both nodes and
//! edges carry an [`AttrSet`]. The node and edge maps are ordered, so two
//! graphs are equal exactly when they have the same node ids, the same edges
//! and the same attributes — equality is strict, not up-to-isomorphism.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::attr::AttrSet;
use crate::error::{Error, Result};

/// Identifier of a node inside one graph. Non-empty; must not contain `|`,
/// which is reserved as the edge-key separator of the file format.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

pub type EdgeKey = (NodeId, NodeId);

/// One invariant violation found by [`Graph::violations`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyNodeId,
    ReservedSeparator { node: NodeId },
    DanglingEndpoint { edge: EdgeKey, missing: NodeId },
    EmptyValueSet { owner: String, key: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyNodeId => write!(f, "empty node id"),
            Violation::ReservedSeparator { node } => {
                write!(f, "node id {node:?} contains the reserved separator '|'")
            }
            Violation::DanglingEndpoint { edge, missing } => {
                write!(f, "edge ({}, {}) references undeclared node {}", edge.0, edge.1, missing)
            }
            Violation::EmptyValueSet { owner, key } => {
                write!(f, "empty value set at {owner}.{key}")
            }
        }
    }
}

/// A simple directed graph with attributes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    nodes: BTreeMap<NodeId, AttrSet>,
    edges: BTreeMap<EdgeKey, AttrSet>,
}

/// Canonical document shape: `{"nodes": {...}, "edges": {"src|tgt": {...}}}`.
#[derive(Serialize, Deserialize)]
struct GraphDoc {
    nodes: BTreeMap<String, AttrSet>,
    edges: BTreeMap<String, AttrSet>,
}

impl Serialize for Graph {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = GraphDoc {
            nodes: self.nodes.iter().map(|(id, a)| (id.to_string(), a.clone())).collect(),
            edges: self
                .edges
                .iter()
                .map(|((a, b), attrs)| (format!("{a}|{b}"), attrs.clone()))
                .collect(),
        };
        doc.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = GraphDoc::deserialize(deserializer)?;
        Graph::from_doc(doc).map_err(|e| D::Error::custom(e.to_string()))
    }
}

impl Graph {
    fn from_doc(doc: GraphDoc) -> Result<Self> {
        let mut nodes = BTreeMap::new();
        for (id, mut attrs) in doc.nodes {
            if id.is_empty() {
                return Err(Error::SchemaError("nodes: empty node id".into()));
            }
            if id.contains('|') {
                return Err(Error::SchemaError(format!(
                    "nodes.{id}: id contains the reserved separator '|'"
                )));
            }
            attrs.normalize();
            nodes.insert(NodeId::from(id), attrs);
        }
        let mut edges = BTreeMap::new();
        for (key, mut attrs) in doc.edges {
            let Some((a, b)) = key.split_once('|') else {
                return Err(Error::SchemaError(format!(
                    "edges.{key}: key is not of the form \"src|tgt\""
                )));
            };
            let (a, b) = (NodeId::from(a), NodeId::from(b));
            for end in [&a, &b] {
                if !nodes.contains_key(end) {
                    return Err(Error::SchemaError(format!(
                        "edges.{key}: endpoint {end} is not a declared node"
                    )));
                }
            }
            attrs.normalize();
            edges.insert((a, b), attrs);
        }
        Ok(Graph { nodes, edges })
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Convenience constructor from node and edge lists.
    pub fn build<N, E>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = (NodeId, AttrSet)>,
        E: IntoIterator<Item = (NodeId, NodeId, AttrSet)>,
    {
        let mut g = Graph::new();
        for (id, attrs) in nodes {
            g.add_node(id, attrs)?;
        }
        for (a, b, attrs) in edges {
            g.add_edge(a, b, attrs)?;
        }
        Ok(g)
    }

    /// Raw constructor used by the decoder; the caller checks `violations`.
    pub(crate) fn from_parts(
        nodes: BTreeMap<NodeId, AttrSet>,
        edges: BTreeMap<EdgeKey, AttrSet>,
    ) -> Self {
        Graph { nodes, edges }
    }

    pub fn add_node(&mut self, id: impl Into<NodeId>, attrs: AttrSet) -> Result<()> {
        let id = id.into();
        if id.as_str().is_empty() {
            return Err(Error::SchemaError("node id must be non-empty".into()));
        }
        if id.as_str().contains('|') {
            return Err(Error::SchemaError(format!(
                "node id {id:?} contains the reserved separator '|'"
            )));
        }
        if attrs.has_empty_value_set() {
            return Err(Error::SchemaError(format!("node {id}: empty attribute value set")));
        }
        if self.nodes.contains_key(&id) {
            return Err(Error::NameConflict(format!("node {id} already exists")));
        }
        self.nodes.insert(id, attrs);
        Ok(())
    }

    pub fn add_edge(
        &mut self,
        from: impl Into<NodeId>,
        to: impl Into<NodeId>,
        attrs: AttrSet,
    ) -> Result<()> {
        let from = from.into();
        let to = to.into();
        for end in [&from, &to] {
            if !self.nodes.contains_key(end) {
                return Err(Error::SchemaError(format!(
                    "edge ({from}, {to}) references undeclared node {end}"
                )));
            }
        }
        if attrs.has_empty_value_set() {
            return Err(Error::SchemaError(format!(
                "edge ({from}, {to}): empty attribute value set"
            )));
        }
        self.edges.insert((from, to), attrs);
        Ok(())
    }

    pub fn node(&self, id: &NodeId) -> Option<&AttrSet> {
        self.nodes.get(id)
    }

    pub fn edge(&self, from: &NodeId, to: &NodeId) -> Option<&AttrSet> {
        self.edges.get(&(from.clone(), to.clone()))
    }

    pub fn has_node(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn has_edge(&self, from: &NodeId, to: &NodeId) -> bool {
        self.edges.contains_key(&(from.clone(), to.clone()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, &AttrSet)> {
        self.nodes.iter()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, &AttrSet)> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn out_degree(&self, id: &NodeId) -> usize {
        self.edges.keys().filter(|(a, _)| a == id).count()
    }

    pub fn in_degree(&self, id: &NodeId) -> usize {
        self.edges.keys().filter(|(_, b)| b == id).count()
    }

    /// Lists every invariant violation; an empty list means the graph is
    /// well-formed. Graphs built through `add_node`/`add_edge` are always
    /// well-formed; this matters for decoded documents.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (id, attrs) in &self.nodes {
            if id.as_str().is_empty() {
                out.push(Violation::EmptyNodeId);
            }
            if id.as_str().contains('|') {
                out.push(Violation::ReservedSeparator { node: id.clone() });
            }
            for (key, vs) in attrs.iter() {
                if vs.is_empty() {
                    out.push(Violation::EmptyValueSet {
                        owner: id.to_string(),
                        key: key.clone(),
                    });
                }
            }
        }
        for ((a, b), attrs) in &self.edges {
            for end in [a, b] {
                if !self.nodes.contains_key(end) {
                    out.push(Violation::DanglingEndpoint {
                        edge: (a.clone(), b.clone()),
                        missing: end.clone(),
                    });
                }
            }
            for (key, vs) in attrs.iter() {
                if vs.is_empty() {
                    out.push(Violation::EmptyValueSet {
                        owner: format!("({a}, {b})"),
                        key: key.clone(),
                    });
                }
            }
        }
        out
    }

    /// Renames every node through `map`; ids absent from the map are kept.
    /// Fails if the renaming would collapse two distinct nodes.
    pub fn renamed(&self, map: &BTreeMap<NodeId, NodeId>) -> Result<Graph> {
        let rename = |id: &NodeId| -> NodeId { map.get(id).cloned().unwrap_or_else(|| id.clone()) };
        let mut nodes = BTreeMap::new();
        for (id, attrs) in &self.nodes {
            let new = rename(id);
            if nodes.insert(new.clone(), attrs.clone()).is_some() {
                return Err(Error::NameConflict(format!(
                    "renaming collapses two nodes onto {new}"
                )));
            }
        }
        let mut edges = BTreeMap::new();
        for ((a, b), attrs) in &self.edges {
            edges.insert((rename(a), rename(b)), attrs.clone());
        }
        Ok(Graph { nodes, edges })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::AttrValue;

    fn attrs(key: &str, vals: &[i64]) -> AttrSet {
        AttrSet::from_pairs([(key, vals.iter().copied().collect::<Vec<i64>>())])
    }

    #[test]
    fn single_node_no_edges_is_valid() {
        let g = Graph::build([(NodeId::from("a"), AttrSet::new())], []).unwrap();
        assert!(g.violations().is_empty());
    }

    #[test]
    fn dangling_endpoint_reported() {
        let mut nodes = BTreeMap::new();
        nodes.insert(NodeId::from("a"), AttrSet::new());
        let mut edges = BTreeMap::new();
        edges.insert((NodeId::from("a"), NodeId::from("b")), AttrSet::new());
        let g = Graph::from_parts(nodes, edges);
        let vs = g.violations();
        assert_eq!(vs.len(), 1);
        assert!(matches!(&vs[0], Violation::DanglingEndpoint { missing, .. } if missing.as_str() == "b"));
    }

    #[test]
    fn empty_value_set_reported() {
        let mut bad = AttrSet::new();
        bad.insert("k", AttrValue::Int(1));
        let mut nodes = BTreeMap::new();
        nodes.insert(NodeId::from("a"), bad);
        let mut g = Graph::from_parts(nodes, BTreeMap::new());
        // Forcibly empty the set through serde round-trip of a malformed doc
        // is covered in codec tests; here we just check the happy path.
        assert!(g.violations().is_empty());
        g.nodes.get_mut("a").unwrap().normalize();
        assert!(g.violations().is_empty());
    }

    #[test]
    fn add_edge_requires_endpoints() {
        let mut g = Graph::new();
        g.add_node("a", attrs("k", &[1])).unwrap();
        assert!(g.add_edge("a", "b", AttrSet::new()).is_err());
    }

    #[test]
    fn reserved_separator_rejected() {
        let mut g = Graph::new();
        assert!(g.add_node("a|b", AttrSet::new()).is_err());
    }

    #[test]
    fn renamed_detects_collisions() {
        let g = Graph::build(
            [(NodeId::from("a"), AttrSet::new()), (NodeId::from("b"), AttrSet::new())],
            [],
        )
        .unwrap();
        let mut map = BTreeMap::new();
        map.insert(NodeId::from("a"), NodeId::from("b"));
        assert!(g.renamed(&map).is_err());
    }
}
