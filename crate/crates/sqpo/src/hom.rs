//! Homomorphisms between attributed graphs.
//!
//! A homomorphism is a total node map that preserves edges and includes
//! attributes per key: `attrs(n) ⊆ attrs(f(n))` for every node and likewise
//! for every edge. In this category a mono is exactly an injective node map;
//! an iso additionally needs edge surjectivity and per-key attribute equality
//! on both nodes and edges.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Structural flags of a candidate homomorphism. When `valid` is false the
/// remaining flags are not meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HomAnalysis {
    pub valid: bool,
    pub mono: bool,
    pub epi: bool,
    pub iso: bool,
}

/// Checks a raw node map between two graphs and classifies it.
pub fn analyze_homomorphism(
    source: &Graph,
    target: &Graph,
    node_map: &BTreeMap<NodeId, NodeId>,
) -> HomAnalysis {
    let mut out = HomAnalysis::default();

    // Totality and edge/attribute preservation.
    for (n, attrs) in source.nodes() {
        let Some(img) = node_map.get(n) else { return out };
        let Some(img_attrs) = target.node(img) else { return out };
        if !attrs.included_in(img_attrs) {
            return out;
        }
    }
    if node_map.keys().any(|n| !source.has_node(n)) {
        return out;
    }
    for ((a, b), attrs) in source.edges() {
        let (ia, ib) = (&node_map[a], &node_map[b]);
        let Some(img_attrs) = target.edge(ia, ib) else { return out };
        if !attrs.included_in(img_attrs) {
            return out;
        }
    }
    out.valid = true;

    // Mono: injective on nodes.
    let image: BTreeSet<&NodeId> = node_map.values().collect();
    out.mono = image.len() == node_map.len();

    // Epi: surjective on nodes and every target attribute value is reached.
    out.epi = target.node_ids().all(|t| image.contains(t)) && attr_values_covered(source, target, node_map);

    // Iso: invertible, i.e. bijective on nodes and edges with per-key
    // attribute equality on both.
    out.iso = out.mono
        && image.len() == target.node_count()
        && source.edge_count() == target.edge_count()
        && source.nodes().all(|(n, attrs)| target.node(&node_map[n]) == Some(attrs))
        && source
            .edges()
            .all(|((a, b), attrs)| target.edge(&node_map[a], &node_map[b]) == Some(attrs));

    out
}

fn attr_values_covered(source: &Graph, target: &Graph, node_map: &BTreeMap<NodeId, NodeId>) -> bool {
    for (t, t_attrs) in target.nodes() {
        for (key, vals) in t_attrs.iter() {
            for v in vals {
                let reached = source
                    .nodes()
                    .any(|(s, s_attrs)| &node_map[s] == t && s_attrs.contains(key, v));
                if !reached {
                    return false;
                }
            }
        }
    }
    for ((ta, tb), t_attrs) in target.edges() {
        for (key, vals) in t_attrs.iter() {
            for v in vals {
                let reached = source.edges().any(|((sa, sb), s_attrs)| {
                    &node_map[sa] == ta && &node_map[sb] == tb && s_attrs.contains(key, v)
                });
                if !reached {
                    return false;
                }
            }
        }
    }
    true
}

/// A validated homomorphism. Construction fails unless the node map is a
/// total, edge- and attribute-preserving map from `source` to `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Homomorphism {
    source: Graph,
    target: Graph,
    node_map: BTreeMap<NodeId, NodeId>,
}

impl Homomorphism {
    pub fn new(source: Graph, target: Graph, node_map: BTreeMap<NodeId, NodeId>) -> Result<Self> {
        let analysis = analyze_homomorphism(&source, &target, &node_map);
        if !analysis.valid {
            return Err(Error::InvalidHomomorphism(describe_failure(
                &source, &target, &node_map,
            )));
        }
        Ok(Homomorphism { source, target, node_map })
    }

    pub fn identity(g: &Graph) -> Self {
        let node_map = g.node_ids().map(|n| (n.clone(), n.clone())).collect();
        Homomorphism { source: g.clone(), target: g.clone(), node_map }
    }

    pub fn source(&self) -> &Graph {
        &self.source
    }

    pub fn target(&self) -> &Graph {
        &self.target
    }

    pub fn node_map(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.node_map
    }

    /// Image of a source node. Total by construction.
    pub fn apply(&self, n: &NodeId) -> &NodeId {
        &self.node_map[n]
    }

    pub fn analysis(&self) -> HomAnalysis {
        analyze_homomorphism(&self.source, &self.target, &self.node_map)
    }

    pub fn is_mono(&self) -> bool {
        let image: BTreeSet<&NodeId> = self.node_map.values().collect();
        image.len() == self.node_map.len()
    }

    pub fn preimages(&self, t: &NodeId) -> Vec<&NodeId> {
        self.node_map.iter().filter(|(_, v)| *v == t).map(|(k, _)| k).collect()
    }

    /// Replaces the target graph by an equal-up-to-renaming one, rewriting
    /// images through `rename`. Ids absent from `rename` stay unchanged.
    pub(crate) fn with_renamed_target(
        &self,
        new_target: Graph,
        rename: &BTreeMap<NodeId, NodeId>,
    ) -> Result<Homomorphism> {
        let node_map = self
            .node_map
            .iter()
            .map(|(k, v)| (k.clone(), rename.get(v).cloned().unwrap_or_else(|| v.clone())))
            .collect();
        Homomorphism::new(self.source.clone(), new_target, node_map)
    }
}

fn describe_failure(source: &Graph, target: &Graph, node_map: &BTreeMap<NodeId, NodeId>) -> String {
    for (n, attrs) in source.nodes() {
        let Some(img) = node_map.get(n) else {
            return format!("node {n} has no image");
        };
        let Some(img_attrs) = target.node(img) else {
            return format!("image {img} of node {n} is not a target node");
        };
        if !attrs.included_in(img_attrs) {
            return format!("attributes of node {n} are not included in those of {img}");
        }
    }
    for n in node_map.keys() {
        if !source.has_node(n) {
            return format!("map mentions {n} which is not a source node");
        }
    }
    for ((a, b), attrs) in source.edges() {
        let (ia, ib) = (&node_map[a], &node_map[b]);
        match target.edge(ia, ib) {
            None => return format!("edge ({a}, {b}) has no image edge ({ia}, {ib})"),
            Some(img_attrs) if !attrs.included_in(img_attrs) => {
                return format!("attributes of edge ({a}, {b}) are not included in its image")
            }
            _ => {}
        }
    }
    "unknown failure".into()
}

/// Composition `g ∘ f`; requires `f.target == g.source` strictly.
pub fn compose(f: &Homomorphism, g: &Homomorphism) -> Result<Homomorphism> {
    if f.target() != g.source() {
        return Err(Error::DomainMismatch(
            "compose: target of the first map differs from source of the second".into(),
        ));
    }
    let node_map = f
        .node_map
        .iter()
        .map(|(n, mid)| (n.clone(), g.node_map[mid].clone()))
        .collect();
    Homomorphism::new(f.source.clone(), g.target.clone(), node_map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::AttrSet;

    fn node(id: &str) -> (NodeId, AttrSet) {
        (NodeId::from(id), AttrSet::new())
    }

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<NodeId, NodeId> {
        pairs.iter().map(|(a, b)| (NodeId::from(*a), NodeId::from(*b))).collect()
    }

    #[test]
    fn identity_is_iso() {
        let g = Graph::build([node("a"), node("b")], []).unwrap();
        let h = Homomorphism::identity(&g);
        let a = h.analysis();
        assert!(a.valid && a.mono && a.epi && a.iso);
    }

    #[test]
    fn merge_map_is_epi_not_mono() {
        let src = Graph::build([node("p"), node("q")], []).unwrap();
        let tgt = Graph::build([node("m")], []).unwrap();
        let a = analyze_homomorphism(&src, &tgt, &map(&[("p", "m"), ("q", "m")]));
        assert!(a.valid && !a.mono && a.epi && !a.iso);
    }

    #[test]
    fn inclusion_is_mono_not_epi() {
        let src = Graph::build([node("c")], []).unwrap();
        let tgt = Graph::build(
            [node("c"), node("s")],
            [(NodeId::from("c"), NodeId::from("s"), AttrSet::new())],
        )
        .unwrap();
        let a = analyze_homomorphism(&src, &tgt, &map(&[("c", "c")]));
        assert!(a.valid && a.mono && !a.epi && !a.iso);
    }

    #[test]
    fn attribute_inclusion_required() {
        let src = Graph::build(
            [(NodeId::from("a"), AttrSet::from_pairs([("k", vec![1i64, 2])]))],
            [],
        )
        .unwrap();
        let tgt = Graph::build(
            [(NodeId::from("b"), AttrSet::from_pairs([("k", vec![1i64])]))],
            [],
        )
        .unwrap();
        let a = analyze_homomorphism(&src, &tgt, &map(&[("a", "b")]));
        assert!(!a.valid);
    }

    #[test]
    fn compose_chain_matches_direct_map() {
        let g1 = Graph::build([node("x")], []).unwrap();
        let g2 = Graph::build([node("y"), node("z")], []).unwrap();
        let g3 = Graph::build([node("w")], []).unwrap();
        let f = Homomorphism::new(g1.clone(), g2.clone(), map(&[("x", "y")])).unwrap();
        let g = Homomorphism::new(g2, g3.clone(), map(&[("y", "w"), ("z", "w")])).unwrap();
        let c = compose(&f, &g).unwrap();
        assert_eq!(c.apply(&NodeId::from("x")), &NodeId::from("w"));
    }

    #[test]
    fn compose_rejects_mismatched_domains() {
        let g1 = Graph::build([node("x")], []).unwrap();
        let g2 = Graph::build([node("y")], []).unwrap();
        let g3 = Graph::build([node("z")], []).unwrap();
        let f = Homomorphism::new(g1, g2, map(&[("x", "y")])).unwrap();
        let g = Homomorphism::new(g3.clone(), g3, map(&[("z", "z")])).unwrap();
        assert!(matches!(compose(&f, &g), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn iso_needs_edge_surjectivity() {
        let src = Graph::build([node("a"), node("b")], []).unwrap();
        let tgt = Graph::build(
            [node("a"), node("b")],
            [(NodeId::from("a"), NodeId::from("b"), AttrSet::new())],
        )
        .unwrap();
        let a = analyze_homomorphism(&src, &tgt, &map(&[("a", "a"), ("b", "b")]));
        assert!(a.valid && a.mono && !a.iso);
    }
}
