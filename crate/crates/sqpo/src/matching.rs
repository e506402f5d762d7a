//! Pattern matching: enumeration of monomorphisms and isomorphism search.

use std::collections::{BTreeMap, BTreeSet};

use crate::attr::AttrSet;
use crate::graph::{Graph, NodeId};
use crate::hom::Homomorphism;

/// Finds every injective homomorphism from `pattern` into `host`.
///
/// The search assigns pattern nodes most-constrained-first (by total degree,
/// ties broken by id) and prunes on attribute inclusion, degree bounds and
/// adjacency to already-assigned nodes. The result is sorted by the tuple of
/// images taken in pattern-id order, so repeated runs list matches in the
/// same order.
pub fn find_monomorphisms(pattern: &Graph, host: &Graph) -> Vec<Homomorphism> {
    let mut order: Vec<&NodeId> = pattern.node_ids().collect();
    order.sort_by_key(|n| {
        (std::cmp::Reverse(pattern.out_degree(n) + pattern.in_degree(n)), (*n).clone())
    });

    let mut results: Vec<BTreeMap<NodeId, NodeId>> = Vec::new();
    let mut assignment: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut used: BTreeSet<NodeId> = BTreeSet::new();
    backtrack(pattern, host, &order, 0, &mut assignment, &mut used, &mut results);

    let key_order: Vec<NodeId> = pattern.node_ids().cloned().collect();
    results.sort_by_key(|m| key_order.iter().map(|n| m[n].clone()).collect::<Vec<_>>());
    results
        .into_iter()
        .map(|m| {
            Homomorphism::new(pattern.clone(), host.clone(), m)
                .expect("backtracking only emits valid monomorphisms")
        })
        .collect()
}

fn backtrack(
    pattern: &Graph,
    host: &Graph,
    order: &[&NodeId],
    depth: usize,
    assignment: &mut BTreeMap<NodeId, NodeId>,
    used: &mut BTreeSet<NodeId>,
    results: &mut Vec<BTreeMap<NodeId, NodeId>>,
) {
    if depth == order.len() {
        results.push(assignment.clone());
        return;
    }
    let p = order[depth];
    let p_attrs = pattern.node(p).expect("order lists pattern nodes");
    for (h, h_attrs) in host.nodes() {
        if used.contains(h) || !candidate_ok(pattern, host, p, p_attrs, h, h_attrs) {
            continue;
        }
        if !consistent_with_assigned(pattern, host, p, h, assignment) {
            continue;
        }
        assignment.insert(p.clone(), h.clone());
        used.insert(h.clone());
        backtrack(pattern, host, order, depth + 1, assignment, used, results);
        assignment.remove(p);
        used.remove(h);
    }
}

fn candidate_ok(
    pattern: &Graph,
    host: &Graph,
    p: &NodeId,
    p_attrs: &AttrSet,
    h: &NodeId,
    h_attrs: &AttrSet,
) -> bool {
    p_attrs.included_in(h_attrs)
        && pattern.out_degree(p) <= host.out_degree(h)
        && pattern.in_degree(p) <= host.in_degree(h)
}

fn consistent_with_assigned(
    pattern: &Graph,
    host: &Graph,
    p: &NodeId,
    h: &NodeId,
    assignment: &BTreeMap<NodeId, NodeId>,
) -> bool {
    for (q, hq) in assignment {
        if let Some(attrs) = pattern.edge(p, q) {
            match host.edge(h, hq) {
                Some(h_attrs) if attrs.included_in(h_attrs) => {}
                _ => return false,
            }
        }
        if let Some(attrs) = pattern.edge(q, p) {
            match host.edge(hq, h) {
                Some(h_attrs) if attrs.included_in(h_attrs) => {}
                _ => return false,
            }
        }
    }
    // Self-loop.
    if let Some(attrs) = pattern.edge(p, p) {
        match host.edge(h, h) {
            Some(h_attrs) if attrs.included_in(h_attrs) => {}
            _ => return false,
        }
    }
    true
}

/// Finds an isomorphism `g1 → g2` if one exists; the first match in the
/// deterministic mono order is returned so the choice is stable.
pub fn find_isomorphism(g1: &Graph, g2: &Graph) -> Option<Homomorphism> {
    if g1.node_count() != g2.node_count() || g1.edge_count() != g2.edge_count() {
        return None;
    }
    // Isomorphisms are exactly the monos whose analysis reports `iso`;
    // attribute equality per key is required, not mere inclusion.
    find_monomorphisms(g1, g2).into_iter().find(|h| h.analysis().iso)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::AttrSet;

    fn node(id: &str) -> (NodeId, AttrSet) {
        (NodeId::from(id), AttrSet::new())
    }

    fn edge(a: &str, b: &str) -> (NodeId, NodeId, AttrSet) {
        (NodeId::from(a), NodeId::from(b), AttrSet::new())
    }

    #[test]
    fn single_node_pattern_matches_every_host_node() {
        let pattern = Graph::build([node("x")], []).unwrap();
        let host = Graph::build([node("a"), node("b")], []).unwrap();
        assert_eq!(find_monomorphisms(&pattern, &host).len(), 2);
    }

    #[test]
    fn path_pattern_in_path_host() {
        let pattern = Graph::build([node("x"), node("y")], [edge("x", "y")]).unwrap();
        let host =
            Graph::build([node("a"), node("b"), node("c")], [edge("a", "b"), edge("b", "c")])
                .unwrap();
        let monos = find_monomorphisms(&pattern, &host);
        assert_eq!(monos.len(), 2);
        // Deterministic order: images of (x, y) sorted lexicographically.
        assert_eq!(monos[0].apply(&NodeId::from("x")), &NodeId::from("a"));
        assert_eq!(monos[1].apply(&NodeId::from("x")), &NodeId::from("b"));
    }

    #[test]
    fn attribute_inclusion_can_rule_out_all_matches() {
        let pattern = Graph::build(
            [(NodeId::from("x"), AttrSet::from_pairs([("k", vec![1i64, 2])]))],
            [],
        )
        .unwrap();
        let host = Graph::build(
            [(NodeId::from("a"), AttrSet::from_pairs([("k", vec![1i64])]))],
            [],
        )
        .unwrap();
        assert!(find_monomorphisms(&pattern, &host).is_empty());
    }

    #[test]
    fn isomorphism_on_equal_graphs_is_identity() {
        let g = Graph::build([node("a"), node("b")], [edge("a", "b")]).unwrap();
        let iso = find_isomorphism(&g, &g).unwrap();
        assert_eq!(iso.node_map(), Homomorphism::identity(&g).node_map());
    }

    #[test]
    fn relabeling_is_isomorphic() {
        let g1 = Graph::build([node("a")], []).unwrap();
        let g2 = Graph::build([node("b")], []).unwrap();
        let iso = find_isomorphism(&g1, &g2).unwrap();
        assert_eq!(iso.apply(&NodeId::from("a")), &NodeId::from("b"));
    }

    #[test]
    fn reversed_edge_with_distinct_attrs_is_not_isomorphic() {
        let a1 = AttrSet::from_pairs([("k", vec![1i64])]);
        let a2 = AttrSet::from_pairs([("k", vec![2i64])]);
        let g1 = Graph::build(
            [(NodeId::from("a"), a1.clone()), (NodeId::from("b"), a2.clone())],
            [edge("a", "b")],
        )
        .unwrap();
        let g2 = Graph::build(
            [(NodeId::from("a"), a1), (NodeId::from("b"), a2)],
            [edge("b", "a")],
        )
        .unwrap();
        assert!(find_isomorphism(&g1, &g2).is_none());
    }

    #[test]
    fn self_loop_requires_host_loop() {
        let pattern = Graph::build([node("x")], [edge("x", "x")]).unwrap();
        let host = Graph::build([node("a"), node("b")], [edge("a", "b")]).unwrap();
        assert!(find_monomorphisms(&pattern, &host).is_empty());
    }
}
