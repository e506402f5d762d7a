//! Shared test support: brute-force oracles and random generators.
//!
//! The oracles here are deliberately independent of the library's search and
//! construction paths: homomorphism enumeration is plain exhaustive search
//! over node maps, so it can arbitrate universal-property questions.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use sqpo::attr::{AttrSet, AttrValue};
use sqpo::graph::{Graph, NodeId};
use sqpo::hom::{analyze_homomorphism, Homomorphism};
use sqpo::rewrite::{apply_rule, is_reversible, make_rule, RewriteRecord, Rule};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Exhaustively enumerates every homomorphism `src -> tgt` as a node map.
pub fn enumerate_homs(src: &Graph, tgt: &Graph) -> Vec<BTreeMap<NodeId, NodeId>> {
    let src_ids: Vec<NodeId> = src.node_ids().cloned().collect();
    let tgt_ids: Vec<NodeId> = tgt.node_ids().cloned().collect();
    let mut out = Vec::new();
    if src_ids.is_empty() {
        out.push(BTreeMap::new());
        return out;
    }
    if tgt_ids.is_empty() {
        return out;
    }
    let mut counters = vec![0usize; src_ids.len()];
    loop {
        let map: BTreeMap<NodeId, NodeId> = src_ids
            .iter()
            .zip(&counters)
            .map(|(s, &i)| (s.clone(), tgt_ids[i].clone()))
            .collect();
        if analyze_homomorphism(src, tgt, &map).valid {
            out.push(map);
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            counters[pos] += 1;
            if counters[pos] < tgt_ids.len() {
                break;
            }
            counters[pos] = 0;
            pos += 1;
            if pos == counters.len() {
                return out;
            }
        }
    }
}

/// Exhaustively enumerates every *injective* homomorphism `pattern -> host`.
pub fn enumerate_monos(pattern: &Graph, host: &Graph) -> Vec<BTreeMap<NodeId, NodeId>> {
    enumerate_homs(pattern, host)
        .into_iter()
        .filter(|m| {
            let image: BTreeSet<&NodeId> = m.values().collect();
            image.len() == m.len()
        })
        .collect()
}

const KEYS: [&str; 2] = ["k", "j"];

pub fn random_attrs(rng: &mut StdRng, max_keys: usize, max_values: i64) -> AttrSet {
    let mut attrs = AttrSet::new();
    for key in KEYS.iter().take(max_keys) {
        if rng.gen_bool(0.4) {
            let count = rng.gen_range(1..=2);
            for _ in 0..count {
                attrs.insert(*key, AttrValue::Int(rng.gen_range(1..=max_values)));
            }
        }
    }
    attrs
}

/// A random graph with `1..=max_nodes` nodes, edge probability ~0.3 and
/// small integer attribute sets.
pub fn random_graph(rng: &mut StdRng, max_nodes: usize) -> Graph {
    let n = rng.gen_range(1..=max_nodes);
    let mut g = Graph::new();
    for i in 0..n {
        g.add_node(format!("n{i}"), random_attrs(rng, 2, 3)).unwrap();
    }
    let ids: Vec<NodeId> = g.node_ids().cloned().collect();
    for a in &ids {
        for b in &ids {
            if rng.gen_bool(0.25) {
                g.add_edge(a.clone(), b.clone(), random_attrs(rng, 1, 3)).unwrap();
            }
        }
    }
    g
}

/// A random homomorphism out of `a`: quotient some nodes, extend attributes,
/// add a few fresh nodes and edges. Returns the arrow `a -> b`.
pub fn random_hom_from(rng: &mut StdRng, a: &Graph) -> Homomorphism {
    let ids: Vec<NodeId> = a.node_ids().cloned().collect();
    // Random partition: each node either starts a class or joins an earlier one.
    let mut class_of: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut classes: Vec<Vec<NodeId>> = Vec::new();
    for id in &ids {
        if !classes.is_empty() && rng.gen_bool(0.3) {
            let k = rng.gen_range(0..classes.len());
            classes[k].push(id.clone());
            class_of.insert(id.clone(), k);
        } else {
            class_of.insert(id.clone(), classes.len());
            classes.push(vec![id.clone()]);
        }
    }
    let mut b = Graph::new();
    let mut map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for (k, members) in classes.iter().enumerate() {
        let mut attrs = AttrSet::new();
        for m in members {
            attrs = attrs.union(a.node(m).unwrap());
        }
        // Targets may carry more attribute values than required.
        attrs = attrs.union(&random_attrs(rng, 2, 3));
        let id = NodeId::from(format!("b{k}"));
        b.add_node(id.clone(), attrs).unwrap();
        for m in members {
            map.insert(m.clone(), id.clone());
        }
    }
    for ((x, y), attrs) in a.edges() {
        let key = (map[x].clone(), map[y].clone());
        let mut merged = b.edge(&key.0, &key.1).cloned().unwrap_or_default();
        merged = merged.union(attrs);
        // add_edge overwrites, which is what accumulation needs here.
        b.add_edge(key.0, key.1, merged).unwrap();
    }
    // A couple of extra nodes and edges beyond the image.
    let extra = rng.gen_range(0..=2);
    for i in 0..extra {
        b.add_node(format!("x{i}"), random_attrs(rng, 2, 3)).unwrap();
    }
    let b_ids: Vec<NodeId> = b.node_ids().cloned().collect();
    for _ in 0..rng.gen_range(0..=2) {
        let x = b_ids.choose(rng).unwrap().clone();
        let y = b_ids.choose(rng).unwrap().clone();
        if !b.has_edge(&x, &y) {
            b.add_edge(x, y, random_attrs(rng, 1, 3)).unwrap();
        }
    }
    Homomorphism::new(a.clone(), b, map).expect("constructed hom is valid")
}

/// A random mono into `host`: an induced subgraph with relabeled ids and
/// possibly dropped attribute values.
pub fn random_mono_into(rng: &mut StdRng, host: &Graph, max_nodes: usize) -> Homomorphism {
    let ids: Vec<NodeId> = host.node_ids().cloned().collect();
    let count = rng.gen_range(1..=ids.len().min(max_nodes));
    let mut chosen = ids.clone();
    chosen.shuffle(rng);
    chosen.truncate(count);
    chosen.sort();
    let mut pattern = Graph::new();
    let mut map = BTreeMap::new();
    for (i, h) in chosen.iter().enumerate() {
        let id = NodeId::from(format!("p{i}"));
        let mut attrs = host.node(h).unwrap().clone();
        if rng.gen_bool(0.3) {
            // Drop to a random subset of values per key.
            attrs = thin_attrs(rng, &attrs);
        }
        pattern.add_node(id.clone(), attrs).unwrap();
        map.insert(id, h.clone());
    }
    let pat_ids: Vec<NodeId> = pattern.node_ids().cloned().collect();
    for x in &pat_ids {
        for y in &pat_ids {
            if let Some(attrs) = host.edge(&map[x], &map[y]) {
                if rng.gen_bool(0.85) {
                    let mut attrs = attrs.clone();
                    if rng.gen_bool(0.3) {
                        attrs = thin_attrs(rng, &attrs);
                    }
                    pattern.add_edge(x.clone(), y.clone(), attrs).unwrap();
                }
            }
        }
    }
    Homomorphism::new(pattern, host.clone(), map).expect("constructed mono is valid")
}

fn thin_attrs(rng: &mut StdRng, attrs: &AttrSet) -> AttrSet {
    let mut out = AttrSet::new();
    for (k, vs) in attrs.iter() {
        for v in vs {
            if rng.gen_bool(0.7) {
                out.insert(k.clone(), v.clone());
            }
        }
    }
    out
}

/// The random rule generator: sample an induced-subgraph pattern of the
/// host, clone each pattern node with probability 0.2 (multiplicity 2),
/// delete with probability 0.2, merge random result classes with probability
/// 0.2, and add up to two fresh nodes and edges. Returns the rule with its
/// inclusion instance.
pub fn random_rule(rng: &mut StdRng, host: &Graph) -> (Rule, Homomorphism) {
    let ids: Vec<NodeId> = host.node_ids().cloned().collect();
    let count = rng.gen_range(0..=ids.len().min(4));
    let mut chosen = ids.clone();
    chosen.shuffle(rng);
    chosen.truncate(count);
    chosen.sort();

    // L: induced subgraph on the chosen nodes, identity instance.
    let mut lhs = Graph::new();
    for id in &chosen {
        lhs.add_node(id.clone(), host.node(id).unwrap().clone()).unwrap();
    }
    for x in &chosen {
        for y in &chosen {
            if let Some(attrs) = host.edge(x, y) {
                lhs.add_edge(x.clone(), y.clone(), attrs.clone()).unwrap();
            }
        }
    }
    let m = Homomorphism::new(
        lhs.clone(),
        host.clone(),
        chosen.iter().map(|n| (n.clone(), n.clone())).collect(),
    )
    .expect("inclusion is a mono");

    // P: clone / delete / keep.
    let mut preserved = Graph::new();
    let mut p_lhs: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for id in &chosen {
        let roll: f64 = rng.gen();
        if roll < 0.2 {
            // deleted: no preimage
        } else if roll < 0.4 {
            for c in 1..=2 {
                let pid = NodeId::from(format!("{id}~{c}"));
                preserved.add_node(pid.clone(), lhs.node(id).unwrap().clone()).unwrap();
                p_lhs.insert(pid, id.clone());
            }
        } else {
            preserved.add_node(id.clone(), lhs.node(id).unwrap().clone()).unwrap();
            p_lhs.insert(id.clone(), id.clone());
        }
    }
    let p_ids: Vec<NodeId> = preserved.node_ids().cloned().collect();
    for x in &p_ids {
        for y in &p_ids {
            if let Some(attrs) = lhs.edge(&p_lhs[x], &p_lhs[y]) {
                if rng.gen_bool(0.9) {
                    preserved.add_edge(x.clone(), y.clone(), attrs.clone()).unwrap();
                }
            }
        }
    }

    // R: merge some preserved classes, then add fresh material.
    let mut class_of: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut classes: Vec<Vec<NodeId>> = Vec::new();
    for id in &p_ids {
        if !classes.is_empty() && rng.gen_bool(0.2) {
            let k = rng.gen_range(0..classes.len());
            classes[k].push(id.clone());
            class_of.insert(id.clone(), k);
        } else {
            class_of.insert(id.clone(), classes.len());
            classes.push(vec![id.clone()]);
        }
    }
    let mut rhs = Graph::new();
    let mut p_rhs: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for (k, members) in classes.iter().enumerate() {
        let mut attrs = AttrSet::new();
        for m in members {
            attrs = attrs.union(preserved.node(m).unwrap());
        }
        let rid = NodeId::from(format!("r{k}"));
        rhs.add_node(rid.clone(), attrs).unwrap();
        for m in members {
            p_rhs.insert(m.clone(), rid.clone());
        }
    }
    for ((x, y), attrs) in preserved.edges() {
        let key = (p_rhs[x].clone(), p_rhs[y].clone());
        let merged = rhs.edge(&key.0, &key.1).cloned().unwrap_or_default().union(attrs);
        rhs.add_edge(key.0, key.1, merged).unwrap();
    }
    for i in 0..rng.gen_range(0..=2usize) {
        rhs.add_node(format!("f{i}"), random_attrs(rng, 2, 3)).unwrap();
    }
    let r_ids: Vec<NodeId> = rhs.node_ids().cloned().collect();
    for _ in 0..rng.gen_range(0..=2) {
        let x = r_ids.choose(rng).unwrap().clone();
        let y = r_ids.choose(rng).unwrap().clone();
        if !rhs.has_edge(&x, &y) {
            rhs.add_edge(x, y, random_attrs(rng, 1, 3)).unwrap();
        }
    }

    let rule = make_rule(lhs, preserved, rhs, p_lhs, p_rhs).expect("generated rule is valid");
    (rule, m)
}

/// Rejection-samples a rule whose application at its instance is reversible.
/// Falls back to a guaranteed-reversible clone-or-add rule when the budget
/// runs out.
pub fn random_reversible_rule(rng: &mut StdRng, host: &Graph) -> (Rule, Homomorphism, RewriteRecord) {
    for _ in 0..60 {
        let (rule, m) = random_rule(rng, host);
        if let Ok(rec) = apply_rule(host, &rule, &m) {
            if is_reversible(&rec).unwrap_or(false) {
                return (rule, m, rec);
            }
        }
    }
    // Fallback: add one fresh node, always reversible.
    let fresh = free_node_id(host, "fallback");
    let rhs = Graph::build([(fresh, AttrSet::new())], []).unwrap();
    let rule = make_rule(Graph::new(), Graph::new(), rhs, BTreeMap::new(), BTreeMap::new())
        .unwrap();
    let m = Homomorphism::new(Graph::new(), host.clone(), BTreeMap::new()).unwrap();
    let rec = apply_rule(host, &rule, &m).unwrap();
    (rule, m, rec)
}

pub fn free_node_id(g: &Graph, base: &str) -> NodeId {
    let mut k = 0;
    loop {
        let candidate = NodeId::from(format!("{base}{k}"));
        if !g.has_node(&candidate) {
            return candidate;
        }
        k += 1;
    }
}

/// Samples an applicable (not necessarily reversible) rule with its record.
pub fn random_applied_rule(rng: &mut StdRng, host: &Graph) -> (Rule, Homomorphism, RewriteRecord) {
    loop {
        let (rule, m) = random_rule(rng, host);
        if let Ok(rec) = apply_rule(host, &rule, &m) {
            return (rule, m, rec);
        }
    }
}

/// The irreversible circle/triangle merge: the pattern sees only the two
/// merged nodes, not the square neighbor.
pub fn example_one_merge() -> (Graph, Rule, Homomorphism) {
    let host = Graph::build(
        [
            (NodeId::from("c"), AttrSet::new()),
            (NodeId::from("t"), AttrSet::new()),
            (NodeId::from("s"), AttrSet::new()),
        ],
        [(NodeId::from("t"), NodeId::from("s"), AttrSet::new())],
    )
    .unwrap();
    let l = Graph::build(
        [(NodeId::from("c"), AttrSet::new()), (NodeId::from("t"), AttrSet::new())],
        [],
    )
    .unwrap();
    let r = Graph::build([(NodeId::from("ct"), AttrSet::new())], []).unwrap();
    let rule = make_rule(
        l.clone(),
        l.clone(),
        r,
        [(NodeId::from("c"), NodeId::from("c")), (NodeId::from("t"), NodeId::from("t"))]
            .into_iter()
            .collect(),
        [(NodeId::from("c"), NodeId::from("ct")), (NodeId::from("t"), NodeId::from("ct"))]
            .into_iter()
            .collect(),
    )
    .unwrap();
    let m = Homomorphism::new(
        l,
        host.clone(),
        [(NodeId::from("c"), NodeId::from("c")), (NodeId::from("t"), NodeId::from("t"))]
            .into_iter()
            .collect(),
    )
    .unwrap();
    (host, rule, m)
}
