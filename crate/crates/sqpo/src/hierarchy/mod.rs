//! Hierarchies of graphs and hierarchies of rules.
//!
//! A hierarchy is a DAG whose nodes carry graphs and whose edges carry
//! homomorphisms (read as typing), such that all composite arrows along
//! parallel paths agree. A rule hierarchy carries one rule per node and a
//! rule homomorphism — a `(λ, π, ρ)` triple commuting with the legs — per
//! edge; applying it rewrites every graph and reconstructs every typing
//! arrow, keeping the hierarchy commutative.

mod composition;
mod propagation;

pub use composition::{compose_rule_hierarchies, hierarchy_overlap, HierarchyOverlap};
pub use propagation::{
    induced_rule_hierarchy, lifting_rule, projection_rule, LiftingResult, ProjectionResult,
};

use std::collections::{BTreeMap, BTreeSet};

use crate::category::{po_mediator, Cospan};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::hom::{compose, Homomorphism};
use crate::rewrite::{apply_rule, is_reversible, revert, RewriteRecord, Rule};

pub type EdgeName = (String, String);

/// The underlying DAG shared by a hierarchy and its rule hierarchies.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Skeleton {
    nodes: BTreeSet<String>,
    edges: BTreeSet<EdgeName>,
}

impl Skeleton {
    pub fn new<N, E>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = String>,
        E: IntoIterator<Item = EdgeName>,
    {
        let nodes: BTreeSet<String> = nodes.into_iter().collect();
        let edges: BTreeSet<EdgeName> = edges.into_iter().collect();
        for (s, t) in &edges {
            if s == t {
                return Err(Error::CycleDetected(format!("self-loop on {s}")));
            }
            if !nodes.contains(s) || !nodes.contains(t) {
                return Err(Error::SchemaError(format!(
                    "edge ({s}, {t}) references an undeclared skeleton node"
                )));
            }
        }
        let skeleton = Skeleton { nodes, edges };
        if let Some(cycle_node) = skeleton.find_cycle() {
            return Err(Error::CycleDetected(format!("cycle through {cycle_node}")));
        }
        Ok(skeleton)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &String> {
        self.nodes.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = &EdgeName> {
        self.edges.iter()
    }

    pub fn has_node(&self, v: &str) -> bool {
        self.nodes.contains(v)
    }

    fn find_cycle(&self) -> Option<String> {
        // Kahn's algorithm; leftovers indicate a cycle.
        let mut indegree: BTreeMap<&String, usize> = self.nodes.iter().map(|n| (n, 0)).collect();
        for (_, t) in &self.edges {
            *indegree.get_mut(t).expect("edge endpoints declared") += 1;
        }
        let mut queue: Vec<&String> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| *n)
            .collect();
        let mut seen = 0;
        while let Some(n) = queue.pop() {
            seen += 1;
            for (s, t) in &self.edges {
                if s == n {
                    let d = indegree.get_mut(t).expect("declared");
                    *d -= 1;
                    if *d == 0 {
                        queue.push(t);
                    }
                }
            }
        }
        if seen == self.nodes.len() {
            None
        } else {
            indegree.iter().find(|(_, d)| **d > 0).map(|(n, _)| (*n).clone())
        }
    }

    /// All simple edge paths from `from` to `to` (DAG, so enumeration ends).
    pub fn paths(&self, from: &str, to: &str) -> Vec<Vec<EdgeName>> {
        let mut out = Vec::new();
        let mut stack = vec![(from.to_string(), Vec::new())];
        while let Some((at, path)) = stack.pop() {
            if at == to && !path.is_empty() {
                out.push(path);
                continue;
            }
            for (s, t) in &self.edges {
                if s == &at {
                    let mut next = path.clone();
                    next.push((s.clone(), t.clone()));
                    stack.push((t.clone(), next));
                }
            }
        }
        out.sort();
        out
    }

    /// Strict ancestors: nodes with a path into `v`.
    pub fn ancestors(&self, v: &str) -> BTreeSet<String> {
        self.nodes
            .iter()
            .filter(|u| u.as_str() != v && !self.paths(u, v).is_empty())
            .cloned()
            .collect()
    }

    /// Strict descendants: nodes reachable from `v`.
    pub fn descendants(&self, v: &str) -> BTreeSet<String> {
        self.nodes
            .iter()
            .filter(|u| u.as_str() != v && !self.paths(v, u).is_empty())
            .cloned()
            .collect()
    }

    /// Nodes in topological order.
    pub fn topological(&self) -> Vec<String> {
        let mut order = Vec::new();
        let mut remaining: BTreeSet<&String> = self.nodes.iter().collect();
        while !remaining.is_empty() {
            let next: Vec<&String> = remaining
                .iter()
                .filter(|n| {
                    !self.edges.iter().any(|(s, t)| t == **n && remaining.contains(s))
                })
                .cloned()
                .collect();
            for n in next {
                order.push(n.clone());
                remaining.remove(n);
            }
        }
        order
    }
}

/// A DAG of graphs with commuting typing arrows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    skeleton: Skeleton,
    graphs: BTreeMap<String, Graph>,
    homs: BTreeMap<EdgeName, Homomorphism>,
}

/// Document shape: `{"graphs": {v: <graph>}, "typing": {"s->t": {id: id}}}`.
#[derive(serde::Serialize, serde::Deserialize)]
struct HierarchyDoc {
    graphs: BTreeMap<String, Graph>,
    typing: BTreeMap<String, BTreeMap<String, String>>,
}

pub(crate) fn edge_key(e: &EdgeName) -> String {
    format!("{}->{}", e.0, e.1)
}

pub(crate) fn parse_edge_key(key: &str) -> Result<EdgeName> {
    key.split_once("->")
        .map(|(s, t)| (s.to_string(), t.to_string()))
        .ok_or_else(|| Error::SchemaError(format!("edge key {key:?} is not of the form \"s->t\"")))
}

fn id_map(m: &BTreeMap<String, String>) -> BTreeMap<NodeId, NodeId> {
    m.iter().map(|(a, b)| (NodeId::from(a.as_str()), NodeId::from(b.as_str()))).collect()
}

impl serde::Serialize for Hierarchy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = HierarchyDoc {
            graphs: self.graphs.clone(),
            typing: self
                .homs
                .iter()
                .map(|(e, h)| {
                    (
                        edge_key(e),
                        h.node_map()
                            .iter()
                            .map(|(a, b)| (a.to_string(), b.to_string()))
                            .collect(),
                    )
                })
                .collect(),
        };
        doc.serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for Hierarchy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = HierarchyDoc::deserialize(d)?;
        Hierarchy::from_doc(doc).map_err(|e| D::Error::custom(e.to_string()))
    }
}

impl Hierarchy {
    fn from_doc(doc: HierarchyDoc) -> Result<Hierarchy> {
        let mut edges = Vec::new();
        for key in doc.typing.keys() {
            edges.push(parse_edge_key(key)?);
        }
        let skeleton = Skeleton::new(doc.graphs.keys().cloned(), edges)?;
        let mut homs = BTreeMap::new();
        for (key, raw) in &doc.typing {
            let e = parse_edge_key(key)?;
            let src = doc.graphs.get(&e.0).ok_or_else(|| {
                Error::SchemaError(format!("typing {key} references unknown graph {}", e.0))
            })?;
            let tgt = doc.graphs.get(&e.1).ok_or_else(|| {
                Error::SchemaError(format!("typing {key} references unknown graph {}", e.1))
            })?;
            let hom = Homomorphism::new(src.clone(), tgt.clone(), id_map(raw))
                .map_err(|err| Error::SchemaError(format!("typing {key}: {err}")))?;
            homs.insert(e, hom);
        }
        make_hierarchy(skeleton, doc.graphs, homs)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("hierarchy serialization cannot fail")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Hierarchy> {
        serde_json::from_slice(bytes)
            .map_err(|e| Error::ParseError(format!("hierarchy document: {e}")))
    }
}

/// Document shape mirroring the hierarchy format with rules on the nodes and
/// `(λ, π, ρ)` node maps on the edges.
#[derive(serde::Serialize, serde::Deserialize)]
struct RuleHierarchyDoc {
    rules: BTreeMap<String, Rule>,
    homs: BTreeMap<String, RuleHomDoc>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct RuleHomDoc {
    lambda: BTreeMap<String, String>,
    pi: BTreeMap<String, String>,
    rho: BTreeMap<String, String>,
}

impl serde::Serialize for RuleHierarchy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let to_raw = |h: &Homomorphism| {
            h.node_map().iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
        };
        let doc = RuleHierarchyDoc {
            rules: self.rules.clone(),
            homs: self
                .homs
                .iter()
                .map(|(e, rh)| {
                    (
                        edge_key(e),
                        RuleHomDoc {
                            lambda: to_raw(&rh.lambda),
                            pi: to_raw(&rh.pi),
                            rho: to_raw(&rh.rho),
                        },
                    )
                })
                .collect(),
        };
        doc.serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for RuleHierarchy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = RuleHierarchyDoc::deserialize(d)?;
        RuleHierarchy::from_doc(doc).map_err(|e| D::Error::custom(e.to_string()))
    }
}

impl RuleHierarchy {
    fn from_doc(doc: RuleHierarchyDoc) -> Result<RuleHierarchy> {
        let mut edges = Vec::new();
        for key in doc.homs.keys() {
            edges.push(parse_edge_key(key)?);
        }
        let skeleton = Skeleton::new(doc.rules.keys().cloned(), edges)?;
        let mut homs = BTreeMap::new();
        for (key, raw) in &doc.homs {
            let e = parse_edge_key(key)?;
            let (src, tgt) = (&doc.rules[&e.0], &doc.rules[&e.1]);
            let rh = RuleHomomorphism::new(
                src,
                tgt,
                Homomorphism::new(src.lhs().clone(), tgt.lhs().clone(), id_map(&raw.lambda))
                    .map_err(|err| Error::SchemaError(format!("hom {key} λ: {err}")))?,
                Homomorphism::new(
                    src.preserved().clone(),
                    tgt.preserved().clone(),
                    id_map(&raw.pi),
                )
                .map_err(|err| Error::SchemaError(format!("hom {key} π: {err}")))?,
                Homomorphism::new(src.rhs().clone(), tgt.rhs().clone(), id_map(&raw.rho))
                    .map_err(|err| Error::SchemaError(format!("hom {key} ρ: {err}")))?,
            )?;
            homs.insert(e, rh);
        }
        make_rule_hierarchy(skeleton, doc.rules.clone(), homs)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("rule hierarchy serialization cannot fail")
    }

    pub fn from_json(bytes: &[u8]) -> Result<RuleHierarchy> {
        serde_json::from_slice(bytes)
            .map_err(|e| Error::ParseError(format!("rule hierarchy document: {e}")))
    }
}

/// Builds and validates a hierarchy: every arrow must connect the declared
/// graphs and all parallel path composites must agree.
pub fn make_hierarchy(
    skeleton: Skeleton,
    graphs: BTreeMap<String, Graph>,
    homs: BTreeMap<EdgeName, Homomorphism>,
) -> Result<Hierarchy> {
    for v in skeleton.nodes() {
        if !graphs.contains_key(v) {
            return Err(Error::SchemaError(format!("skeleton node {v} has no graph")));
        }
    }
    for (s, t) in skeleton.edges() {
        let Some(h) = homs.get(&(s.clone(), t.clone())) else {
            return Err(Error::SchemaError(format!("edge ({s}, {t}) has no homomorphism")));
        };
        if h.source() != &graphs[s] || h.target() != &graphs[t] {
            return Err(Error::SchemaError(format!(
                "homomorphism on ({s}, {t}) does not connect the declared graphs"
            )));
        }
    }
    let hierarchy = Hierarchy { skeleton, graphs, homs };
    hierarchy.check_commutativity()?;
    Ok(hierarchy)
}

impl Hierarchy {
    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn graph(&self, v: &str) -> Option<&Graph> {
        self.graphs.get(v)
    }

    pub fn graphs(&self) -> impl Iterator<Item = (&String, &Graph)> {
        self.graphs.iter()
    }

    pub fn hom(&self, s: &str, t: &str) -> Option<&Homomorphism> {
        self.homs.get(&(s.to_string(), t.to_string()))
    }

    pub fn homs(&self) -> impl Iterator<Item = (&EdgeName, &Homomorphism)> {
        self.homs.iter()
    }

    /// Composite typing arrow along any path `from → to`; parallel paths are
    /// equal by the commutativity invariant. Identity when `from == to`.
    pub fn composite(&self, from: &str, to: &str) -> Result<Homomorphism> {
        if from == to {
            return Ok(Homomorphism::identity(&self.graphs[from]));
        }
        let paths = self.skeleton.paths(from, to);
        let Some(path) = paths.first() else {
            return Err(Error::DomainMismatch(format!("no path from {from} to {to}")));
        };
        self.composite_along(path)
    }

    fn composite_along(&self, path: &[EdgeName]) -> Result<Homomorphism> {
        let mut acc: Option<Homomorphism> = None;
        for e in path {
            let h = &self.homs[e];
            acc = Some(match acc {
                None => h.clone(),
                Some(prev) => compose(&prev, h)?,
            });
        }
        acc.ok_or_else(|| Error::DomainMismatch("empty path".into()))
    }

    fn check_commutativity(&self) -> Result<()> {
        for u in self.skeleton.nodes() {
            for v in self.skeleton.nodes() {
                if u == v {
                    continue;
                }
                let paths = self.skeleton.paths(u, v);
                if paths.len() < 2 {
                    continue;
                }
                let first = self.composite_along(&paths[0])?;
                for later in &paths[1..] {
                    let other = self.composite_along(later)?;
                    if other.node_map() != first.node_map() {
                        return Err(Error::CommutativityViolation(format!(
                            "paths {:?} and {:?} from {u} to {v} disagree",
                            paths[0], later
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A `(λ, π, ρ)` triple between two rules, commuting with both legs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleHomomorphism {
    pub lambda: Homomorphism,
    pub pi: Homomorphism,
    pub rho: Homomorphism,
}

impl RuleHomomorphism {
    pub fn new(source: &Rule, target: &Rule, lambda: Homomorphism, pi: Homomorphism, rho: Homomorphism) -> Result<Self> {
        let rh = RuleHomomorphism { lambda, pi, rho };
        rh.validate(source, target)?;
        Ok(rh)
    }

    pub fn validate(&self, source: &Rule, target: &Rule) -> Result<()> {
        if self.lambda.source() != source.lhs()
            || self.lambda.target() != target.lhs()
            || self.pi.source() != source.preserved()
            || self.pi.target() != target.preserved()
            || self.rho.source() != source.rhs()
            || self.rho.target() != target.rhs()
        {
            return Err(Error::RuleHomViolation(
                "component arrows do not connect the rule parts".into(),
            ));
        }
        for p in source.preserved().node_ids() {
            if self.lambda.apply(source.r_minus().apply(p))
                != target.r_minus().apply(self.pi.apply(p))
            {
                return Err(Error::RuleHomViolation(format!(
                    "left square does not commute at {p}"
                )));
            }
            if target.r_plus().apply(self.pi.apply(p)) != self.rho.apply(source.r_plus().apply(p))
            {
                return Err(Error::RuleHomViolation(format!(
                    "right square does not commute at {p}"
                )));
            }
        }
        Ok(())
    }

    /// Componentwise composition `other ∘ self`.
    pub fn then(&self, other: &RuleHomomorphism) -> Result<RuleHomomorphism> {
        Ok(RuleHomomorphism {
            lambda: compose(&self.lambda, &other.lambda)?,
            pi: compose(&self.pi, &other.pi)?,
            rho: compose(&self.rho, &other.rho)?,
        })
    }
}

/// A DAG of rules with commuting rule homomorphisms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleHierarchy {
    skeleton: Skeleton,
    rules: BTreeMap<String, Rule>,
    homs: BTreeMap<EdgeName, RuleHomomorphism>,
}

/// Builds and validates a rule hierarchy: both squares per edge plus
/// componentwise path commutativity.
pub fn make_rule_hierarchy(
    skeleton: Skeleton,
    rules: BTreeMap<String, Rule>,
    homs: BTreeMap<EdgeName, RuleHomomorphism>,
) -> Result<RuleHierarchy> {
    for v in skeleton.nodes() {
        if !rules.contains_key(v) {
            return Err(Error::SchemaError(format!("skeleton node {v} has no rule")));
        }
    }
    for (s, t) in skeleton.edges() {
        let Some(rh) = homs.get(&(s.clone(), t.clone())) else {
            return Err(Error::SchemaError(format!("edge ({s}, {t}) has no rule homomorphism")));
        };
        rh.validate(&rules[s], &rules[t])
            .map_err(|e| Error::RuleHomViolation(format!("edge ({s}, {t}): {e}")))?;
    }
    let rh = RuleHierarchy { skeleton, rules, homs };
    rh.check_commutativity()?;
    Ok(rh)
}

impl RuleHierarchy {
    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn rule(&self, v: &str) -> Option<&Rule> {
        self.rules.get(v)
    }

    pub fn rules(&self) -> impl Iterator<Item = (&String, &Rule)> {
        self.rules.iter()
    }

    pub fn hom(&self, s: &str, t: &str) -> Option<&RuleHomomorphism> {
        self.homs.get(&(s.to_string(), t.to_string()))
    }

    /// The identity rule hierarchy over a hierarchy's skeleton: the empty
    /// rule everywhere, empty homs on the edges.
    pub fn identity_over(h: &Hierarchy) -> RuleHierarchy {
        let rules: BTreeMap<String, Rule> =
            h.skeleton().nodes().map(|v| (v.clone(), Rule::empty())).collect();
        let empty = Homomorphism::identity(&Graph::new());
        let homs = h
            .skeleton()
            .edges()
            .map(|e| {
                (
                    e.clone(),
                    RuleHomomorphism {
                        lambda: empty.clone(),
                        pi: empty.clone(),
                        rho: empty.clone(),
                    },
                )
            })
            .collect();
        RuleHierarchy { skeleton: h.skeleton().clone(), rules, homs }
    }

    /// Per-node reversal with transposed `(ρ, π, λ)` homs. Involutive.
    pub fn reverse(&self) -> RuleHierarchy {
        RuleHierarchy {
            skeleton: self.skeleton.clone(),
            rules: self.rules.iter().map(|(v, r)| (v.clone(), r.reverse())).collect(),
            homs: self
                .homs
                .iter()
                .map(|(e, rh)| {
                    (
                        e.clone(),
                        RuleHomomorphism {
                            lambda: rh.rho.clone(),
                            pi: rh.pi.clone(),
                            rho: rh.lambda.clone(),
                        },
                    )
                })
                .collect(),
        }
    }

    fn check_commutativity(&self) -> Result<()> {
        for u in self.skeleton.nodes() {
            for v in self.skeleton.nodes() {
                if u == v {
                    continue;
                }
                let paths = self.skeleton.paths(u, v);
                if paths.len() < 2 {
                    continue;
                }
                let first = self.composite_along(&paths[0])?;
                for later in &paths[1..] {
                    let other = self.composite_along(later)?;
                    if other.lambda.node_map() != first.lambda.node_map()
                        || other.pi.node_map() != first.pi.node_map()
                        || other.rho.node_map() != first.rho.node_map()
                    {
                        return Err(Error::CommutativityViolation(format!(
                            "rule homomorphism paths {:?} and {:?} from {u} to {v} disagree",
                            paths[0], later
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn composite_along(&self, path: &[EdgeName]) -> Result<RuleHomomorphism> {
        let mut acc: Option<RuleHomomorphism> = None;
        for e in path {
            let h = &self.homs[e];
            acc = Some(match acc {
                None => h.clone(),
                Some(prev) => prev.then(h)?,
            });
        }
        acc.ok_or_else(|| Error::DomainMismatch("empty path".into()))
    }
}

/// One mono instance per skeleton node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstanceAssignment {
    monos: BTreeMap<String, Homomorphism>,
}

impl InstanceAssignment {
    pub fn new(monos: BTreeMap<String, Homomorphism>) -> Self {
        InstanceAssignment { monos }
    }

    pub fn get(&self, v: &str) -> Option<&Homomorphism> {
        self.monos.get(v)
    }

    pub fn insert(&mut self, v: String, m: Homomorphism) {
        self.monos.insert(v, m);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Homomorphism)> {
        self.monos.iter()
    }
}

/// Why a rule hierarchy fails to apply at one edge.
#[derive(Debug, Clone)]
pub struct EdgeFailure {
    pub edge: EdgeName,
    pub reason: String,
}

/// The result of an applicability check: per-edge failures plus, on success,
/// the provisional per-node records and the unique per-edge arrows between
/// the restrictive results.
#[derive(Debug)]
pub struct ApplicabilityReport {
    pub failures: Vec<EdgeFailure>,
    records: BTreeMap<String, RewriteRecord>,
    homs_minus: BTreeMap<EdgeName, Homomorphism>,
}

impl ApplicabilityReport {
    pub fn applicable(&self) -> bool {
        self.failures.is_empty()
    }
}

/// The unique arrow between two restrictive-phase complements induced by a
/// base arrow and the pattern-level `π`: preserved copies follow `π`, every
/// other node needs exactly one fiber over its base image.
pub(crate) fn restrictive_transfer(
    emb_s: &Homomorphism,
    proj_s: &Homomorphism,
    emb_t: &Homomorphism,
    proj_t: &Homomorphism,
    base: &Homomorphism,
    pi: &Homomorphism,
) -> std::result::Result<Homomorphism, String> {
    let mut map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut preserved_image: BTreeMap<&NodeId, &NodeId> = BTreeMap::new();
    for p in emb_s.source().node_ids() {
        preserved_image.insert(emb_s.apply(p), emb_t.apply(pi.apply(p)));
    }
    for x in proj_s.source().node_ids() {
        let image = match preserved_image.get(x) {
            Some(y) => (*y).clone(),
            None => {
                let over = base.apply(proj_s.apply(x));
                let fibers = proj_t.preimages(over);
                match fibers.as_slice() {
                    [y] => (*y).clone(),
                    [] => return Err(format!("node {x}: image {over} was deleted in the target")),
                    _ => {
                        return Err(format!(
                            "node {x}: image {over} has {} clones in the target, choice is ambiguous",
                            fibers.len()
                        ))
                    }
                }
            }
        };
        map.insert(x.clone(), image);
    }
    let arrow =
        Homomorphism::new(proj_s.source().clone(), proj_t.source().clone(), map)
            .map_err(|e| format!("induced arrow is not a homomorphism: {e}"))?;
    // Both squares must commute: over the base and under the patterns.
    for x in arrow.source().node_ids() {
        if proj_t.apply(arrow.apply(x)) != base.apply(proj_s.apply(x)) {
            return Err(format!("induced arrow does not commute with the base at {x}"));
        }
    }
    for p in emb_s.source().node_ids() {
        if arrow.apply(emb_s.apply(p)) != emb_t.apply(pi.apply(p)) {
            return Err(format!("induced arrow does not commute with the patterns at {p}"));
        }
    }
    Ok(arrow)
}

/// Checks whether `r` applies to `h` through `i`: instances must commute with
/// the typing arrows and every edge must admit the unique arrow between the
/// restrictive results.
pub fn check_applicability(
    h: &Hierarchy,
    r: &RuleHierarchy,
    i: &InstanceAssignment,
) -> Result<ApplicabilityReport> {
    if h.skeleton() != r.skeleton() {
        return Err(Error::DomainMismatch(
            "hierarchy and rule hierarchy have different skeletons".into(),
        ));
    }
    let mut failures = Vec::new();
    let mut records = BTreeMap::new();
    for v in h.skeleton().nodes() {
        let Some(m) = i.get(v) else {
            return Err(Error::DomainMismatch(format!("no instance for node {v}")));
        };
        match apply_rule(&h.graphs[v], &r.rules[v], m) {
            Ok(rec) => {
                records.insert(v.clone(), rec);
            }
            Err(e) => failures.push(EdgeFailure {
                edge: (v.clone(), v.clone()),
                reason: format!("rule does not apply at node {v}: {e}"),
            }),
        }
    }
    if !failures.is_empty() {
        return Ok(ApplicabilityReport { failures, records, homs_minus: BTreeMap::new() });
    }

    let mut homs_minus = BTreeMap::new();
    for (s, t) in h.skeleton().edges() {
        let edge = (s.clone(), t.clone());
        let typing = &h.homs[&edge];
        let rh = &r.homs[&edge];
        let (m_s, m_t) = (i.get(s).expect("checked"), i.get(t).expect("checked"));

        let commutes = r.rules[s]
            .lhs()
            .node_ids()
            .all(|l| typing.apply(m_s.apply(l)) == m_t.apply(rh.lambda.apply(l)));
        if !commutes {
            failures.push(EdgeFailure {
                edge,
                reason: "instances do not commute with the typing arrow".into(),
            });
            continue;
        }

        let (rec_s, rec_t) = (&records[s], &records[t]);
        match restrictive_transfer(
            &rec_s.m_minus,
            &rec_s.g_arrow_minus,
            &rec_t.m_minus,
            &rec_t.g_arrow_minus,
            typing,
            &rh.pi,
        ) {
            Ok(h_minus) => {
                homs_minus.insert(edge, h_minus);
            }
            Err(reason) => failures.push(EdgeFailure { edge, reason }),
        }
    }
    Ok(ApplicabilityReport { failures, records, homs_minus })
}

/// A full record of one rule hierarchy application.
#[derive(Debug, Clone)]
pub struct HierarchyRewriteRecord {
    pub rules: RuleHierarchy,
    pub origin: Hierarchy,
    pub records: BTreeMap<String, RewriteRecord>,
    pub homs_minus: BTreeMap<EdgeName, Homomorphism>,
    pub homs_plus: BTreeMap<EdgeName, Homomorphism>,
    pub result: Hierarchy,
}

impl HierarchyRewriteRecord {
    pub fn instances(&self) -> InstanceAssignment {
        InstanceAssignment::new(
            self.records.iter().map(|(v, rec)| (v.clone(), rec.m.clone())).collect(),
        )
    }

    pub fn rhs_instances(&self) -> InstanceAssignment {
        InstanceAssignment::new(
            self.records.iter().map(|(v, rec)| (v.clone(), rec.m_plus.clone())).collect(),
        )
    }
}

/// Applies a rule hierarchy: one rule application per node, the unique
/// connecting arrows per edge, and a revalidated result hierarchy.
pub fn apply_rule_hierarchy(
    h: &Hierarchy,
    r: &RuleHierarchy,
    i: &InstanceAssignment,
) -> Result<HierarchyRewriteRecord> {
    apply_rule_hierarchy_inner(h, r, i, None)
}

/// Same as [`apply_rule_hierarchy`], renaming each node's result so its
/// right-hand instance lands on the given ids.
pub fn apply_rule_hierarchy_with_result_ids(
    h: &Hierarchy,
    r: &RuleHierarchy,
    i: &InstanceAssignment,
    pins: &BTreeMap<String, BTreeMap<NodeId, NodeId>>,
) -> Result<HierarchyRewriteRecord> {
    apply_rule_hierarchy_inner(h, r, i, Some(pins))
}

fn apply_rule_hierarchy_inner(
    h: &Hierarchy,
    r: &RuleHierarchy,
    i: &InstanceAssignment,
    pins: Option<&BTreeMap<String, BTreeMap<NodeId, NodeId>>>,
) -> Result<HierarchyRewriteRecord> {
    let report = check_applicability(h, r, i)?;
    if !report.applicable() {
        let reasons: Vec<String> = report
            .failures
            .iter()
            .map(|f| format!("({}, {}): {}", f.edge.0, f.edge.1, f.reason))
            .collect();
        return Err(Error::NotApplicable(reasons.join("; ")));
    }
    let mut records = report.records;
    if let Some(pins) = pins {
        for (v, rec) in records.iter_mut() {
            if let Some(rhs_ids) = pins.get(v) {
                *rec = rec.with_result_ids(rhs_ids)?;
            }
        }
    }

    let homs_minus = report.homs_minus;
    let mut homs_plus: BTreeMap<EdgeName, Homomorphism> = BTreeMap::new();
    for (s, t) in h.skeleton().edges() {
        let edge = (s.clone(), t.clone());
        let (rec_s, rec_t) = (&records[s], &records[t]);
        let rh = &r.homs[&edge];
        let po = rec_s.expansive_pushout()?;
        let cocone = Cospan::new(
            compose(&homs_minus[&edge], &rec_t.g_arrow_plus)?,
            compose(&rh.rho, &rec_t.m_plus)?,
        )?;
        let h_plus = po_mediator(&po, &cocone)?;
        homs_plus.insert(edge, h_plus);
    }

    let graphs: BTreeMap<String, Graph> =
        records.iter().map(|(v, rec)| (v.clone(), rec.g_plus.clone())).collect();
    let result = make_hierarchy(h.skeleton().clone(), graphs, homs_plus.clone())?;

    Ok(HierarchyRewriteRecord {
        rules: r.clone(),
        origin: h.clone(),
        records,
        homs_minus,
        homs_plus,
        result,
    })
}

/// Reversibility of a hierarchy rewrite: every per-node application must be
/// reversible and the reversed rule hierarchy must be applicable at the
/// right-hand instances, i.e. the expansive-side complements must also admit
/// their unique connecting arrows.
pub fn is_hierarchy_rewrite_reversible(rec: &HierarchyRewriteRecord) -> Result<bool> {
    for node_rec in rec.records.values() {
        if !is_reversible(node_rec)? {
            return Ok(false);
        }
    }
    let report = check_applicability(&rec.result, &rec.rules.reverse(), &rec.rhs_instances())?;
    Ok(report.applicable())
}

/// Undoes a reversible hierarchy rewrite by transposing every record; the
/// result hierarchy is strictly the original one.
pub fn revert_hierarchy_rewrite(rec: &HierarchyRewriteRecord) -> Result<HierarchyRewriteRecord> {
    if !is_hierarchy_rewrite_reversible(rec)? {
        return Err(Error::NotReversible("hierarchy rewrite fails the reversibility check".into()));
    }
    let records: BTreeMap<String, RewriteRecord> = rec
        .records
        .iter()
        .map(|(v, r)| Ok((v.clone(), revert(r)?)))
        .collect::<Result<_>>()?;
    Ok(HierarchyRewriteRecord {
        rules: rec.rules.reverse(),
        origin: rec.result.clone(),
        records,
        homs_minus: rec.homs_minus.clone(),
        homs_plus: rec.origin.homs.clone(),
        result: rec.origin.clone(),
    })
}
