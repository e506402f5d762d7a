//! Categorical constructions over attributed simple graphs.
//!
//! Pushouts glue two graphs along a shared part (merging), pullbacks
//! intersect two graphs over a shared target, and the final pullback
//! complement realizes deletion and cloning against a mono instance. Each
//! construction is elementwise and deterministic: merged nodes are named by
//! joining their constituent ids with `_`, pullback pairs by `&`, clones by
//! `_c1..ck`, and any residual collision is resolved with a `#k` suffix, so
//! repeated runs produce bit-identical results.
//!
//! The decision procedures `is_pushout`, `is_pullback` and `is_final_pbc`
//! recompute the canonical object from two of the arrows and test whether the
//! induced mediating arrow to or from the candidate apex is an isomorphism.

use std::collections::{BTreeMap, BTreeSet};

use crate::attr::AttrSet;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::hom::{compose, Homomorphism};

/// A span `B ← A → C`: two homomorphisms out of a shared source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    left: Homomorphism,
    right: Homomorphism,
}

impl Span {
    pub fn new(left: Homomorphism, right: Homomorphism) -> Result<Self> {
        if left.source() != right.source() {
            return Err(Error::InvalidSpan("legs do not share a source".into()));
        }
        Ok(Span { left, right })
    }

    pub fn left(&self) -> &Homomorphism {
        &self.left
    }

    pub fn right(&self) -> &Homomorphism {
        &self.right
    }

    pub fn source(&self) -> &Graph {
        self.left.source()
    }
}

/// A cospan `B → D ← C`: two homomorphisms into a shared target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cospan {
    left: Homomorphism,
    right: Homomorphism,
}

impl Cospan {
    pub fn new(left: Homomorphism, right: Homomorphism) -> Result<Self> {
        if left.target() != right.target() {
            return Err(Error::InvalidCospan("legs do not share a target".into()));
        }
        Ok(Cospan { left, right })
    }

    pub fn left(&self) -> &Homomorphism {
        &self.left
    }

    pub fn right(&self) -> &Homomorphism {
        &self.right
    }

    pub fn target(&self) -> &Graph {
        self.left.target()
    }
}

/// A commuting-square candidate
///
/// ```text
///         top
///      A ----> B
/// left |       | right
///      v       v
///      C ----> D
///        bottom
/// ```
///
/// Endpoint compatibility is enforced at construction; commutation is checked
/// by the decision procedures, which report `NonCommutingSquare`.
#[derive(Debug, Clone)]
pub struct Square {
    pub top: Homomorphism,
    pub left: Homomorphism,
    pub right: Homomorphism,
    pub bottom: Homomorphism,
}

impl Square {
    pub fn new(
        top: Homomorphism,
        left: Homomorphism,
        right: Homomorphism,
        bottom: Homomorphism,
    ) -> Result<Self> {
        if top.source() != left.source()
            || top.target() != right.source()
            || left.target() != bottom.source()
            || right.target() != bottom.target()
        {
            return Err(Error::DomainMismatch("square corners do not line up".into()));
        }
        Ok(Square { top, left, right, bottom })
    }

    pub fn commutes(&self) -> bool {
        self.top
            .source()
            .node_ids()
            .all(|a| self.right.apply(self.top.apply(a)) == self.bottom.apply(self.left.apply(a)))
    }

    fn require_commuting(&self) -> Result<()> {
        if self.commutes() {
            Ok(())
        } else {
            Err(Error::NonCommutingSquare(
                "composite arrows around the square disagree".into(),
            ))
        }
    }
}

/// Result of a pushout: the input span plus the two legs into the apex.
#[derive(Debug, Clone)]
pub struct Pushout {
    pub span: Span,
    /// `B → apex`
    pub left_leg: Homomorphism,
    /// `C → apex`
    pub right_leg: Homomorphism,
}

impl Pushout {
    pub fn apex(&self) -> &Graph {
        self.left_leg.target()
    }

    pub fn legs(&self) -> Result<Cospan> {
        Cospan::new(self.left_leg.clone(), self.right_leg.clone())
    }
}

/// Result of a pullback: the input cospan plus the two projections.
#[derive(Debug, Clone)]
pub struct Pullback {
    pub cospan: Cospan,
    /// `apex → B`
    pub left_leg: Homomorphism,
    /// `apex → C`
    pub right_leg: Homomorphism,
}

impl Pullback {
    pub fn apex(&self) -> &Graph {
        self.left_leg.source()
    }
}

/// Result of a final pullback complement for `r: P → L` and `m: L ↣ G`.
#[derive(Debug, Clone)]
pub struct FinalPbc {
    /// `m⁻: P ↣ G⁻`
    pub embedding: Homomorphism,
    /// `g⁻: G⁻ → G`
    pub projection: Homomorphism,
}

impl FinalPbc {
    pub fn complement(&self) -> &Graph {
        self.embedding.target()
    }
}

fn fresh_id(base: String, used: &mut BTreeSet<NodeId>) -> NodeId {
    let mut candidate = NodeId::new(base.clone());
    let mut k = 1;
    while used.contains(&candidate) {
        candidate = NodeId::new(format!("{base}#{k}"));
        k += 1;
    }
    used.insert(candidate.clone());
    candidate
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Side {
    Left,
    Right,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, i: usize, j: usize) {
        let (ri, rj) = (self.find(i), self.find(j));
        if ri != rj {
            self.parent[ri.max(rj)] = ri.min(rj);
        }
    }
}

/// Computes the pushout of a span `B ← A → C`.
///
/// The apex is the quotient of `B ⊔ C` by the equivalence generated by
/// `left(a) ~ right(a)`; class attributes are per-key unions and an edge is
/// present between two classes whenever some pair of representatives carries
/// it. A class is named after its `B`-side constituents when it has any
/// (sorted distinct ids joined with `_`, a single id kept verbatim), after
/// its `C`-side constituents otherwise. Rule application always passes the
/// host graph on the left, so host ids survive and merges of host nodes `a`
/// and `b` come out as `a_b`.
pub fn pushout(span: &Span) -> Result<Pushout> {
    let b = span.left.target();
    let c = span.right.target();

    let b_ids: Vec<NodeId> = b.node_ids().cloned().collect();
    let c_ids: Vec<NodeId> = c.node_ids().cloned().collect();
    let b_index: BTreeMap<&NodeId, usize> = b_ids.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let c_index: BTreeMap<&NodeId, usize> =
        c_ids.iter().enumerate().map(|(i, n)| (n, i + b_ids.len())).collect();

    let mut uf = UnionFind::new(b_ids.len() + c_ids.len());
    for a in span.source().node_ids() {
        uf.union(b_index[span.left.apply(a)], c_index[span.right.apply(a)]);
    }

    // Group members per class, keyed by root.
    let mut classes: BTreeMap<usize, Vec<(Side, NodeId)>> = BTreeMap::new();
    for (n, &i) in &b_index {
        classes.entry(uf.find(i)).or_default().push((Side::Left, (*n).clone()));
    }
    for (n, &i) in &c_index {
        classes.entry(uf.find(i)).or_default().push((Side::Right, (*n).clone()));
    }

    // Name classes deterministically: id-keeping classes first so generated
    // names yield on collision.
    let mut class_list: Vec<(Vec<(Side, NodeId)>, String, bool)> = classes
        .into_values()
        .map(|mut members| {
            members.sort();
            let left_ids: BTreeSet<&str> = members
                .iter()
                .filter(|(side, _)| *side == Side::Left)
                .map(|(_, n)| n.as_str())
                .collect();
            let naming: BTreeSet<&str> = if left_ids.is_empty() {
                members.iter().map(|(_, n)| n.as_str()).collect()
            } else {
                left_ids
            };
            let keeper = naming.len() == 1;
            let name = naming.into_iter().collect::<Vec<_>>().join("_");
            (members, name, keeper)
        })
        .collect();
    class_list.sort_by(|a, b| (!a.2, &a.0).cmp(&(!b.2, &b.0)));

    let mut used: BTreeSet<NodeId> = BTreeSet::new();
    let mut b_map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut c_map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut apex_nodes: BTreeMap<NodeId, AttrSet> = BTreeMap::new();
    for (members, name, _) in &class_list {
        let id = fresh_id(name.clone(), &mut used);
        let mut attrs = AttrSet::new();
        for (side, n) in members {
            let member_attrs = match side {
                Side::Left => b.node(n).expect("member of B"),
                Side::Right => c.node(n).expect("member of C"),
            };
            attrs = attrs.union(member_attrs);
            match side {
                Side::Left => b_map.insert(n.clone(), id.clone()),
                Side::Right => c_map.insert(n.clone(), id.clone()),
            };
        }
        apex_nodes.insert(id, attrs);
    }

    let mut apex_edges: BTreeMap<(NodeId, NodeId), AttrSet> = BTreeMap::new();
    for ((x, y), attrs) in b.edges() {
        let key = (b_map[x].clone(), b_map[y].clone());
        let entry = apex_edges.entry(key).or_default();
        *entry = entry.union(attrs);
    }
    for ((x, y), attrs) in c.edges() {
        let key = (c_map[x].clone(), c_map[y].clone());
        let entry = apex_edges.entry(key).or_default();
        *entry = entry.union(attrs);
    }

    let apex = Graph::from_parts(apex_nodes, apex_edges);
    let left_leg = Homomorphism::new(b.clone(), apex.clone(), b_map)
        .expect("pushout left leg is a homomorphism by construction");
    let right_leg = Homomorphism::new(c.clone(), apex, c_map)
        .expect("pushout right leg is a homomorphism by construction");
    Ok(Pushout { span: span.clone(), left_leg, right_leg })
}

/// Computes the pullback of a cospan `B → D ← C`.
///
/// The apex consists of the pairs `(b, c)` agreeing in `D`, named `b&c`, with
/// per-key attribute intersections; an edge is present when both projections
/// carry it.
pub fn pullback(cospan: &Cospan) -> Result<Pullback> {
    let b = cospan.left.source();
    let c = cospan.right.source();

    let mut pairs: Vec<(NodeId, NodeId)> = Vec::new();
    for bn in b.node_ids() {
        for cn in c.node_ids() {
            if cospan.left.apply(bn) == cospan.right.apply(cn) {
                pairs.push((bn.clone(), cn.clone()));
            }
        }
    }
    pairs.sort();

    let mut used: BTreeSet<NodeId> = BTreeSet::new();
    let mut pair_id: BTreeMap<(NodeId, NodeId), NodeId> = BTreeMap::new();
    let mut apex_nodes: BTreeMap<NodeId, AttrSet> = BTreeMap::new();
    for (bn, cn) in &pairs {
        let id = fresh_id(format!("{bn}&{cn}"), &mut used);
        let attrs = b.node(bn).expect("pair member").intersection(c.node(cn).expect("pair member"));
        pair_id.insert((bn.clone(), cn.clone()), id.clone());
        apex_nodes.insert(id, attrs);
    }

    let mut apex_edges: BTreeMap<(NodeId, NodeId), AttrSet> = BTreeMap::new();
    for (b1, c1) in &pairs {
        for (b2, c2) in &pairs {
            if let (Some(b_attrs), Some(c_attrs)) = (b.edge(b1, b2), c.edge(c1, c2)) {
                apex_edges.insert(
                    (pair_id[&(b1.clone(), c1.clone())].clone(), pair_id[&(b2.clone(), c2.clone())].clone()),
                    b_attrs.intersection(c_attrs),
                );
            }
        }
    }

    let apex = Graph::from_parts(apex_nodes, apex_edges);
    let left_map = pairs.iter().map(|(bn, cn)| (pair_id[&(bn.clone(), cn.clone())].clone(), bn.clone())).collect();
    let right_map = pairs.iter().map(|(bn, cn)| (pair_id[&(bn.clone(), cn.clone())].clone(), cn.clone())).collect();
    let left_leg = Homomorphism::new(apex.clone(), b.clone(), left_map)
        .expect("pullback left projection is a homomorphism by construction");
    let right_leg = Homomorphism::new(apex, c.clone(), right_map)
        .expect("pullback right projection is a homomorphism by construction");
    Ok(Pullback { cospan: cospan.clone(), left_leg, right_leg })
}

/// Computes the final pullback complement of `r: P → L` along a mono
/// `m: L ↣ G`, yielding `P ↣ G⁻ → G`.
///
/// `G⁻` consists of one node per `P`-node (cloning when `r` identifies
/// several) plus every `G`-node outside the match. A clone keeps its host id
/// when it is the only preimage and is named `<host>_c1..ck` otherwise.
/// Attributes and edges are subtracted: whatever `L` requires but `P` drops
/// disappears, everything else is copied, and every copy of a node inherits
/// all incident edges not constrained by the pattern.
pub fn final_pbc(r: &Homomorphism, m: &Homomorphism) -> Result<FinalPbc> {
    if r.target() != m.source() {
        return Err(Error::DomainMismatch(
            "final_pbc: rule leg target differs from instance source".into(),
        ));
    }
    if !m.is_mono() {
        return Err(Error::NotMono("final_pbc requires a mono instance".into()));
    }
    let p = r.source();
    let l = r.target();
    let g = m.target();

    let matched: BTreeSet<&NodeId> = l.node_ids().map(|ln| m.apply(ln)).collect();

    // Group the preimages of every L-node, in sorted order.
    let mut preimages: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for pn in p.node_ids() {
        preimages.entry(r.apply(pn)).or_default().push(pn);
    }

    let mut used: BTreeSet<NodeId> = BTreeSet::new();
    let mut nodes: BTreeMap<NodeId, AttrSet> = BTreeMap::new();
    let mut p_map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut g_map: BTreeMap<NodeId, NodeId> = BTreeMap::new();

    // Id keepers first: unmatched nodes and single-preimage copies.
    for gn in g.node_ids() {
        if !matched.contains(gn) {
            used.insert(gn.clone());
        }
    }
    let mut generated: Vec<(NodeId, NodeId, AttrSet)> = Vec::new(); // (p node, proposed, attrs)
    for (ln, ps) in &preimages {
        let gn = m.apply(ln);
        let g_attrs = g.node(gn).expect("match image").clone();
        let l_attrs = l.node(ln).expect("pattern node");
        for (i, pn) in ps.iter().enumerate() {
            let p_attrs = p.node(pn).expect("preserved node");
            let attrs = g_attrs.difference(&l_attrs.difference(p_attrs));
            if ps.len() == 1 {
                used.insert(gn.clone());
                nodes.insert(gn.clone(), attrs);
                p_map.insert((*pn).clone(), gn.clone());
                g_map.insert(gn.clone(), gn.clone());
            } else {
                generated.push(((*pn).clone(), format!("{gn}_c{}", i + 1).into(), attrs));
            }
        }
    }
    for (pn, proposal, attrs) in generated {
        let id = fresh_id(proposal.to_string(), &mut used);
        g_map.insert(id.clone(), m.apply(r.apply(&pn)).clone());
        nodes.insert(id.clone(), attrs);
        p_map.insert(pn, id);
    }
    for (gn, attrs) in g.nodes() {
        if !matched.contains(gn) {
            nodes.insert(gn.clone(), attrs.clone());
            g_map.insert(gn.clone(), gn.clone());
        }
    }

    // Edges: one candidate per pair of complement nodes over a G-edge.
    let mut edges: BTreeMap<(NodeId, NodeId), AttrSet> = BTreeMap::new();
    let node_ids: Vec<NodeId> = nodes.keys().cloned().collect();
    let m_inverse: BTreeMap<&NodeId, &NodeId> = l.node_ids().map(|ln| (m.apply(ln), ln)).collect();
    let p_inverse: BTreeMap<&NodeId, &NodeId> = p_map.iter().map(|(pn, cn)| (cn, pn)).collect();
    for u in &node_ids {
        for v in &node_ids {
            let (gu, gv) = (&g_map[u], &g_map[v]);
            let Some(g_attrs) = g.edge(gu, gv) else { continue };
            let attrs = match (p_inverse.get(u), p_inverse.get(v)) {
                (Some(pu), Some(pv)) => {
                    let (lu, lv) = (r.apply(pu), r.apply(pv));
                    match l.edge(lu, lv) {
                        Some(l_attrs) => match p.edge(pu, pv) {
                            Some(p_attrs) => g_attrs.difference(&l_attrs.difference(p_attrs)),
                            None => continue, // pattern drops this edge
                        },
                        None => g_attrs.clone(),
                    }
                }
                _ => g_attrs.clone(),
            };
            edges.insert((u.clone(), v.clone()), attrs);
        }
    }
    // Sanity: edges between unmatched nodes reference only matched images via
    // m_inverse, which is total on matched ids.
    debug_assert!(matched.iter().all(|n| m_inverse.contains_key(*n)));

    let complement = Graph::from_parts(nodes, edges);
    let embedding = Homomorphism::new(p.clone(), complement.clone(), p_map)
        .expect("complement embedding is a homomorphism by construction");
    let projection = Homomorphism::new(complement, g.clone(), g_map)
        .expect("complement projection is a homomorphism by construction");
    Ok(FinalPbc { embedding, projection })
}

/// The unique arrow out of a pushout apex induced by a commuting cocone.
pub fn po_mediator(po: &Pushout, cocone: &Cospan) -> Result<Homomorphism> {
    if cocone.left.source() != po.span.left.target()
        || cocone.right.source() != po.span.right.target()
    {
        return Err(Error::DomainMismatch(
            "cocone legs do not start at the span targets".into(),
        ));
    }
    let mut mediator: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut assign = |class: &NodeId, image: &NodeId| -> Result<()> {
        match mediator.get(class) {
            Some(existing) if existing != image => Err(Error::MediatorIllDefined(format!(
                "class {class} maps to both {existing} and {image}"
            ))),
            _ => {
                mediator.insert(class.clone(), image.clone());
                Ok(())
            }
        }
    };
    for bn in po.span.left.target().node_ids() {
        assign(po.left_leg.apply(bn), cocone.left.apply(bn))?;
    }
    for cn in po.span.right.target().node_ids() {
        assign(po.right_leg.apply(cn), cocone.right.apply(cn))?;
    }
    Homomorphism::new(po.apex().clone(), cocone.target().clone(), mediator)
        .map_err(|e| Error::MediatorIllDefined(format!("mediator is not a homomorphism: {e}")))
}

/// The unique arrow into a pullback apex induced by a commuting cone.
pub fn pb_mediator(pb: &Pullback, cone: &Span) -> Result<Homomorphism> {
    if cone.left.target() != pb.cospan.left.source()
        || cone.right.target() != pb.cospan.right.source()
    {
        return Err(Error::DomainMismatch("cone legs do not end at the cospan sources".into()));
    }
    let pair_lookup: BTreeMap<(NodeId, NodeId), NodeId> = pb
        .apex()
        .node_ids()
        .map(|a| ((pb.left_leg.apply(a).clone(), pb.right_leg.apply(a).clone()), a.clone()))
        .collect();
    let mut mediator: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for x in cone.source().node_ids() {
        let key = (cone.left.apply(x).clone(), cone.right.apply(x).clone());
        match pair_lookup.get(&key) {
            Some(a) => {
                mediator.insert(x.clone(), a.clone());
            }
            None => {
                return Err(Error::MediatorIllDefined(format!(
                    "cone does not commute at {x}: ({}, {}) is not a pullback pair",
                    key.0, key.1
                )))
            }
        }
    }
    Homomorphism::new(cone.source().clone(), pb.apex().clone(), mediator)
        .map_err(|e| Error::MediatorIllDefined(format!("mediator is not a homomorphism: {e}")))
}

/// Decides whether a commuting square is a pushout of its top and left
/// arrows: the mediator from the canonical apex to the candidate corner must
/// be an isomorphism.
pub fn is_pushout(sq: &Square) -> Result<bool> {
    sq.require_commuting()?;
    let po = pushout(&Span::new(sq.top.clone(), sq.left.clone())?)?;
    let cocone = Cospan::new(sq.right.clone(), sq.bottom.clone())?;
    match po_mediator(&po, &cocone) {
        Ok(w) => Ok(w.analysis().iso),
        Err(Error::MediatorIllDefined(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Decides whether a commuting square is a pullback of its right and bottom
/// arrows: the mediator from the candidate corner into the canonical apex
/// must be an isomorphism.
pub fn is_pullback(sq: &Square) -> Result<bool> {
    sq.require_commuting()?;
    let pb = pullback(&Cospan::new(sq.right.clone(), sq.bottom.clone())?)?;
    let cone = Span::new(sq.top.clone(), sq.left.clone())?;
    match pb_mediator(&pb, &cone) {
        Ok(w) => Ok(w.analysis().iso),
        Err(Error::MediatorIllDefined(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Mediator from a pullback-complement candidate into a known final pullback
/// complement of the same `(r, m)` pair.
///
/// `candidate` is the pair `(p: P ↣ K, k: K → G)`, `target` the pair
/// `(m⁻: P ↣ F, f: F → G)`. Matched candidate nodes are routed through their
/// unique `P`-preimage; unmatched ones through the unique `f`-fiber element.
pub fn fpbc_mediator(
    r: &Homomorphism,
    m: &Homomorphism,
    candidate: (&Homomorphism, &Homomorphism),
    target: (&Homomorphism, &Homomorphism),
) -> Result<Homomorphism> {
    let (p_leg, k_leg) = candidate;
    let (embedding, projection) = target;
    let m_inverse: BTreeMap<&NodeId, &NodeId> =
        m.source().node_ids().map(|ln| (m.apply(ln), ln)).collect();

    let mut mediator: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for x in k_leg.source().node_ids() {
        let gx = k_leg.apply(x);
        let image = match m_inverse.get(gx) {
            Some(lx) => {
                let qs: Vec<&NodeId> = r
                    .source()
                    .node_ids()
                    .filter(|q| p_leg.apply(q) == x && r.apply(q) == *lx)
                    .collect();
                match qs.as_slice() {
                    [q] => embedding.apply(q).clone(),
                    _ => {
                        return Err(Error::MediatorIllDefined(format!(
                            "candidate node {x} has {} pattern preimages, expected one",
                            qs.len()
                        )))
                    }
                }
            }
            None => {
                let fibers = projection.preimages(gx);
                match fibers.as_slice() {
                    [y] => (*y).clone(),
                    _ => {
                        return Err(Error::MediatorIllDefined(format!(
                            "target complement has {} fibers over unmatched node {gx}",
                            fibers.len()
                        )))
                    }
                }
            }
        };
        mediator.insert(x.clone(), image);
    }
    Homomorphism::new(k_leg.source().clone(), embedding.target().clone(), mediator)
        .map_err(|e| Error::MediatorIllDefined(format!("mediator is not a homomorphism: {e}")))
}

/// Decides whether a commuting square is a *final* pullback complement
/// square: reading the square as `(r = top: P → L, m = right: L ↣ G)` with
/// candidate complement at the bottom-left corner, the square must be a
/// pullback and the mediator into the canonical final complement must be an
/// isomorphism.
pub fn is_final_pbc(sq: &Square) -> Result<bool> {
    sq.require_commuting()?;
    if !sq.right.is_mono() {
        return Err(Error::NotMono("is_final_pbc requires the instance side to be mono".into()));
    }
    if !is_pullback(sq)? {
        return Ok(false);
    }
    let canonical = final_pbc(&sq.top, &sq.right)?;
    match fpbc_mediator(
        &sq.top,
        &sq.right,
        (&sq.left, &sq.bottom),
        (&canonical.embedding, &canonical.projection),
    ) {
        Ok(w) => Ok(w.analysis().iso),
        Err(Error::MediatorIllDefined(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Factors `f` as a mono after an epi through its image graph. Image node and
/// edge attributes are unions over the fibers.
pub fn image_factorization(f: &Homomorphism) -> Result<(Homomorphism, Homomorphism)> {
    let mut nodes: BTreeMap<NodeId, AttrSet> = BTreeMap::new();
    for (n, attrs) in f.source().nodes() {
        let img = f.apply(n);
        let entry = nodes.entry(img.clone()).or_default();
        *entry = entry.union(attrs);
    }
    let mut edges: BTreeMap<(NodeId, NodeId), AttrSet> = BTreeMap::new();
    for ((a, b), attrs) in f.source().edges() {
        let key = (f.apply(a).clone(), f.apply(b).clone());
        let entry = edges.entry(key).or_default();
        *entry = entry.union(attrs);
    }
    let image = Graph::from_parts(nodes, edges);
    let epi = Homomorphism::new(f.source().clone(), image.clone(), f.node_map().clone())?;
    let mono_map = image.node_ids().map(|n| (n.clone(), n.clone())).collect();
    let mono = Homomorphism::new(image, f.target().clone(), mono_map)?;
    Ok((epi, mono))
}

/// The initial object.
pub fn empty_graph() -> Graph {
    Graph::new()
}

/// The unique arrow from the initial object into `g`.
pub fn initial_arrow(g: &Graph) -> Homomorphism {
    Homomorphism::new(Graph::new(), g.clone(), BTreeMap::new())
        .expect("the empty map is a homomorphism into any graph")
}

/// Convenience: composite along `f; g` with mediator-friendly error.
pub fn composite(f: &Homomorphism, g: &Homomorphism) -> Result<Homomorphism> {
    compose(f, g)
}
