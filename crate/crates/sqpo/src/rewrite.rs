//! Rules and sesqui-pushout rule application.
//!
//! A rule is a span `L ← P → R`: the left leg encodes deletion (L-nodes
//! without preimage) and cloning (non-injective leg), the right leg encodes
//! merging (non-injective leg) and addition (R-nodes without preimage).
//! Application at a mono instance `m: L ↣ G` runs two phases: the restrictive
//! phase builds the final pullback complement `G⁻`, the expansive phase the
//! pushout `G⁺`. The full [`RewriteRecord`] keeps all six objects and six
//! arrows of the application diagram.
//!
//! An application is reversible when the restrictive square is also a pushout
//! and the expansive square is also a final pullback complement; reversible
//! records can be undone exactly, restoring the original graph with its
//! original node ids. Two consecutive applications, the first reversible, can
//! be composed into a single rule; [`compose_rules`] returns the whole
//! construction as a [`CompositionTrace`] so that callers (the audit trail in
//! particular) can reuse the intermediate arrows.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::category::{
    final_pbc, fpbc_mediator, is_final_pbc, is_pushout, po_mediator, pullback, pushout, Cospan,
    Span, Square,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::hom::{compose, Homomorphism};

/// How a rule treats one node of its pattern versus its result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    Preserved,
    Cloned,
    Deleted,
    Merged,
    Added,
}

/// A rewriting rule `L ← P → R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    lhs: Graph,
    preserved: Graph,
    rhs: Graph,
    r_minus: Homomorphism,
    r_plus: Homomorphism,
}

/// Serializable rule document: three graphs plus the two leg node maps.
#[derive(Serialize, Deserialize)]
struct RuleDoc {
    lhs: Graph,
    p: Graph,
    rhs: Graph,
    p_lhs: BTreeMap<String, String>,
    p_rhs: BTreeMap<String, String>,
}

impl Rule {
    pub fn lhs(&self) -> &Graph {
        &self.lhs
    }

    pub fn preserved(&self) -> &Graph {
        &self.preserved
    }

    pub fn rhs(&self) -> &Graph {
        &self.rhs
    }

    /// The restrictive leg `P → L`.
    pub fn r_minus(&self) -> &Homomorphism {
        &self.r_minus
    }

    /// The expansive leg `P → R`.
    pub fn r_plus(&self) -> &Homomorphism {
        &self.r_plus
    }

    /// The identity rule on a graph: preserves everything.
    pub fn identity(g: &Graph) -> Self {
        Rule {
            lhs: g.clone(),
            preserved: g.clone(),
            rhs: g.clone(),
            r_minus: Homomorphism::identity(g),
            r_plus: Homomorphism::identity(g),
        }
    }

    /// The empty rule `∅ ← ∅ → ∅`; applying it leaves any graph unchanged.
    pub fn empty() -> Self {
        Rule::identity(&Graph::new())
    }

    /// Swaps the legs: `R ← P → L`. Involutive.
    pub fn reverse(&self) -> Rule {
        Rule {
            lhs: self.rhs.clone(),
            preserved: self.preserved.clone(),
            rhs: self.lhs.clone(),
            r_minus: self.r_plus.clone(),
            r_plus: self.r_minus.clone(),
        }
    }

    /// Classifies the rule's effect per node, for diagnostics: deleted and
    /// cloned nodes are reported under their `L` id, merged and added nodes
    /// under their `R` id, preserved nodes under their `P` id.
    pub fn classify(&self) -> BTreeMap<NodeId, NodeRole> {
        let mut out = BTreeMap::new();
        for l in self.lhs.node_ids() {
            match self.r_minus.preimages(l).len() {
                0 => {
                    out.insert(l.clone(), NodeRole::Deleted);
                }
                k if k > 1 => {
                    out.insert(l.clone(), NodeRole::Cloned);
                }
                _ => {}
            }
        }
        for r in self.rhs.node_ids() {
            match self.r_plus.preimages(r).len() {
                0 => {
                    out.insert(r.clone(), NodeRole::Added);
                }
                k if k > 1 => {
                    out.insert(r.clone(), NodeRole::Merged);
                }
                _ => {}
            }
        }
        for p in self.preserved.node_ids() {
            let l = self.r_minus.apply(p);
            let r = self.r_plus.apply(p);
            if self.r_minus.preimages(l).len() == 1 && self.r_plus.preimages(r).len() == 1 {
                out.insert(p.clone(), NodeRole::Preserved);
            }
        }
        out
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("rule serialization cannot fail")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Rule> {
        serde_json::from_slice(bytes).map_err(|e| Error::ParseError(format!("rule document: {e}")))
    }
}

impl serde::Serialize for Rule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = RuleDoc {
            lhs: self.lhs.clone(),
            p: self.preserved.clone(),
            rhs: self.rhs.clone(),
            p_lhs: self
                .r_minus
                .node_map()
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            p_rhs: self
                .r_plus
                .node_map()
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        };
        doc.serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for Rule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = RuleDoc::deserialize(d)?;
        let to_map = |m: BTreeMap<String, String>| {
            m.into_iter()
                .map(|(a, b)| (NodeId::from(a), NodeId::from(b)))
                .collect::<BTreeMap<_, _>>()
        };
        make_rule(doc.lhs, doc.p, doc.rhs, to_map(doc.p_lhs), to_map(doc.p_rhs))
            .map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Builds and validates a rule from its three graphs and two leg node maps.
pub fn make_rule(
    lhs: Graph,
    preserved: Graph,
    rhs: Graph,
    p_lhs: BTreeMap<NodeId, NodeId>,
    p_rhs: BTreeMap<NodeId, NodeId>,
) -> Result<Rule> {
    let r_minus = Homomorphism::new(preserved.clone(), lhs.clone(), p_lhs)
        .map_err(|e| Error::InvalidRule(format!("left leg: {e}")))?;
    let r_plus = Homomorphism::new(preserved.clone(), rhs.clone(), p_rhs)
        .map_err(|e| Error::InvalidRule(format!("right leg: {e}")))?;
    Ok(Rule { lhs, preserved, rhs, r_minus, r_plus })
}

/// A full record of one rule application:
///
/// ```text
/// L  ←r⁻  P  →r⁺  R
/// m↓      ↓m⁻     ↓m⁺
/// G  ←g⁻  G⁻ →g⁺  G⁺
/// ```
#[derive(Debug, Clone)]
pub struct RewriteRecord {
    pub rule: Rule,
    pub g: Graph,
    pub g_minus: Graph,
    pub g_plus: Graph,
    pub m: Homomorphism,
    pub m_minus: Homomorphism,
    pub m_plus: Homomorphism,
    pub g_arrow_minus: Homomorphism,
    pub g_arrow_plus: Homomorphism,
}

impl RewriteRecord {
    /// The restrictive square read as a pushout candidate.
    fn restrictive_square(&self) -> Result<Square> {
        Square::new(
            self.rule.r_minus.clone(),
            self.m_minus.clone(),
            self.m.clone(),
            self.g_arrow_minus.clone(),
        )
    }

    /// The expansive square read as a final-complement candidate.
    fn expansive_square(&self) -> Result<Square> {
        Square::new(
            self.rule.r_plus.clone(),
            self.m_minus.clone(),
            self.m_plus.clone(),
            self.g_arrow_plus.clone(),
        )
    }

    /// The expansive square read as its defining pushout, for mediator
    /// computations against this record's result.
    pub fn expansive_pushout(&self) -> Result<crate::category::Pushout> {
        Ok(crate::category::Pushout {
            span: Span::new(self.m_minus.clone(), self.rule.r_plus.clone())?,
            left_leg: self.g_arrow_plus.clone(),
            right_leg: self.m_plus.clone(),
        })
    }

    /// Renames the result graph so that the right-hand side instance lands on
    /// `rhs_ids`. Nodes outside the image of `m⁺` keep their ids. This is how
    /// stored deltas and rollbacks reproduce exact historical ids: the iso
    /// between two applications of the same rule at the same instance is
    /// unique, so pinning the instance pins the whole result.
    pub fn with_result_ids(&self, rhs_ids: &BTreeMap<NodeId, NodeId>) -> Result<RewriteRecord> {
        let mut rename: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for r in self.rule.rhs.node_ids() {
            let Some(wanted) = rhs_ids.get(r) else {
                return Err(Error::InstanceMismatch(format!(
                    "result id map misses rhs node {r}"
                )));
            };
            let current = self.m_plus.apply(r);
            rename.insert(current.clone(), wanted.clone());
        }
        let targets: BTreeSet<&NodeId> = rename.values().collect();
        if targets.len() != rename.len() {
            return Err(Error::InstanceMismatch("result id map is not injective".into()));
        }
        for n in self.g_plus.node_ids() {
            if !rename.contains_key(n) && targets.contains(n) {
                return Err(Error::NameConflict(format!(
                    "result id {n} collides with an untouched node"
                )));
            }
        }
        let g_plus = self.g_plus.renamed(&rename)?;
        let m_plus = self.m_plus.with_renamed_target(g_plus.clone(), &rename)?;
        let g_arrow_plus = self.g_arrow_plus.with_renamed_target(g_plus.clone(), &rename)?;
        Ok(RewriteRecord { g_plus, m_plus, g_arrow_plus, ..self.clone() })
    }
}

/// Applies `rule` to `g` at the mono instance `m: L ↣ g`.
pub fn apply_rule(g: &Graph, rule: &Rule, m: &Homomorphism) -> Result<RewriteRecord> {
    if m.source() != rule.lhs() {
        return Err(Error::InstanceMismatch(
            "instance source differs from the rule's left-hand side".into(),
        ));
    }
    if m.target() != g {
        return Err(Error::DomainMismatch("instance target differs from the host graph".into()));
    }
    if !m.is_mono() {
        return Err(Error::NotMono("rule instances must be monos".into()));
    }

    let restrictive = final_pbc(&rule.r_minus, m)?;
    let expansive = pushout(&Span::new(restrictive.embedding.clone(), rule.r_plus.clone())?)?;

    let record = RewriteRecord {
        rule: rule.clone(),
        g: g.clone(),
        g_minus: restrictive.complement().clone(),
        g_plus: expansive.apex().clone(),
        m: m.clone(),
        m_minus: restrictive.embedding,
        m_plus: expansive.right_leg,
        g_arrow_minus: restrictive.projection,
        g_arrow_plus: expansive.left_leg,
    };
    debug_assert!(record.m_plus.is_mono());
    Ok(record)
}

/// Applies a rule and renames the result so the right-hand instance lands on
/// the given ids; see [`RewriteRecord::with_result_ids`].
pub fn apply_rule_with_result_ids(
    g: &Graph,
    rule: &Rule,
    m: &Homomorphism,
    rhs_ids: &BTreeMap<NodeId, NodeId>,
) -> Result<RewriteRecord> {
    apply_rule(g, rule, m)?.with_result_ids(rhs_ids)
}

/// Reversibility per the two-square criterion: the restrictive square must
/// also be a pushout and the expansive square also a final pullback
/// complement.
pub fn is_reversible(rec: &RewriteRecord) -> Result<bool> {
    Ok(is_pushout(&rec.restrictive_square()?)? && is_final_pbc(&rec.expansive_square()?)?)
}

/// Undoes a reversible application: the reverse rule applied at `m⁺`.
///
/// Because the record's own squares are the canonical constructions of the
/// reverse application (that is what reversibility says), the reverted record
/// is the original one transposed, and its result is *strictly* equal to the
/// original host graph, ids included.
pub fn revert(rec: &RewriteRecord) -> Result<RewriteRecord> {
    if !is_reversible(rec)? {
        return Err(Error::NotReversible(
            "record fails the pushout / final-complement criterion".into(),
        ));
    }
    Ok(RewriteRecord {
        rule: rec.rule.reverse(),
        g: rec.g_plus.clone(),
        g_minus: rec.g_minus.clone(),
        g_plus: rec.g.clone(),
        m: rec.m_plus.clone(),
        m_minus: rec.m_minus.clone(),
        m_plus: rec.m.clone(),
        g_arrow_minus: rec.g_arrow_plus.clone(),
        g_arrow_plus: rec.g_arrow_minus.clone(),
    })
}

/// The overlap of two consecutive applications: the pullback of `m₁⁺` and
/// `m₂` inside the intermediate graph, with mono legs into `R₁` and `L₂`.
#[derive(Debug, Clone)]
pub struct Overlap {
    pub apex: Graph,
    /// `x: D ↣ R₁`
    pub x: Homomorphism,
    /// `y: D ↣ L₂`
    pub y: Homomorphism,
}

/// Computes the overlap of `rec1` with a second instance `m2: L₂ ↣ rec1.g⁺`.
pub fn compute_overlap(rec1: &RewriteRecord, m2: &Homomorphism) -> Result<Overlap> {
    if m2.target() != &rec1.g_plus {
        return Err(Error::DomainMismatch(
            "second instance does not target the first result".into(),
        ));
    }
    if !m2.is_mono() {
        return Err(Error::NotMono("overlap requires a mono second instance".into()));
    }
    let pb = pullback(&Cospan::new(rec1.m_plus.clone(), m2.clone())?)?;
    debug_assert!(pb.left_leg.is_mono() && pb.right_leg.is_mono());
    Ok(Overlap { apex: pb.apex().clone(), x: pb.left_leg, y: pb.right_leg })
}

/// Sequential independence: the overlap must lie inside the preserved region
/// of the first rule, i.e. the pullback of `x` and `r₁⁺` must project onto
/// the overlap apex isomorphically.
pub fn is_sequentially_independent(o: &Overlap, r1: &Rule) -> Result<bool> {
    if o.x.target() != r1.rhs() {
        return Err(Error::DomainMismatch("overlap leg does not target the rule rhs".into()));
    }
    let pb = pullback(&Cospan::new(o.x.clone(), r1.r_plus.clone())?)?;
    Ok(pb.left_leg.analysis().iso)
}

/// Everything produced while composing two consecutive rewrites.
///
/// `composed` is the synthesized rule; `m` and `m_plus` are the induced
/// instances into the first host and the final result. The intermediate
/// objects and arrows are kept so hierarchy composition and the audit trail
/// can derive their own mediators from them.
#[derive(Debug, Clone)]
pub struct CompositionTrace {
    pub h: Graph,
    pub m_h: Homomorphism,
    pub r1_h: Homomorphism,
    pub l2_h: Homomorphism,
    pub p1_h_obj: Graph,
    pub p2_h_obj: Graph,
    pub p1_h: Homomorphism,
    pub p2_h: Homomorphism,
    pub h1_plus: Homomorphism,
    pub h2_minus: Homomorphism,
    pub m1_h: Homomorphism,
    pub m2_h: Homomorphism,
    pub l: Graph,
    pub r: Graph,
    pub l1_h: Homomorphism,
    pub h1_minus: Homomorphism,
    pub r2_h: Homomorphism,
    pub h2_plus: Homomorphism,
    pub p: Graph,
    pub p_prime: Homomorphism,
    pub p_dblprime: Homomorphism,
    pub composed: Rule,
    pub m: Homomorphism,
    pub m_plus: Homomorphism,
}

/// Composes two consecutive rewrites into one rule.
///
/// `rec1` must be reversible; `rec2` must start at `rec1`'s result and `o`
/// must be the overlap computed from `(rec1, rec2.m)`. The returned trace
/// satisfies: applying `composed` at `m` reproduces `rec2.g_plus` up to the
/// unique compatible isomorphism, and pinning the result ids with `m_plus`
/// reproduces it strictly.
pub fn compose_rules(
    rec1: &RewriteRecord,
    o: &Overlap,
    rec2: &RewriteRecord,
) -> Result<CompositionTrace> {
    if rec2.g != rec1.g_plus {
        return Err(Error::DomainMismatch(
            "second record does not start at the first result".into(),
        ));
    }
    if o.x.target() != rec1.rule.rhs() || o.y.target() != rec2.rule.lhs() {
        return Err(Error::InstanceMismatch("overlap legs do not match the two rules".into()));
    }
    for d in o.apex.node_ids() {
        if rec1.m_plus.apply(o.x.apply(d)) != rec2.m.apply(o.y.apply(d)) {
            return Err(Error::InstanceMismatch(
                "overlap does not commute with the two instances".into(),
            ));
        }
    }
    if !is_reversible(rec1)? {
        return Err(Error::NotReversible(
            "composition requires the first application to be reversible".into(),
        ));
    }

    // Union of the two patterns along their overlap, embedded in the
    // intermediate graph.
    let union = pushout(&Span::new(o.x.clone(), o.y.clone())?)?;
    let h = union.apex().clone();
    let r1_h = union.left_leg.clone();
    let l2_h = union.right_leg.clone();
    let m_h = po_mediator(&union, &Cospan::new(rec1.m_plus.clone(), rec2.m.clone())?)?;
    if !m_h.is_mono() {
        return Err(Error::MediatorIllDefined("pattern union does not embed in the host".into()));
    }

    // Undo the first rule's expansive phase on the union; run the second
    // rule's restrictive phase on the union.
    let fp1 = final_pbc(&rec1.rule.r_plus, &r1_h)?;
    let p1_h_obj = fp1.complement().clone();
    let p1_h = fp1.embedding.clone();
    let h1_plus = fp1.projection.clone();
    let fp2 = final_pbc(&rec2.rule.r_minus, &l2_h)?;
    let p2_h_obj = fp2.complement().clone();
    let p2_h = fp2.embedding.clone();
    let h2_minus = fp2.projection.clone();

    // Match the unwound patterns inside the two intermediate graphs, using
    // that G₁⁻ is the final complement of (r₁⁺, m₁⁺) — reversibility — and
    // G₂⁻ that of (r₂⁻, m₂) — its construction.
    let k1 = compose(&h1_plus, &m_h)?;
    let m1_h = fpbc_mediator(
        &rec1.rule.r_plus,
        &rec1.m_plus,
        (&p1_h, &k1),
        (&rec1.m_minus, &rec1.g_arrow_plus),
    )?;
    let k2 = compose(&h2_minus, &m_h)?;
    let m2_h = fpbc_mediator(
        &rec2.rule.r_minus,
        &rec2.m,
        (&p2_h, &k2),
        (&rec2.m_minus, &rec2.g_arrow_minus),
    )?;

    // Rebuild the composite's left-hand side by undoing the first rule's
    // restrictive phase on P₁ᴴ, and its right-hand side by running the second
    // rule's expansive phase on P₂ᴴ.
    let po_l = pushout(&Span::new(rec1.rule.r_minus.clone(), p1_h.clone())?)?;
    let l = po_l.apex().clone();
    let l1_h = po_l.left_leg.clone();
    let h1_minus = po_l.right_leg.clone();
    let po_r = pushout(&Span::new(rec2.rule.r_plus.clone(), p2_h.clone())?)?;
    let r = po_r.apex().clone();
    let r2_h = po_r.left_leg.clone();
    let h2_plus = po_r.right_leg.clone();

    let m = po_mediator(
        &po_l,
        &Cospan::new(rec1.m.clone(), compose(&m1_h, &rec1.g_arrow_minus)?)?,
    )?;
    let m_plus = po_mediator(
        &po_r,
        &Cospan::new(rec2.m_plus.clone(), compose(&m2_h, &rec2.g_arrow_plus)?)?,
    )?;
    if !m.is_mono() || !m_plus.is_mono() {
        return Err(Error::MediatorIllDefined(
            "induced composite instance is not a mono".into(),
        ));
    }

    // Preserved region of the composite.
    let pb_p = pullback(&Cospan::new(h1_plus.clone(), h2_minus.clone())?)?;
    let p = pb_p.apex().clone();
    let p_prime = pb_p.left_leg.clone();
    let p_dblprime = pb_p.right_leg.clone();

    let composed_minus = compose(&p_prime, &h1_minus)?;
    let composed_plus = compose(&p_dblprime, &h2_plus)?;
    let composed = make_rule(
        l.clone(),
        p.clone(),
        r.clone(),
        composed_minus.node_map().clone(),
        composed_plus.node_map().clone(),
    )?;

    Ok(CompositionTrace {
        h,
        m_h,
        r1_h,
        l2_h,
        p1_h_obj,
        p2_h_obj,
        p1_h,
        p2_h,
        h1_plus,
        h2_minus,
        m1_h,
        m2_h,
        l,
        r,
        l1_h,
        h1_minus,
        r2_h,
        h2_plus,
        p,
        p_prime,
        p_dblprime,
        composed,
        m,
        m_plus,
    })
}

/// Applies the composed rule at the induced instance, pinning the result ids
/// to the trace's `m_plus`, which reproduces the sequential result strictly.
pub fn apply_composed(trace: &CompositionTrace, g1: &Graph) -> Result<RewriteRecord> {
    let rhs_ids = trace.m_plus.node_map().clone();
    apply_rule_with_result_ids(g1, &trace.composed, &trace.m, &rhs_ids)
}
