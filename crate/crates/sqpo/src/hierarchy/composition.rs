//! Composition of two consecutive hierarchy rewrites.
//!
//! Per node this is plain rewrite composition; per edge the connecting rule
//! homomorphism of the composite is induced by the universal properties of
//! the overlap pullbacks, the pattern-union pushouts and the composite-rule
//! pushouts/pullback. The first rewrite must be reversible as a hierarchy
//! rewrite.

use std::collections::BTreeMap;

use crate::category::{pb_mediator, po_mediator, Cospan, Pullback, Pushout, Span};
use crate::error::{Error, Result};
use crate::hom::{compose, Homomorphism};
use crate::rewrite::{compose_rules, compute_overlap, CompositionTrace, Overlap};

use super::{
    is_hierarchy_rewrite_reversible, make_rule_hierarchy, restrictive_transfer, EdgeName,
    HierarchyRewriteRecord, InstanceAssignment, RuleHierarchy,
};

/// Per-node overlaps plus the connecting arrows between their apexes.
#[derive(Debug, Clone)]
pub struct HierarchyOverlap {
    pub overlaps: BTreeMap<String, Overlap>,
    pub homs: BTreeMap<EdgeName, Homomorphism>,
}

/// Computes the overlap between a hierarchy rewrite and a follow-up rule
/// hierarchy: one pullback per node, and per edge the unique arrow between
/// apexes induced by the second hierarchy's `λ` components.
pub fn hierarchy_overlap(
    rec1: &HierarchyRewriteRecord,
    r2: &RuleHierarchy,
    i2: &InstanceAssignment,
) -> Result<HierarchyOverlap> {
    if rec1.result.skeleton() != r2.skeleton() {
        return Err(Error::DomainMismatch(
            "second rule hierarchy has a different skeleton".into(),
        ));
    }
    let mut overlaps = BTreeMap::new();
    for (v, rec) in &rec1.records {
        let Some(m2) = i2.get(v) else {
            return Err(Error::DomainMismatch(format!("no second instance at node {v}")));
        };
        overlaps.insert(v.clone(), compute_overlap(rec, m2)?);
    }

    let mut homs = BTreeMap::new();
    for (s, t) in rec1.result.skeleton().edges() {
        let edge = (s.clone(), t.clone());
        let (o_s, o_t) = (&overlaps[s], &overlaps[t]);
        let rho1 = &rec1.rules.hom(s, t).expect("validated edge").rho;
        let lambda2 = &r2.hom(s, t).expect("validated edge").lambda;
        let pb_t = Pullback {
            cospan: Cospan::new(
                rec1.records[t].m_plus.clone(),
                i2.get(t).expect("checked").clone(),
            )?,
            left_leg: o_t.x.clone(),
            right_leg: o_t.y.clone(),
        };
        let d = pb_mediator(
            &pb_t,
            &Span::new(compose(&o_s.x, rho1)?, compose(&o_s.y, lambda2)?)?,
        )?;
        homs.insert(edge, d);
    }
    Ok(HierarchyOverlap { overlaps, homs })
}

/// Composes two consecutive hierarchy rewrites into a single rule hierarchy
/// with its instance assignment; the per-node composition traces are
/// returned alongside so callers can pin result ids or reuse arrows.
pub fn compose_rule_hierarchies(
    rec1: &HierarchyRewriteRecord,
    o: &HierarchyOverlap,
    rec2: &HierarchyRewriteRecord,
) -> Result<(RuleHierarchy, InstanceAssignment, BTreeMap<String, CompositionTrace>)> {
    if rec2.origin != rec1.result {
        return Err(Error::DomainMismatch(
            "second hierarchy rewrite does not start at the first result".into(),
        ));
    }
    if !is_hierarchy_rewrite_reversible(rec1)? {
        return Err(Error::NotReversible(
            "hierarchy composition requires a reversible first rewrite".into(),
        ));
    }

    let mut traces: BTreeMap<String, CompositionTrace> = BTreeMap::new();
    for (v, node_rec1) in &rec1.records {
        let trace = compose_rules(node_rec1, &o.overlaps[v], &rec2.records[v])?;
        traces.insert(v.clone(), trace);
    }

    let skeleton = rec1.result.skeleton().clone();
    let mut homs: BTreeMap<EdgeName, super::RuleHomomorphism> = BTreeMap::new();
    for (s, t) in skeleton.edges() {
        let edge = (s.clone(), t.clone());
        let (tr_s, tr_t) = (&traces[s], &traces[t]);
        let rh1 = rec1.rules.hom(s, t).expect("validated edge");
        let rh2 = rec2.rules.hom(s, t).expect("validated edge");

        // Arrow between the pattern unions.
        let po_h_s = Pushout {
            span: Span::new(o.overlaps[s].x.clone(), o.overlaps[s].y.clone())?,
            left_leg: tr_s.r1_h.clone(),
            right_leg: tr_s.l2_h.clone(),
        };
        let h_arrow = po_mediator(
            &po_h_s,
            &Cospan::new(
                compose(&rh1.rho, &tr_t.r1_h)?,
                compose(&rh2.lambda, &tr_t.l2_h)?,
            )?,
        )?;

        // Arrows between the unwound patterns, one per restrictive phase.
        let theta1 = restrictive_transfer(
            &tr_s.p1_h,
            &tr_s.h1_plus,
            &tr_t.p1_h,
            &tr_t.h1_plus,
            &h_arrow,
            &rh1.pi,
        )
        .map_err(Error::MediatorIllDefined)?;
        let theta2 = restrictive_transfer(
            &tr_s.p2_h,
            &tr_s.h2_minus,
            &tr_t.p2_h,
            &tr_t.h2_minus,
            &h_arrow,
            &rh2.pi,
        )
        .map_err(Error::MediatorIllDefined)?;

        // λ from the left-hand pushouts.
        let po_l_s = Pushout {
            span: Span::new(rec1.rules.rule(s).expect("rule").r_minus().clone(), tr_s.p1_h.clone())?,
            left_leg: tr_s.l1_h.clone(),
            right_leg: tr_s.h1_minus.clone(),
        };
        let lambda = po_mediator(
            &po_l_s,
            &Cospan::new(compose(&rh1.lambda, &tr_t.l1_h)?, compose(&theta1, &tr_t.h1_minus)?)?,
        )?;

        // ρ from the right-hand pushouts.
        let po_r_s = Pushout {
            span: Span::new(rec2.rules.rule(s).expect("rule").r_plus().clone(), tr_s.p2_h.clone())?,
            left_leg: tr_s.r2_h.clone(),
            right_leg: tr_s.h2_plus.clone(),
        };
        let rho = po_mediator(
            &po_r_s,
            &Cospan::new(compose(&rh2.rho, &tr_t.r2_h)?, compose(&theta2, &tr_t.h2_plus)?)?,
        )?;

        // π from the preserved-region pullbacks.
        let pb_p_t = Pullback {
            cospan: Cospan::new(tr_t.h1_plus.clone(), tr_t.h2_minus.clone())?,
            left_leg: tr_t.p_prime.clone(),
            right_leg: tr_t.p_dblprime.clone(),
        };
        let pi = pb_mediator(
            &pb_p_t,
            &Span::new(compose(&tr_s.p_prime, &theta1)?, compose(&tr_s.p_dblprime, &theta2)?)?,
        )?;

        homs.insert(edge, super::RuleHomomorphism { lambda, pi, rho });
    }

    let rules: BTreeMap<String, crate::rewrite::Rule> =
        traces.iter().map(|(v, tr)| (v.clone(), tr.composed.clone())).collect();
    let rule_hierarchy = make_rule_hierarchy(skeleton, rules, homs)?;
    let instances = InstanceAssignment::new(
        traces.iter().map(|(v, tr)| (v.clone(), tr.m.clone())).collect(),
    );
    Ok((rule_hierarchy, instances, traces))
}
