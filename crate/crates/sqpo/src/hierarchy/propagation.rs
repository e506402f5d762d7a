//! Canonical propagation: turning one rule application into a rule hierarchy.
//!
//! The restrictive phase of a rewrite propagates backwards, to every graph
//! typed by the rewritten one: each ancestor gets a *lifting*, a
//! delete/clone-only rule acting on all instances of the rewritten pattern.
//! The expansive phase propagates forwards, to every graph typing the
//! rewritten one: each descendant gets a *projection*, a merge/add-only rule
//! acting on the pattern's type image. [`induced_rule_hierarchy`] assembles
//! the liftings, the projections, identity rules for bystanders, and all the
//! connecting rule homomorphisms.

use std::collections::BTreeMap;

use crate::category::{
    image_factorization, pb_mediator, po_mediator, pullback, pushout, Cospan, Pullback, Pushout,
    Span,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::hom::{compose, Homomorphism};
use crate::rewrite::{apply_rule, make_rule, RewriteRecord, Rule};

use super::{
    check_applicability, make_rule_hierarchy, EdgeName, Hierarchy, InstanceAssignment,
    RuleHierarchy, RuleHomomorphism,
};

/// A backward propagation rule `L_H ← P_H → P_H` (identity right leg) with
/// its instance and its homomorphism into the originating rule.
#[derive(Debug, Clone)]
pub struct LiftingResult {
    pub rule: Rule,
    /// `m̂: L_H ↣ H`
    pub instance: Homomorphism,
    pub hom_to_origin: RuleHomomorphism,
    /// The pullback `H⁻` of the typing against `g⁻`, which the lifted rule
    /// reproduces up to isomorphism.
    pub h_minus: Graph,
    pub h_minus_to_h: Homomorphism,
    pub h_minus_to_g_minus: Homomorphism,
    /// `P_H → H⁻`
    pub preserved_to_h_minus: Homomorphism,
    /// The typing arrow the lifting was computed against.
    pub typing: Homomorphism,
}

/// Backward propagation of a rewrite along `h: H → G`, where `G` is the
/// rewritten graph: clones and deletes every instance of what the rewrite
/// cloned and deleted.
pub fn lifting_rule(h: &Homomorphism, rec: &RewriteRecord) -> Result<LiftingResult> {
    if h.target() != &rec.g {
        return Err(Error::DomainMismatch(
            "typing arrow does not target the rewritten graph".into(),
        ));
    }

    let pb_h_minus = pullback(&Cospan::new(h.clone(), rec.g_arrow_minus.clone())?)?;
    let h_minus = pb_h_minus.apex().clone();
    let h_minus_to_h = pb_h_minus.left_leg.clone();
    let h_minus_to_g_minus = pb_h_minus.right_leg.clone();

    let pb_lhs = pullback(&Cospan::new(h.clone(), rec.m.clone())?)?;
    let instance = pb_lhs.left_leg.clone();
    let lambda = pb_lhs.right_leg.clone();

    let pb_preserved =
        pullback(&Cospan::new(h_minus_to_g_minus.clone(), rec.m_minus.clone())?)?;
    let preserved_to_h_minus = pb_preserved.left_leg.clone();
    let pi = pb_preserved.right_leg.clone();

    let r_hat_minus = pb_mediator(
        &pb_lhs,
        &Span::new(
            compose(&preserved_to_h_minus, &h_minus_to_h)?,
            compose(&pi, rec.rule.r_minus())?,
        )?,
    )?;

    let p_h = pb_preserved.apex().clone();
    let identity: BTreeMap<NodeId, NodeId> =
        p_h.node_ids().map(|n| (n.clone(), n.clone())).collect();
    let rule = make_rule(
        pb_lhs.apex().clone(),
        p_h.clone(),
        p_h,
        r_hat_minus.node_map().clone(),
        identity,
    )?;

    let rho = compose(&pi, rec.rule.r_plus())?;
    let hom_to_origin = RuleHomomorphism::new(&rule, &rec.rule, lambda, pi, rho)
        .map_err(|e| Error::PropagationConflict(format!("lifting homomorphism: {e}")))?;

    Ok(LiftingResult {
        rule,
        instance,
        hom_to_origin,
        h_minus,
        h_minus_to_h,
        h_minus_to_g_minus,
        preserved_to_h_minus,
        typing: h.clone(),
    })
}

/// A forward propagation rule `P_T ← P_T → R_T` (identity left leg) with its
/// instance and the homomorphism from the originating rule.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub rule: Rule,
    /// `m̂⁻: P_T ↣ T`
    pub instance: Homomorphism,
    pub hom_from_origin: RuleHomomorphism,
    /// The pushout `T⁺` of the typed restrictive result against `g⁺`, which
    /// the projected rule reproduces up to isomorphism.
    pub t_plus: Graph,
    pub t_arrow_plus: Homomorphism,
    pub h_plus: Homomorphism,
    /// `m̂⁺: R_T ↣ T⁺`
    pub rhs_instance: Homomorphism,
    /// The typing arrow the projection was computed against.
    pub typing: Homomorphism,
}

/// Forward propagation of a rewrite along `h: G → T`, where `G` is the
/// rewritten graph: merges and adds the types touched by the expansive
/// phase. Conflicts arise when the rewrite deletes the last pattern witness
/// of a type, leaving the originating rule nothing to map onto.
pub fn projection_rule(h: &Homomorphism, rec: &RewriteRecord) -> Result<ProjectionResult> {
    if h.source() != &rec.g {
        return Err(Error::DomainMismatch(
            "typing arrow does not start at the rewritten graph".into(),
        ));
    }

    let typed_restriction = compose(&rec.g_arrow_minus, h)?;
    let po_t_plus =
        pushout(&Span::new(typed_restriction.clone(), rec.g_arrow_plus.clone())?)?;
    let t_plus = po_t_plus.apex().clone();
    let t_arrow_plus = po_t_plus.left_leg.clone();
    let h_plus = po_t_plus.right_leg.clone();

    let (pi, instance) = image_factorization(&compose(&rec.m_minus, &typed_restriction)?)?;
    let (rho, rhs_instance) = image_factorization(&compose(&rec.m_plus, &h_plus)?)?;

    // The expansive leg on the image: well-defined because the pattern's
    // image factors through the result's.
    let mut plus_map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for p in rec.rule.preserved().node_ids() {
        let from = pi.apply(p).clone();
        let to = rho.apply(rec.rule.r_plus().apply(p)).clone();
        if let Some(previous) = plus_map.get(&from) {
            if previous != &to {
                return Err(Error::PropagationConflict(format!(
                    "type image of preserved node {p} is sent to both {previous} and {to}"
                )));
            }
        }
        plus_map.insert(from, to);
    }
    let p_t = instance.source().clone();
    let r_t = rhs_instance.source().clone();
    let identity: BTreeMap<NodeId, NodeId> =
        p_t.node_ids().map(|n| (n.clone(), n.clone())).collect();
    let rule = make_rule(p_t.clone(), p_t.clone(), r_t, identity, plus_map)
        .map_err(|e| Error::PropagationConflict(format!("projected rule: {e}")))?;

    // λ: every pattern element's type must still be witnessed in the image.
    let mut lambda_map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for l in rec.rule.lhs().node_ids() {
        let ty = h.apply(rec.m.apply(l));
        if !p_t.has_node(ty) {
            return Err(Error::PropagationConflict(format!(
                "type {ty} of pattern node {l} has no witness in the projected pattern"
            )));
        }
        lambda_map.insert(l.clone(), ty.clone());
    }
    let lambda = Homomorphism::new(rec.rule.lhs().clone(), p_t, lambda_map)
        .map_err(|e| Error::PropagationConflict(format!("projection λ: {e}")))?;
    let hom_from_origin = RuleHomomorphism::new(&rec.rule, &rule, lambda, pi, rho)
        .map_err(|e| Error::PropagationConflict(format!("projection homomorphism: {e}")))?;

    Ok(ProjectionResult {
        rule,
        instance,
        hom_from_origin,
        t_plus,
        t_arrow_plus,
        h_plus,
        rhs_instance,
        typing: h.clone(),
    })
}

enum Role {
    Origin,
    Ancestor,
    Descendant,
    Bystander,
}

/// Propagates a single rewrite at `origin` across the whole hierarchy:
/// liftings for every ancestor, projections for every descendant, identity
/// rules on the flowed-through pattern images elsewhere, plus all connecting
/// rule homomorphisms. The result is validated and checked for
/// applicability.
pub fn induced_rule_hierarchy(
    h: &Hierarchy,
    origin: &str,
    r: &Rule,
    m: &Homomorphism,
) -> Result<(RuleHierarchy, InstanceAssignment)> {
    let Some(origin_graph) = h.graph(origin) else {
        return Err(Error::DomainMismatch(format!("no node {origin} in the hierarchy")));
    };
    let rec = apply_rule(origin_graph, r, m)?;

    let skeleton = h.skeleton().clone();
    let ancestors = skeleton.ancestors(origin);
    let descendants = skeleton.descendants(origin);
    let role = |v: &str| -> Role {
        if v == origin {
            Role::Origin
        } else if ancestors.contains(v) {
            Role::Ancestor
        } else if descendants.contains(v) {
            Role::Descendant
        } else {
            Role::Bystander
        }
    };

    let mut liftings: BTreeMap<String, LiftingResult> = BTreeMap::new();
    for s in &ancestors {
        liftings.insert(s.clone(), lifting_rule(&h.composite(s, origin)?, &rec)?);
    }
    let mut projections: BTreeMap<String, ProjectionResult> = BTreeMap::new();
    for t in &descendants {
        projections.insert(t.clone(), projection_rule(&h.composite(origin, t)?, &rec)?);
    }

    // Pattern images flowing through bystander nodes, in topological order,
    // so that rule homomorphisms exist along every edge leaving the affected
    // region.
    let mut patterns: BTreeMap<String, Graph> = BTreeMap::new();
    for u in skeleton.topological() {
        if !matches!(role(&u), Role::Bystander) {
            continue;
        }
        let mut pattern = Graph::new();
        for (s, t) in skeleton.edges() {
            if t != &u {
                continue;
            }
            let typing = h.hom(s, t).expect("validated hierarchy edge");
            let incoming: Option<Homomorphism> = match role(s) {
                Role::Ancestor => Some(liftings[s].instance.clone()),
                Role::Bystander => patterns.get(s).map(|p| {
                    Homomorphism::new(
                        p.clone(),
                        h.graph(s).expect("node graph").clone(),
                        p.node_ids().map(|n| (n.clone(), n.clone())).collect(),
                    )
                    .expect("pattern inclusion is a homomorphism")
                }),
                // Edges out of the origin or a descendant end in descendants.
                Role::Origin | Role::Descendant => None,
            };
            if let Some(inc) = incoming {
                let typed = compose(&inc, typing)?;
                let (_, image) = image_factorization(&typed)?;
                pattern = merge_pattern(&pattern, image.source());
            }
        }
        patterns.insert(u, pattern);
    }

    let mut rules: BTreeMap<String, Rule> = BTreeMap::new();
    let mut instances: BTreeMap<String, Homomorphism> = BTreeMap::new();
    for v in skeleton.nodes() {
        match role(v) {
            Role::Origin => {
                rules.insert(v.clone(), r.clone());
                instances.insert(v.clone(), m.clone());
            }
            Role::Ancestor => {
                rules.insert(v.clone(), liftings[v].rule.clone());
                instances.insert(v.clone(), liftings[v].instance.clone());
            }
            Role::Descendant => {
                rules.insert(v.clone(), projections[v].rule.clone());
                instances.insert(v.clone(), projections[v].instance.clone());
            }
            Role::Bystander => {
                let pattern = &patterns[v];
                rules.insert(v.clone(), Rule::identity(pattern));
                instances.insert(
                    v.clone(),
                    Homomorphism::new(
                        pattern.clone(),
                        h.graph(v).expect("node graph").clone(),
                        pattern.node_ids().map(|n| (n.clone(), n.clone())).collect(),
                    )
                    .expect("pattern inclusion is a homomorphism"),
                );
            }
        }
    }

    let mut homs: BTreeMap<EdgeName, RuleHomomorphism> = BTreeMap::new();
    for (s, t) in skeleton.edges() {
        let edge = (s.clone(), t.clone());
        let typing = h.hom(s, t).expect("validated hierarchy edge");
        let rh = match (role(s), role(t)) {
            (Role::Ancestor, Role::Origin) => liftings[s].hom_to_origin.clone(),
            (Role::Origin, Role::Descendant) => projections[t].hom_from_origin.clone(),
            (Role::Ancestor, Role::Ancestor) => {
                lifting_hom(&liftings[s], &liftings[t], typing, &rec)?
            }
            (Role::Descendant, Role::Descendant) => {
                projection_hom(&projections[s], &projections[t], typing, &rec)?
            }
            (Role::Ancestor, Role::Descendant) => {
                liftings[s].hom_to_origin.then(&projections[t].hom_from_origin)?
            }
            (Role::Ancestor, Role::Bystander) => {
                let lambda = restricted_into(&liftings[s].instance, typing, &patterns[t])?;
                let pi = compose(liftings[s].rule.r_minus(), &lambda)?;
                RuleHomomorphism { lambda, pi: pi.clone(), rho: pi }
            }
            (Role::Bystander, Role::Bystander) => {
                let inclusion = &instances[s];
                let lambda = restricted_into(inclusion, typing, &patterns[t])?;
                RuleHomomorphism { lambda: lambda.clone(), pi: lambda.clone(), rho: lambda }
            }
            (Role::Bystander, Role::Descendant) => {
                let proj = &projections[t];
                let mut lambda_map = BTreeMap::new();
                for n in patterns[s].node_ids() {
                    let ty = typing.apply(n);
                    if !proj.rule.lhs().has_node(ty) {
                        return Err(Error::PropagationConflict(format!(
                            "pattern node {n} of {s} has no type witness in the projection at {t}"
                        )));
                    }
                    lambda_map.insert(n.clone(), ty.clone());
                }
                let lambda =
                    Homomorphism::new(patterns[s].clone(), proj.rule.lhs().clone(), lambda_map)
                        .map_err(|e| Error::PropagationConflict(format!("edge ({s}, {t}): {e}")))?;
                let rho = compose(&lambda, proj.rule.r_plus())?;
                RuleHomomorphism { lambda: lambda.clone(), pi: lambda, rho }
            }
            // Remaining shapes cannot occur in a DAG: an edge out of the
            // origin or a descendant always ends in a descendant, and an
            // edge into the origin or an ancestor always starts at an
            // ancestor.
            _ => {
                return Err(Error::PropagationConflict(format!(
                    "unexpected edge shape ({s}, {t}) relative to the rewrite origin"
                )))
            }
        };
        rh.validate(&rules[s], &rules[t])
            .map_err(|e| Error::PropagationConflict(format!("edge ({s}, {t}): {e}")))?;
        homs.insert(edge, rh);
    }

    let rule_hierarchy = make_rule_hierarchy(skeleton, rules, homs)
        .map_err(|e| Error::PropagationConflict(e.to_string()))?;
    let assignment = InstanceAssignment::new(instances);
    let report = check_applicability(h, &rule_hierarchy, &assignment)?;
    if !report.applicable() {
        let reasons: Vec<String> =
            report.failures.iter().map(|f| f.reason.clone()).collect();
        return Err(Error::NotApplicable(reasons.join("; ")));
    }
    Ok((rule_hierarchy, assignment))
}

/// Union of two pattern subgraphs of the same host.
fn merge_pattern(a: &Graph, b: &Graph) -> Graph {
    let mut nodes: BTreeMap<NodeId, crate::attr::AttrSet> =
        a.nodes().map(|(n, at)| (n.clone(), at.clone())).collect();
    for (n, at) in b.nodes() {
        let entry = nodes.entry(n.clone()).or_default();
        *entry = entry.union(at);
    }
    let mut edges: BTreeMap<(NodeId, NodeId), crate::attr::AttrSet> =
        a.edges().map(|(e, at)| (e.clone(), at.clone())).collect();
    for (e, at) in b.edges() {
        let entry = edges.entry(e.clone()).or_default();
        *entry = entry.union(at);
    }
    Graph::from_parts(nodes, edges)
}

/// The typing arrow restricted to a pattern, landing in a flowed pattern.
fn restricted_into(
    inclusion: &Homomorphism,
    typing: &Homomorphism,
    target_pattern: &Graph,
) -> Result<Homomorphism> {
    let typed = compose(inclusion, typing)?;
    let map = typed.node_map().clone();
    Homomorphism::new(inclusion.source().clone(), target_pattern.clone(), map)
        .map_err(|e| Error::PropagationConflict(format!("pattern flow: {e}")))
}

/// Rule homomorphism between two liftings along a typing edge, from the
/// universal properties of the defining pullbacks.
fn lifting_hom(
    from: &LiftingResult,
    to: &LiftingResult,
    typing: &Homomorphism,
    rec: &RewriteRecord,
) -> Result<RuleHomomorphism> {
    let pb_lhs_to = Pullback {
        cospan: Cospan::new(to.typing.clone(), rec.m.clone())?,
        left_leg: to.instance.clone(),
        right_leg: to.hom_to_origin.lambda.clone(),
    };
    let lambda = pb_mediator(
        &pb_lhs_to,
        &Span::new(
            compose(&from.instance, typing)?,
            from.hom_to_origin.lambda.clone(),
        )?,
    )
    .map_err(|e| Error::PropagationConflict(format!("lifting λ: {e}")))?;

    let pb_h_minus_to = Pullback {
        cospan: Cospan::new(to.typing.clone(), rec.g_arrow_minus.clone())?,
        left_leg: to.h_minus_to_h.clone(),
        right_leg: to.h_minus_to_g_minus.clone(),
    };
    let theta = pb_mediator(
        &pb_h_minus_to,
        &Span::new(
            compose(&from.h_minus_to_h, typing)?,
            from.h_minus_to_g_minus.clone(),
        )?,
    )
    .map_err(|e| Error::PropagationConflict(format!("lifting complement arrow: {e}")))?;

    let pb_preserved_to = Pullback {
        cospan: Cospan::new(to.h_minus_to_g_minus.clone(), rec.m_minus.clone())?,
        left_leg: to.preserved_to_h_minus.clone(),
        right_leg: to.hom_to_origin.pi.clone(),
    };
    let pi = pb_mediator(
        &pb_preserved_to,
        &Span::new(
            compose(&from.preserved_to_h_minus, &theta)?,
            from.hom_to_origin.pi.clone(),
        )?,
    )
    .map_err(|e| Error::PropagationConflict(format!("lifting π: {e}")))?;

    Ok(RuleHomomorphism { lambda, pi: pi.clone(), rho: pi })
}

/// Rule homomorphism between two projections along a typing edge, from the
/// universal property of the defining pushouts.
fn projection_hom(
    from: &ProjectionResult,
    to: &ProjectionResult,
    typing: &Homomorphism,
    rec: &RewriteRecord,
) -> Result<RuleHomomorphism> {
    let po_from = Pushout {
        span: Span::new(
            compose(&rec.g_arrow_minus, &from.typing)?,
            rec.g_arrow_plus.clone(),
        )?,
        left_leg: from.t_arrow_plus.clone(),
        right_leg: from.h_plus.clone(),
    };
    let theta_plus = po_mediator(
        &po_from,
        &Cospan::new(compose(typing, &to.t_arrow_plus)?, to.h_plus.clone())?,
    )
    .map_err(|e| Error::PropagationConflict(format!("projection result arrow: {e}")))?;

    let mut lambda_map = BTreeMap::new();
    for n in from.rule.lhs().node_ids() {
        let ty = typing.apply(n);
        if !to.rule.lhs().has_node(ty) {
            return Err(Error::PropagationConflict(format!(
                "projected pattern node {n} has no image in the finer projection"
            )));
        }
        lambda_map.insert(n.clone(), ty.clone());
    }
    let lambda =
        Homomorphism::new(from.rule.lhs().clone(), to.rule.lhs().clone(), lambda_map)
            .map_err(|e| Error::PropagationConflict(format!("projection λ: {e}")))?;

    let mut rho_map = BTreeMap::new();
    for n in from.rule.rhs().node_ids() {
        let img = theta_plus.apply(n);
        if !to.rule.rhs().has_node(img) {
            return Err(Error::PropagationConflict(format!(
                "projected result node {n} has no image in the finer projection"
            )));
        }
        rho_map.insert(n.clone(), img.clone());
    }
    let rho = Homomorphism::new(from.rule.rhs().clone(), to.rule.rhs().clone(), rho_map)
        .map_err(|e| Error::PropagationConflict(format!("projection ρ: {e}")))?;

    Ok(RuleHomomorphism { lambda: lambda.clone(), pi: lambda, rho })
}
