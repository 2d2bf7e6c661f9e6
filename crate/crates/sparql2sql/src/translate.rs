//! Translation of graph patterns into relational algebra over the
//! universal `triple` relation, using compatibility filters and coalesce
//! renamings for shared variables, and the isNull-witness encoding for
//! MINUS. The output is linear in the size of the pattern.

use std::collections::BTreeMap;

use crate::model::{RdfGraph, Variable};
use crate::ra::eval::{eval, term_to_db, triple_instance, Relation, Tuple};
use crate::ra::{Attr, AttrSet, DbValue, RaExpr, RaFilter, RaTerm, TRIPLE_REL, UNIT_REL};
use crate::sparql::{
    eval_pattern, var_scope, GraphPattern, SparqlFilter, TermOrVar, TriplePattern,
};

/// Case analysis on constants, variables, and repeated variables:
/// constants become selections, variables become projections with
/// renaming, and a variable repeated within one pattern becomes an
/// equality selection between the positions it occupies.
pub fn translate_triple(tp: &TriplePattern) -> RaExpr {
    let slots = [("sub", &tp.sub), ("pred", &tp.pred), ("obj", &tp.obj)];
    let mut conjuncts: Vec<RaFilter> = Vec::new();
    let mut assigns: Vec<(Attr, RaTerm)> = Vec::new();
    let mut first_pos: BTreeMap<&str, &str> = BTreeMap::new();
    for (pos, slot) in slots {
        match slot {
            TermOrVar::Term(c) => conjuncts.push(RaFilter::eq(
                RaTerm::attr(pos),
                RaTerm::Const(term_to_db(c)),
            )),
            TermOrVar::Var(v) => match first_pos.get(v.as_str()) {
                None => {
                    first_pos.insert(v, pos);
                    assigns.push((v.clone(), RaTerm::attr(pos)));
                }
                Some(first) => {
                    conjuncts.push(RaFilter::eq(RaTerm::attr(*first), RaTerm::attr(pos)));
                }
            },
        }
    }
    let mut e = RaExpr::Base(TRIPLE_REL.to_string());
    let f = RaFilter::conj(conjuncts);
    if f != RaFilter::True {
        e = RaExpr::select(e, f);
    }
    RaExpr::ext_project(e, assigns)
}

/// comp_U: conjunction over the shared variables of
/// (u¹ = u²) ∨ isNull(u¹) ∨ isNull(u²).
pub fn comp_filter(shared: &AttrSet, lhs_tag: impl Fn(&str) -> Attr, rhs_tag: impl Fn(&str) -> Attr) -> RaFilter {
    RaFilter::conj(shared.iter().map(|u| {
        let u1 = RaTerm::Attr(lhs_tag(u));
        let u2 = RaTerm::Attr(rhs_tag(u));
        RaFilter::disj([
            RaFilter::eq(u1.clone(), u2.clone()),
            RaFilter::is_null(vec![u1]),
            RaFilter::is_null(vec![u2]),
        ])
    }))
}

/// bound(v) becomes ¬isNull(v); everything else maps structurally.
pub fn translate_filter(f: &SparqlFilter) -> RaFilter {
    match f {
        SparqlFilter::True => RaFilter::True,
        SparqlFilter::Bound(v) => RaFilter::not(RaFilter::is_null(vec![RaTerm::attr(v.clone())])),
        SparqlFilter::EqVC(v, c) => RaFilter::eq(
            RaTerm::attr(v.clone()),
            RaTerm::Const(term_to_db(c)),
        ),
        SparqlFilter::EqVV(v, w) => {
            RaFilter::eq(RaTerm::attr(v.clone()), RaTerm::attr(w.clone()))
        }
        SparqlFilter::And(a, b) => RaFilter::And(
            Box::new(translate_filter(a)),
            Box::new(translate_filter(b)),
        ),
        SparqlFilter::Not(a) => RaFilter::Not(Box::new(translate_filter(a))),
    }
}

/// Renames output attributes; merges into a generalised projection when
/// one is already on top, otherwise emits rename nodes.
fn rename_attrs(e: RaExpr, map: &BTreeMap<Attr, Attr>) -> RaExpr {
    if map.is_empty() {
        return e;
    }
    match e {
        RaExpr::ExtProject(inner, assigns) => RaExpr::ExtProject(
            inner,
            assigns
                .into_iter()
                .map(|(n, t)| (map.get(&n).cloned().unwrap_or(n), t))
                .collect(),
        ),
        other => map.iter().fold(other, |acc, (from, to)| {
            RaExpr::Rename(Box::new(acc), from.clone(), to.clone())
        }),
    }
}

struct Ctx {
    node_counter: usize,
}

impl Ctx {
    fn next_node(&mut self) -> usize {
        let k = self.node_counter;
        self.node_counter += 1;
        k
    }
}

pub fn translate(p: &GraphPattern) -> RaExpr {
    let mut ctx = Ctx { node_counter: 0 };
    translate_rec(p, &mut ctx)
}

fn translate_rec(p: &GraphPattern, ctx: &mut Ctx) -> RaExpr {
    match p {
        GraphPattern::Bgp(tps) => {
            let mut it = tps.iter().map(translate_triple);
            match it.next() {
                None => RaExpr::Base(UNIT_REL.to_string()),
                Some(first) => it.fold(first, RaExpr::nat_join),
            }
        }
        GraphPattern::Filter(inner, f) => {
            RaExpr::select(translate_rec(inner, ctx), translate_filter(f))
        }
        GraphPattern::Bind(inner, v, c) => RaExpr::Extend(
            Box::new(translate_rec(inner, ctx)),
            v.clone(),
            RaTerm::Const(term_to_db(c)),
        ),
        GraphPattern::Union(a, b) => {
            let ea = translate_rec(a, ctx);
            let eb = translate_rec(b, ctx);
            RaExpr::outer_union(ea, eb)
        }
        GraphPattern::Join(a, b) => {
            let (joined, shared, names) = translate_shared_join(a, b, None, ctx);
            apply_coalesce_rename(joined, a, b, &shared, &names)
        }
        GraphPattern::Opt(a, b, f) => {
            let (joined, shared, names) = translate_shared_join(a, b, Some(f), ctx);
            apply_coalesce_rename(joined, a, b, &shared, &names)
        }
        GraphPattern::Minus(a, b) => translate_minus(a, b, ctx),
        GraphPattern::Proj(inner, l) => {
            let scope = var_scope(inner);
            let keep: AttrSet = l.intersection(&scope).cloned().collect();
            RaExpr::project(translate_rec(inner, ctx), keep)
        }
        GraphPattern::Dist(inner) => RaExpr::Distinct(Box::new(translate_rec(inner, ctx))),
    }
}

struct SharedNames {
    lhs: BTreeMap<Variable, Attr>,
    rhs: BTreeMap<Variable, Attr>,
}

/// Renames the shared variables apart (u at node k becomes u#2k on the
/// left and u#2k+1 on the right) and joins on the compatibility filter,
/// conjoined with the translated OPTIONAL filter when present.
fn translate_shared_join(
    a: &GraphPattern,
    b: &GraphPattern,
    opt_filter: Option<&SparqlFilter>,
    ctx: &mut Ctx,
) -> (RaExpr, AttrSet, SharedNames) {
    let ua = var_scope(a);
    let ub = var_scope(b);
    let shared: AttrSet = ua.intersection(&ub).cloned().collect();
    let ea = translate_rec(a, ctx);
    let eb = translate_rec(b, ctx);
    let k = ctx.next_node();
    let names = SharedNames {
        lhs: shared
            .iter()
            .map(|u| (u.clone(), format!("{u}#{}", 2 * k)))
            .collect(),
        rhs: shared
            .iter()
            .map(|u| (u.clone(), format!("{u}#{}", 2 * k + 1)))
            .collect(),
    };
    let ea = rename_attrs(ea, &names.lhs);
    let eb = rename_attrs(eb, &names.rhs);
    let comp = comp_filter(
        &shared,
        |u| names.lhs[u].clone(),
        |u| names.rhs[u].clone(),
    );
    let cond = match opt_filter {
        None => comp,
        Some(f) => {
            let raw = translate_filter(f);
            let subst: BTreeMap<Attr, RaTerm> = shared
                .iter()
                .map(|u| {
                    (
                        u.clone(),
                        RaTerm::coalesce(
                            RaTerm::Attr(names.lhs[u].clone()),
                            RaTerm::Attr(names.rhs[u].clone()),
                        ),
                    )
                })
                .collect();
            RaFilter::and(comp, raw.substitute(&subst))
        }
    };
    let joined = match opt_filter {
        None => RaExpr::join_f(ea, eb, cond),
        Some(_) => RaExpr::left_join_f(ea, eb, cond),
    };
    (joined, shared, names)
}

/// The combined renaming on top of a (left) join: shared variables are
/// recovered as coalesce(u¹, u²), the renamed copies are projected away.
fn apply_coalesce_rename(
    joined: RaExpr,
    a: &GraphPattern,
    b: &GraphPattern,
    shared: &AttrSet,
    names: &SharedNames,
) -> RaExpr {
    if shared.is_empty() {
        return joined;
    }
    let all: AttrSet = var_scope(a).union(&var_scope(b)).cloned().collect();
    let mut assigns: Vec<(Attr, RaTerm)> = Vec::new();
    for x in &all {
        if shared.contains(x) {
            assigns.push((
                x.clone(),
                RaTerm::coalesce(
                    RaTerm::Attr(names.lhs[x].clone()),
                    RaTerm::Attr(names.rhs[x].clone()),
                ),
            ));
        } else {
            assigns.push((x.clone(), RaTerm::attr(x.clone())));
        }
    }
    RaExpr::ext_project(joined, assigns)
}

/// The MINUS encoding: the right side is extended with a constant
/// witness attribute; left tuples survive when the witness is null,
/// i.e. no compatible right tuple sharing a bound variable exists.
fn translate_minus(a: &GraphPattern, b: &GraphPattern, ctx: &mut Ctx) -> RaExpr {
    let ua = var_scope(a);
    let ub = var_scope(b);
    let shared: AttrSet = ua.intersection(&ub).cloned().collect();
    let ea = translate_rec(a, ctx);
    let eb = translate_rec(b, ctx);
    let k = ctx.next_node();
    let witness = format!("w#{k}");
    let lhs_names: BTreeMap<Variable, Attr> = shared
        .iter()
        .map(|u| (u.clone(), format!("{u}#{}", 2 * k)))
        .collect();
    let rhs_names: BTreeMap<Variable, Attr> = shared
        .iter()
        .map(|u| (u.clone(), format!("{u}#{}", 2 * k + 1)))
        .collect();
    let ea = rename_attrs(ea, &lhs_names);
    let eb = rename_attrs(eb, &rhs_names);
    let right = RaExpr::Extend(
        Box::new(eb),
        witness.clone(),
        RaTerm::Const(DbValue::Int(1)),
    );
    let comp = comp_filter(&shared, |u| lhs_names[u].clone(), |u| rhs_names[u].clone());
    // the extra disjunction requires some shared variable bound on both
    // sides; over no shared variables it is the empty disjunction, false
    let some_eq = RaFilter::disj(shared.iter().map(|u| {
        RaFilter::eq(
            RaTerm::Attr(lhs_names[u].clone()),
            RaTerm::Attr(rhs_names[u].clone()),
        )
    }));
    let lj = RaExpr::left_join_f(ea, right, RaFilter::and(comp, some_eq));
    let sel = RaExpr::select(lj, RaFilter::is_null(vec![RaTerm::Attr(witness)]));
    // rename the left copies back and keep exactly the left attributes
    let assigns: Vec<(Attr, RaTerm)> = ua
        .iter()
        .map(|x| {
            let src = lhs_names.get(x).cloned().unwrap_or_else(|| x.clone());
            (x.clone(), RaTerm::Attr(src))
        })
        .collect();
    RaExpr::ext_project(sel, assigns)
}

/// ext_{var(P)}: solutions padded with nulls to tuples over var(P);
/// the relational counterpart of the SPARQL answer.
pub fn relational_answer(p: &GraphPattern, g: &RdfGraph) -> Relation {
    let scope = var_scope(p);
    let bag = eval_pattern(p, g);
    let mut out = Relation::empty(scope.clone());
    for (s, n) in bag.iter() {
        let tuple: Tuple = scope
            .iter()
            .map(|v| {
                let val = s.get(v).map(term_to_db).unwrap_or(DbValue::Null);
                (v.clone(), val)
            })
            .collect();
        out.add(tuple, n).expect("answer multiplicity overflow");
    }
    out
}

/// Convenience used throughout the test harness: evaluate the translated
/// expression over the stored graph.
pub fn translated_answer(p: &GraphPattern, g: &RdfGraph) -> Relation {
    let e = translate(p);
    let db = triple_instance(g);
    eval(&e, &db).expect("translated expression must evaluate")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_graph, RdfTerm};
    use crate::ra::{attrs, attrset, TripleSchema};
    use crate::sparql::parse_algebra;

    fn check_translation_agreement(alg: &str, graph: &str) {
        let p = parse_algebra(alg).unwrap();
        let g = parse_graph(graph).unwrap();
        assert_eq!(
            relational_answer(&p, &g),
            translated_answer(&p, &g),
            "translation disagrees with the direct evaluator on {alg}"
        );
    }

    const G: &str = crate::sparql::tests::PEOPLE_GRAPH;

    #[test]
    fn triple_case_constant_pred_obj() {
        let p = parse_algebra("(bgp (?s <:p> <:o>))").unwrap();
        let GraphPattern::Bgp(tps) = &p else { unreachable!() };
        let e = translate_triple(&tps[0]);
        let RaExpr::ExtProject(inner, assigns) = &e else {
            panic!("expected projection on top")
        };
        assert_eq!(assigns, &vec![("s".to_string(), RaTerm::attr("sub"))]);
        let RaExpr::Select(_, f) = inner.as_ref() else {
            panic!("expected selection")
        };
        assert_eq!(f.conjuncts().len(), 2);
    }

    #[test]
    fn triple_case_all_constants() {
        let p = parse_algebra("(bgp (<:s> <:p> <:o>))").unwrap();
        let GraphPattern::Bgp(tps) = &p else { unreachable!() };
        let e = translate_triple(&tps[0]);
        assert_eq!(attrs(&e, &TripleSchema).unwrap(), AttrSet::new());
        let RaExpr::ExtProject(inner, _) = &e else { panic!() };
        let RaExpr::Select(_, f) = inner.as_ref() else { panic!() };
        assert_eq!(f.conjuncts().len(), 3);
    }

    #[test]
    fn triple_case_repeated_variable() {
        let p = parse_algebra("(bgp (?x <:p> ?x))").unwrap();
        let GraphPattern::Bgp(tps) = &p else { unreachable!() };
        let e = translate_triple(&tps[0]);
        let RaExpr::ExtProject(inner, assigns) = &e else { panic!() };
        assert_eq!(assigns, &vec![("x".to_string(), RaTerm::attr("sub"))]);
        let RaExpr::Select(_, f) = inner.as_ref() else { panic!() };
        // pred constant plus the sub = obj equality
        assert!(f
            .conjuncts()
            .iter()
            .any(|c| matches!(c, RaFilter::Eq(RaTerm::Attr(a), RaTerm::Attr(b)) if a == "sub" && b == "obj")));
    }

    #[test]
    fn comp_filter_shapes() {
        let empty = comp_filter(&AttrSet::new(), |u| u.into(), |u| u.into());
        assert_eq!(empty, RaFilter::True);
        let one = comp_filter(&attrset(&["p"]), |u| format!("{u}1"), |u| format!("{u}2"));
        assert_eq!(one.conjuncts().len(), 1);
        let two = comp_filter(&attrset(&["p", "e"]), |u| format!("{u}1"), |u| format!("{u}2"));
        assert_eq!(two.conjuncts().len(), 2);
    }

    #[test]
    fn translate_filter_cases() {
        let f = translate_filter(&SparqlFilter::Bound("v".into()));
        assert_eq!(f, RaFilter::not(RaFilter::is_null(vec![RaTerm::attr("v")])));
        let f = translate_filter(&SparqlFilter::EqVC("v".into(), RdfTerm::lit("x")));
        assert_eq!(
            f,
            RaFilter::eq(RaTerm::attr("v"), RaTerm::Const(DbValue::text("x")))
        );
        let nested = SparqlFilter::not(SparqlFilter::and(
            SparqlFilter::Bound("v".into()),
            SparqlFilter::EqVV("v".into(), "w".into()),
        ));
        assert!(matches!(translate_filter(&nested), RaFilter::Not(_)));
    }

    #[test]
    fn attrs_of_translation_equal_scope() {
        for alg in [
            "(bgp (?p <:name> ?n))",
            crate::sparql::tests::EMAIL_QUERY_ALG,
            "(minus (bgp (?p <:name> ?n)) (bgp (?p <:workEmail> ?e)))",
            "(union (bgp (?p <:name> ?n)) (bgp (?p <:workEmail> ?e)))",
        ] {
            let p = parse_algebra(alg).unwrap();
            let e = translate(&p);
            assert_eq!(attrs(&e, &TripleSchema).unwrap(), var_scope(&p));
        }
    }

    #[test]
    fn translation_agrees_on_the_email_query() {
        check_translation_agreement(crate::sparql::tests::EMAIL_QUERY_ALG, G);
    }

    #[test]
    fn translation_agrees_across_the_operator_zoo() {
        for alg in [
            "(bgp (?p <:name> ?n))",
            "(bgp (?p <:name> ?n) (?p <:workEmail> ?e))",
            "(join (bgp (?p <:name> ?n)) (bgp (?p <:workEmail> ?e)))",
            "(union (bgp (?p <:name> ?n)) (bgp (?p <:workEmail> ?n)))",
            "(opt (bgp (?p <:name> ?n)) (bgp (?p <:workEmail> ?e)) true)",
            "(opt (bgp (?p <:name> ?n)) (bgp (?p <:workEmail> ?e)) (= ?e \"susan@company.com\"))",
            "(minus (bgp (?p <:name> ?n)) (bgp (?p <:workEmail> ?e)))",
            "(minus (bgp (?p <:name> ?n)) (bgp (?x <:workEmail> ?e)))",
            "(proj (bgp (?p <:name> ?n)) (?n))",
            "(dist (union (bgp (?p <:name> ?n)) (bgp (?p <:name> ?n))))",
            "(filter (bgp (?p <:name> ?n)) (bound ?n))",
            "(bind (bgp (?p <:name> ?n)) ?k <:c>)",
            "(filter (opt (bgp (?p <:name> ?n)) (bgp (?p <:workEmail> ?e)) true) (not (bound ?e)))",
        ] {
            check_translation_agreement(alg, G);
        }
    }

    #[test]
    fn minus_no_shared_vars_keeps_left() {
        // disjunction over no shared variables is false: nothing matches,
        // every left row survives the isNull(witness) selection
        check_translation_agreement(
            "(minus (bgp (?p <:name> ?n)) (bgp (?x <:personalEmail> ?e)))",
            G,
        );
    }

    #[test]
    fn translation_is_linear_in_pattern_size() {
        for alg in [
            crate::sparql::tests::EMAIL_QUERY_ALG,
            "(minus (bgp (?p <:name> ?n)) (bgp (?p <:workEmail> ?e)))",
        ] {
            let p = parse_algebra(alg).unwrap();
            let e = translate(&p);
            assert!(e.node_count() <= 12 * pattern_size(&p));
        }
    }

    pub(crate) fn pattern_size(p: &GraphPattern) -> usize {
        match p {
            GraphPattern::Bgp(tps) => 1 + tps.len(),
            GraphPattern::Filter(a, _)
            | GraphPattern::Bind(a, _, _)
            | GraphPattern::Proj(a, _)
            | GraphPattern::Dist(a) => 1 + pattern_size(a),
            GraphPattern::Union(a, b)
            | GraphPattern::Join(a, b)
            | GraphPattern::Minus(a, b) => 1 + pattern_size(a) + pattern_size(b),
            GraphPattern::Opt(a, b, _) => 1 + pattern_size(a) + pattern_size(b),
        }
    }
}
