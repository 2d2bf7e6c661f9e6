use super::*;
use crate::fuzz::{diff_relations, gen_instance, gen_pattern, gen_wd_pattern, Vocab};
use crate::mapping::tests::{people_setup, PEOPLE_MAPPING, PEOPLE_SCHEMA};
use crate::mapping::{parse_mapping, parse_schema, unfold, virtual_graph};
use crate::ra::eval::{enumerate_tuples, eval, filter_eval3, small_domain, DbInstance, Relation, Tuple};
use crate::ra::{dump, DbValue};
use crate::sparql::{parse_algebra, tests::EMAIL_QUERY_ALG};
use crate::three::Tv3;
use crate::translate::{relational_answer, translate};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn count_nodes(e: &RaExpr, pred: &dyn Fn(&RaExpr) -> bool) -> usize {
    let own = usize::from(pred(e));
    own + e
        .children()
        .iter()
        .map(|c| count_nodes(c, pred))
        .sum::<usize>()
}

fn find_nodes<'a>(e: &'a RaExpr, pred: &dyn Fn(&RaExpr) -> bool, out: &mut Vec<&'a RaExpr>) {
    if pred(e) {
        out.push(e);
    }
    for c in e.children() {
        find_nodes(c, pred, out);
    }
}

/// Visits every term in the tree, including terms nested in filters and
/// the subterms of conditionals and templates.
fn walk_terms(e: &RaExpr, visit: &mut dyn FnMut(&RaTerm)) {
    fn term(t: &RaTerm, visit: &mut dyn FnMut(&RaTerm)) {
        visit(t);
        match t {
            RaTerm::If(g, a, b) => {
                filter(g, visit);
                term(a, visit);
                term(b, visit);
            }
            RaTerm::IriTpl(_, args) => {
                for a in args {
                    term(a, visit);
                }
            }
            _ => {}
        }
    }
    fn filter(f: &RaFilter, visit: &mut dyn FnMut(&RaTerm)) {
        match f {
            RaFilter::True => {}
            RaFilter::IsNull(ts) => ts.iter().for_each(|t| term(t, visit)),
            RaFilter::Eq(a, b) => {
                term(a, visit);
                term(b, visit);
            }
            RaFilter::And(a, b) => {
                filter(a, visit);
                filter(b, visit);
            }
            RaFilter::Not(a) => filter(a, visit),
        }
    }
    match e {
        RaExpr::ExtProject(_, assigns) => assigns.iter().for_each(|(_, t)| term(t, visit)),
        RaExpr::Extend(_, _, t) => term(t, visit),
        RaExpr::Select(_, f)
        | RaExpr::JoinF(_, _, f)
        | RaExpr::LeftJoinF(_, _, f) => filter(f, visit),
        _ => {}
    }
    for c in e.children() {
        walk_terms(c, visit);
    }
}

fn coalesce_count(e: &RaExpr) -> usize {
    let mut n = 0;
    walk_terms(e, &mut |t| {
        if t.as_coalesce().is_some() {
            n += 1;
        }
    });
    n
}

/// Conjuncts shaped like a variable-compatibility test: a disjunction
/// mixing an attribute equality with null tests.
fn compat_disjunct_count(e: &RaExpr) -> usize {
    fn in_filter(f: &RaFilter) -> usize {
        f.conjuncts()
            .iter()
            .filter(|c| {
                let ds = c.disjuncts();
                ds.len() >= 2
                    && ds
                        .iter()
                        .any(|d| matches!(d, RaFilter::Eq(RaTerm::Attr(_), RaTerm::Attr(_))))
                    && ds.iter().any(|d| matches!(d, RaFilter::IsNull(_)))
            })
            .count()
    }
    let own = match e {
        RaExpr::Select(_, f) | RaExpr::JoinF(_, _, f) | RaExpr::LeftJoinF(_, _, f) => in_filter(f),
        _ => 0,
    };
    let mut guards = 0;
    if let RaExpr::ExtProject(_, assigns) = e {
        for (_, t) in assigns {
            let mut stack = vec![t];
            while let Some(t) = stack.pop() {
                match t {
                    RaTerm::If(g, a, b) => {
                        guards += in_filter(g);
                        stack.push(a);
                        stack.push(b);
                    }
                    RaTerm::IriTpl(_, args) => stack.extend(args.iter()),
                    _ => {}
                }
            }
        }
    }
    own + guards
        + e.children()
            .iter()
            .map(|c| compat_disjunct_count(c))
            .sum::<usize>()
}

fn pipeline(
    schema: &str,
    mapping: &str,
    query: &str,
) -> (SchemaCatalog, GraphPattern, RaExpr, Optimized) {
    let cat = parse_schema(schema).unwrap();
    let m = parse_mapping(mapping, &cat).unwrap();
    let p = parse_algebra(query).unwrap();
    let e = unfold(&translate(&p), &m).unwrap();
    let out = optimize(&e, &cat, Some(&p));
    (cat, p, e, out)
}

fn assert_equiv_on(
    cat: &SchemaCatalog,
    mapping_text: &str,
    p: &GraphPattern,
    plans: &[(&str, &RaExpr)],
    db: &DbInstance,
) {
    let m = parse_mapping(mapping_text, cat).unwrap();
    let g = virtual_graph(&m, db).unwrap();
    let want = relational_answer(p, &g);
    for (label, e) in plans {
        let got = eval(e, db).unwrap();
        if let Some(d) = diff_relations("reference", &want, label, &got) {
            panic!("{d}");
        }
    }
}

// ---- golden plans --------------------------------------------------------

const TWO_SOURCE_SCHEMA: &str = "\
relation people(id*, fullName*, workEmail, homeEmail, spouseId)
key(id)
fk(spouseId -> people.id)
relation people2(id*, homeEmail2)
key(id)
";

const TWO_SOURCE_MAPPING: &str = "\
head(tpl:iri_1(id), <:name>, attr:fullName) <- people
head(tpl:iri_1(id), <:workEmail>, attr:workEmail) <- people
head(tpl:iri_1(id), <:personalEmail>, attr:homeEmail) <- people
head(tpl:iri_1(id), <:personalEmail>, attr:homeEmail2) <- people2
";

const NONNULL_WORK_SCHEMA: &str = "\
relation people(id*, fullName*, workEmail*, homeEmail, spouseId)
key(id)
fk(spouseId -> people.id)
relation people2(id*, homeEmail2)
key(id)
";

const NONNULL_WORK_MAPPING: &str = "\
head(tpl:iri_1(id), <:name>, attr:fullName) <- people
head(tpl:iri_1(id), <:workEmail>, attr:workEmail) <- people
head(tpl:iri_1(id), <:personalEmail>, attr:homeEmail2) <- people2
";

const SPOUSE_QUERY_ALG: &str = "(proj (opt (bgp (?p <:name> ?n)) (bgp (?p <:hasSpouse> ?s) (?s <:name> ?sn)) true) (?n ?s ?sn))";

const REVIEW_SCHEMA: &str = "\
relation product(pid*)
key(pid)
relation review(rid*, pid*, lang)
key(rid)
fk(pid -> product.pid)
";

const REVIEW_MAPPING: &str = "\
head(tpl:iri_1(pid), <:type>, iri::Product) <- product
head(tpl:iri_1(pid), <:hasReview>, tpl:iri_2(rid)) <- review
head(tpl:iri_2(rid), <:hasLang>, attr:lang) <- review
";

const REVIEW_QUERY_ALG: &str = "\
(proj (filter (opt (opt (bgp (?p <:type> <:Product>)) \
                        (filter (bgp (?p <:hasReview> ?r) (?r <:hasLang> ?l)) (= ?l \"en\")) \
                        true) \
                   (filter (bgp (?p <:hasReview> ?r) (?r <:hasLang> ?l)) (= ?l \"zh\")) \
                   true) \
              (bound ?r)) \
      (?p ?r ?l))";

fn is_base(e: &RaExpr) -> bool {
    matches!(e, RaExpr::Base(r) if r != UNIT_REL)
}

fn is_left_join(e: &RaExpr) -> bool {
    matches!(e, RaExpr::LeftJoinF(..))
}

#[test]
fn email_query_collapses_to_one_scan() {
    let (cat, p, e, out) = pipeline(PEOPLE_SCHEMA, PEOPLE_MAPPING, EMAIL_QUERY_ALG);
    assert!(!out.round_limit_hit);
    assert_eq!(count_nodes(&out.expr, &is_base), 1);
    assert_eq!(count_nodes(&out.expr, &is_left_join), 0);
    assert_eq!(coalesce_count(&out.expr), 1);
    let d = dump(&out.expr);
    assert!(d.contains("coalesce(workEmail, homeEmail)"), "{d}");
    assert!(d.contains("base people"), "{d}");
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..10 {
        let db = gen_instance(&mut rng, &cat, 12);
        assert_equiv_on(
            &cat,
            PEOPLE_MAPPING,
            &p,
            &[("unfolded", &e), ("optimized", &out.expr)],
            &db,
        );
    }
}

#[test]
fn two_source_keeps_one_left_join_over_a_union() {
    let (cat, p, e, out) = pipeline(TWO_SOURCE_SCHEMA, TWO_SOURCE_MAPPING, EMAIL_QUERY_ALG);
    assert_eq!(count_nodes(&out.expr, &is_left_join), 1);
    let mut ljs = Vec::new();
    find_nodes(&out.expr, &is_left_join, &mut ljs);
    let RaExpr::LeftJoinF(_, right, _) = ljs[0] else {
        unreachable!()
    };
    // the optional side stays a two-branch union of the two sources
    assert_eq!(
        count_nodes(right, &|n| matches!(n, RaExpr::OuterUnion(..) | RaExpr::Union(..))),
        1
    );
    assert_eq!(count_nodes(right, &is_base), 2);
    assert_eq!(count_nodes(&out.expr, &is_base), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..10 {
        let db = gen_instance(&mut rng, &cat, 12);
        assert_equiv_on(
            &cat,
            TWO_SOURCE_MAPPING,
            &p,
            &[("unfolded", &e), ("optimized", &out.expr)],
            &db,
        );
    }
}

#[test]
fn nonnull_work_email_drops_the_optional_entirely() {
    let (cat, p, e, out) = pipeline(NONNULL_WORK_SCHEMA, NONNULL_WORK_MAPPING, EMAIL_QUERY_ALG);
    assert_eq!(count_nodes(&out.expr, &is_base), 1);
    assert_eq!(count_nodes(&out.expr, &is_left_join), 0);
    assert_eq!(coalesce_count(&out.expr), 0);
    let d = dump(&out.expr);
    assert!(d.contains("e/workEmail"), "{d}");
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..10 {
        let db = gen_instance(&mut rng, &cat, 12);
        assert_equiv_on(
            &cat,
            NONNULL_WORK_MAPPING,
            &p,
            &[("unfolded", &e), ("optimized", &out.expr)],
            &db,
        );
    }
}

#[test]
fn spouse_query_needs_two_scans_and_one_left_join() {
    let (cat, p, e, out) = pipeline(PEOPLE_SCHEMA, PEOPLE_MAPPING, SPOUSE_QUERY_ALG);
    assert_eq!(count_nodes(&out.expr, &is_base), 2);
    assert_eq!(count_nodes(&out.expr, &is_left_join), 1);
    let mut ljs = Vec::new();
    find_nodes(&out.expr, &is_left_join, &mut ljs);
    let RaExpr::LeftJoinF(_, _, f) = ljs[0] else {
        unreachable!()
    };
    // the join is natural on the shared spouse attribute
    assert_eq!(*f, RaFilter::True);
    let d = dump(&out.expr);
    assert!(d.contains("iri_1(spouseId)"), "{d}");
    assert!(d.contains("iri_1(id)"), "{d}");
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for _ in 0..10 {
        let db = gen_instance(&mut rng, &cat, 12);
        assert_equiv_on(
            &cat,
            PEOPLE_MAPPING,
            &p,
            &[("unfolded", &e), ("optimized", &out.expr)],
            &db,
        );
    }
}

/// 8 products, 12 reviews with a spread of languages and missing values.
fn review_instance() -> DbInstance {
    use crate::ra::attrset;
    let mut product = Relation::empty(attrset(&["pid"]));
    for pid in 1..=8i64 {
        let t: Tuple = [("pid".to_string(), DbValue::Int(pid))].into_iter().collect();
        product.add(t, 1).unwrap();
    }
    let mut review = Relation::empty(attrset(&["rid", "pid", "lang"]));
    let langs = [
        Some("en"),
        Some("zh"),
        None,
        Some("fr"),
        Some("en"),
        Some("zh"),
    ];
    for rid in 1..=12i64 {
        let lang = match langs[(rid as usize - 1) % langs.len()] {
            Some(s) => DbValue::text(s),
            None => DbValue::Null,
        };
        let t: Tuple = [
            ("rid".to_string(), DbValue::Int(rid)),
            ("pid".to_string(), DbValue::Int((rid - 1) % 8 + 1)),
            ("lang".to_string(), lang),
        ]
        .into_iter()
        .collect();
        review.add(t, 1).unwrap();
    }
    let mut db = DbInstance::new();
    db.insert("product", product);
    db.insert("review", review);
    db
}

#[test]
fn review_query_splits_into_union_with_anti_join() {
    let (cat, p, e, out) = pipeline(REVIEW_SCHEMA, REVIEW_MAPPING, REVIEW_QUERY_ALG);
    assert!(!out.round_limit_hit);
    let mut unions = Vec::new();
    find_nodes(&out.expr, &|n| matches!(n, RaExpr::OuterUnion(..)), &mut unions);
    assert_eq!(unions.len(), 1);
    let RaExpr::OuterUnion(first, second) = unions[0] else {
        unreachable!()
    };
    assert_eq!(count_nodes(first, &is_left_join), 0);
    assert_eq!(count_nodes(second, &is_left_join), 1);
    // the second branch filters on a null witness: the anti-join test
    let mut selects = Vec::new();
    find_nodes(second, &|n| matches!(n, RaExpr::Select(..)), &mut selects);
    let anti = selects.iter().any(|s| {
        let RaExpr::Select(_, f) = s else { return false };
        f.conjuncts()
            .iter()
            .any(|c| matches!(c, RaFilter::IsNull(_)))
    });
    assert!(anti, "{}", dump(&out.expr));
    let db = review_instance();
    assert_eq!(
        db.relations.values().map(|r| r.iter().map(|(_, n)| n).sum::<i64>()).sum::<i64>(),
        20
    );
    assert_equiv_on(
        &cat,
        REVIEW_MAPPING,
        &p,
        &[("unfolded", &e), ("optimized", &out.expr)],
        &db,
    );
}

// ---- per-rule soundness --------------------------------------------------

fn golden_cases() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        (PEOPLE_SCHEMA, PEOPLE_MAPPING, EMAIL_QUERY_ALG),
        (TWO_SOURCE_SCHEMA, TWO_SOURCE_MAPPING, EMAIL_QUERY_ALG),
        (NONNULL_WORK_SCHEMA, NONNULL_WORK_MAPPING, EMAIL_QUERY_ALG),
        (PEOPLE_SCHEMA, PEOPLE_MAPPING, SPOUSE_QUERY_ALG),
        (REVIEW_SCHEMA, REVIEW_MAPPING, REVIEW_QUERY_ALG),
    ]
}

fn snapshots(cat: &SchemaCatalog, p: &GraphPattern, e: &RaExpr) -> Vec<(String, RaExpr)> {
    let mut snaps = vec![("start".to_string(), e.clone())];
    optimize_observed(e, cat, Some(p), |cur, step| {
        snaps.push((step.rule.to_string(), cur.clone()));
    });
    snaps
}

fn check_snapshots(
    snaps: &[(String, RaExpr)],
    cat: &SchemaCatalog,
    rng: &mut ChaCha8Rng,
    instances: usize,
    rows: usize,
    tally: &mut std::collections::BTreeMap<String, usize>,
) {
    for _ in 0..instances {
        let db = gen_instance(rng, cat, rows);
        let mut prev = eval(&snaps[0].1, &db).unwrap();
        for (rule, expr) in &snaps[1..] {
            let cur = eval(expr, &db).unwrap();
            if let Some(d) = diff_relations("before", &prev, "after", &cur) {
                panic!("rule {rule} changed the result: {d}");
            }
            *tally.entry(rule.clone()).or_default() += 1;
            prev = cur;
        }
    }
}

#[test]
fn every_rule_application_preserves_bags() {
    let mut tally = std::collections::BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(211);
    for (schema, mapping, query) in golden_cases() {
        let cat = parse_schema(schema).unwrap();
        let m = parse_mapping(mapping, &cat).unwrap();
        let p = parse_algebra(query).unwrap();
        let e = unfold(&translate(&p), &m).unwrap();
        let snaps = snapshots(&cat, &p, &e);
        check_snapshots(&snaps, &cat, &mut rng, 15, 9, &mut tally);
    }
    // random pipelines widen the set of rules that get exercised
    let (cat, m, _) = people_setup();
    let vocab = Vocab::for_mapping(&m);
    for i in 0..25u64 {
        let mut prng = ChaCha8Rng::seed_from_u64(1000 + i);
        let p = gen_pattern(&mut prng, &vocab, 3, 4);
        let e = unfold(&translate(&p), &m).unwrap();
        let snaps = snapshots(&cat, &p, &e);
        check_snapshots(&snaps, &cat, &mut rng, 3, 7, &mut tally);
    }
    for required in [
        "lift-filter",
        "absorb-filter",
        "merge-projections",
        "cond",
        "coalesce-elim",
        "eq-to-shared",
        "one-match-if",
        "term-simplify",
        "compulsory-match",
        "merge-scans",
        "redundant-join-elim",
        "drop-optional",
        "anti-join",
        "split-optional",
        "hoist-optional",
        "join-transfer",
        "strengthen",
        "wd-join",
        "push-rename",
        "rename-as-projection",
        "select-merge",
        "push-null-test",
    ] {
        assert!(tally.contains_key(required), "rule {required} never fired");
    }
}

// ---- gated rules refuse without their premises ---------------------------

const GATE_SCHEMA: &str = "\
relation ta(x*, y)
key(x)
relation tb(x*, z*)
key(x)
relation tc(z*, w*)
relation td(x*)
key(x)
relation tu(a*, b*)
";

fn gate_setup() -> (SchemaCatalog, DbInstance) {
    use crate::ra::attrset;
    let cat = parse_schema(GATE_SCHEMA).unwrap();
    let mut db = DbInstance::new();
    let mut ta = Relation::empty(attrset(&["x", "y"]));
    let row: Tuple = [
        ("x".to_string(), DbValue::Int(1)),
        ("y".to_string(), DbValue::Int(1)),
    ]
    .into_iter()
    .collect();
    ta.add(row, 1).unwrap();
    db.insert("ta", ta);
    let mut tb = Relation::empty(attrset(&["x", "z"]));
    let row: Tuple = [
        ("x".to_string(), DbValue::Int(1)),
        ("z".to_string(), DbValue::text("a")),
    ]
    .into_iter()
    .collect();
    tb.add(row, 1).unwrap();
    db.insert("tb", tb);
    db.insert("tc", Relation::empty(attrset(&["z", "w"])));
    db.insert("td", Relation::empty(attrset(&["x"])));
    let mut tu = Relation::empty(attrset(&["a", "b"]));
    let row: Tuple = [
        ("a".to_string(), DbValue::Int(1)),
        ("b".to_string(), DbValue::Int(1)),
    ]
    .into_iter()
    .collect();
    tu.add(row, 2).unwrap();
    db.insert("tu", tu);
    (cat, db)
}

#[test]
fn left_join_stays_without_an_inclusion_witness() {
    let (cat, mut db) = gate_setup();
    // no foreign key from ta.x to tb.x: some left rows may have no match
    let e = RaExpr::LeftJoinF(
        Box::new(RaExpr::Base("ta".into())),
        Box::new(RaExpr::Base("tb".into())),
        RaFilter::True,
    );
    assert_eq!(rule_nljr(&e, &cat), e);
    let naive = RaExpr::nat_join(RaExpr::Base("ta".into()), RaExpr::Base("tb".into()));
    use crate::ra::attrset;
    db.insert("tb", Relation::empty(attrset(&["x", "z"])));
    let kept = eval(&e, &db).unwrap();
    let joined = eval(&naive, &db).unwrap();
    assert_eq!(kept.iter().map(|(_, n)| n).sum::<i64>(), 1);
    assert!(joined.is_empty());
}

#[test]
fn join_transfer_refuses_without_inclusion() {
    let (cat, db) = gate_setup();
    // key coverage and the non-null witness hold, inclusion does not
    let e = RaExpr::LeftJoinF(
        Box::new(RaExpr::Base("ta".into())),
        Box::new(RaExpr::join_f(
            RaExpr::Base("tb".into()),
            RaExpr::Base("tc".into()),
            RaFilter::True,
        )),
        RaFilter::True,
    );
    assert_eq!(rule_join_transfer(&e, &cat), e);
    let naive = RaExpr::ext_project(
        RaExpr::LeftJoinF(
            Box::new(RaExpr::nat_join(
                RaExpr::Base("ta".into()),
                RaExpr::Base("tb".into()),
            )),
            Box::new(RaExpr::Base("tc".into())),
            RaFilter::True,
        ),
        vec![
            ("x".to_string(), RaTerm::attr("x")),
            ("y".to_string(), RaTerm::attr("y")),
            (
                "z".to_string(),
                RaTerm::If(
                    Box::new(RaFilter::not(RaFilter::is_null(vec![RaTerm::attr("w")]))),
                    Box::new(RaTerm::attr("z")),
                    Box::new(RaTerm::null()),
                ),
            ),
            ("w".to_string(), RaTerm::attr("w")),
        ],
    );
    use crate::ra::attrset;
    let mut db = db;
    db.insert("tb", Relation::empty(attrset(&["x", "z"])));
    let kept = eval(&e, &db).unwrap();
    let moved = eval(&naive, &db).unwrap();
    assert_eq!(kept.iter().map(|(_, n)| n).sum::<i64>(), 1);
    assert!(moved.is_empty());
}

#[test]
fn redundant_join_stays_without_a_foreign_key() {
    let (cat, db) = gate_setup();
    let e = RaExpr::nat_join(RaExpr::Base("tb".into()), RaExpr::Base("td".into()));
    assert_eq!(rule_nljr(&e, &cat), e);
    // td is empty, so dropping the join half changes the result
    let naive = RaExpr::Base("tb".into());
    assert!(eval(&e, &db).unwrap().is_empty());
    assert!(!eval(&naive, &db).unwrap().is_empty());
}

#[test]
fn self_join_does_not_merge_without_a_key() {
    let (cat, db) = gate_setup();
    let e = RaExpr::nat_join(RaExpr::Base("tu".into()), RaExpr::Base("tu".into()));
    assert_eq!(rule_nljr(&e, &cat), e);
    // multiplicities square under the self join of a bag
    let naive = RaExpr::Base("tu".into());
    let joined = eval(&e, &db).unwrap();
    let scan = eval(&naive, &db).unwrap();
    assert_eq!(joined.iter().map(|(_, n)| n).sum::<i64>(), 4);
    assert_eq!(scan.iter().map(|(_, n)| n).sum::<i64>(), 2);
}

#[test]
fn optional_filters_stay_when_the_certificate_fails() {
    let (cat, db) = gate_setup();
    // g is satisfiable together with the join condition, so neither the
    // anti-join strengthening nor the union split may fire
    let g = RaFilter::or(
        RaFilter::is_null(vec![RaTerm::attr("z")]),
        RaFilter::eq(RaTerm::attr("z"), RaTerm::Const(DbValue::text("a"))),
    );
    let e = RaExpr::select(
        RaExpr::LeftJoinF(
            Box::new(RaExpr::Base("ta".into())),
            Box::new(RaExpr::Base("tb".into())),
            RaFilter::True,
        ),
        g.clone(),
    );
    assert_eq!(rule_ljd(&e, &cat), e);

    let lj = RaExpr::LeftJoinF(
        Box::new(RaExpr::Base("ta".into())),
        Box::new(RaExpr::Base("tb".into())),
        RaFilter::True,
    );
    let anti = RaExpr::select(
        lj.clone(),
        RaFilter::and(RaFilter::is_null(vec![RaTerm::attr("z")]), RaFilter::True),
    );
    let split = RaExpr::outer_union(
        RaExpr::Base("ta".into()),
        RaExpr::join_f(
            RaExpr::Base("ta".into()),
            RaExpr::Base("tb".into()),
            g,
        ),
    );
    let original = eval(&e, &db).unwrap();
    assert_eq!(original.iter().map(|(_, n)| n).sum::<i64>(), 1);
    let anti_r = eval(&anti, &db).unwrap();
    assert!(anti_r.is_empty(), "anti-join form dropped nothing to drop");
    let split_r = eval(&split, &db).unwrap();
    assert_eq!(split_r.iter().map(|(_, n)| n).sum::<i64>(), 2);
}

#[test]
fn shape_rules_wait_for_the_shape_premise() {
    // forcing the optional-friendly rewrites onto a query outside the
    // fragment produces a different answer on some instance
    let cat = parse_schema(TWO_SOURCE_SCHEMA).unwrap();
    let m = parse_mapping(TWO_SOURCE_MAPPING, &cat).unwrap();
    let p = parse_algebra(EMAIL_QUERY_ALG).unwrap();
    let e = unfold(&translate(&p), &m).unwrap();

    // with the real pattern the shape-gated phase stays silent
    let honest = optimize(&e, &cat, Some(&p));
    assert!(honest.trace.steps.iter().all(|s| s.phase != "wd"));

    // with a fake shape witness it fires, and the result is wrong
    let dummy = parse_algebra("(bgp (?p <:name> ?n))").unwrap();
    let forced = optimize(&e, &cat, Some(&dummy));
    assert!(forced.trace.steps.iter().any(|s| s.phase == "wd"));
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let mut diverged = false;
    for _ in 0..60 {
        let db = gen_instance(&mut rng, &cat, 10);
        let g = virtual_graph(&m, &db).unwrap();
        let want = relational_answer(&p, &g);
        let got = eval(&forced.expr, &db).unwrap();
        if diff_relations("reference", &want, "forced", &got).is_some() {
            diverged = true;
            break;
        }
    }
    assert!(diverged, "forced rewrite never diverged from the reference");
}

// ---- shape of plans for the optional-friendly fragment -------------------

#[test]
fn friendly_fragment_plans_have_no_compat_residue() {
    let (cat, m, _) = people_setup();
    let vocab = Vocab::for_mapping(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let mut irng = ChaCha8Rng::seed_from_u64(502);
    for _ in 0..40 {
        let p = gen_wd_pattern(&mut rng, &vocab, 3, 5);
        let e = unfold(&translate(&p), &m).unwrap();
        let out = optimize(&e, &cat, Some(&p));
        assert_eq!(
            compat_disjunct_count(&out.expr),
            0,
            "pattern {p:?}\nplan {}",
            dump(&out.expr)
        );
        assert_eq!(
            coalesce_count(&out.expr),
            0,
            "pattern {p:?}\nplan {}",
            dump(&out.expr)
        );
        for _ in 0..2 {
            let db = gen_instance(&mut irng, &cat, 9);
            let a = eval(&e, &db).unwrap();
            let b = eval(&out.expr, &db).unwrap();
            if let Some(d) = diff_relations("unfolded", &a, "optimized", &b) {
                panic!("pattern {p:?}: {d}");
            }
        }
    }
}

// ---- global engine properties --------------------------------------------

#[test]
fn optimizing_never_grows_the_plan() {
    for (schema, mapping, query) in golden_cases() {
        let (_, _, e, out) = pipeline(schema, mapping, query);
        assert!(
            out.expr.node_count() <= e.node_count(),
            "{query}: {} -> {}",
            e.node_count(),
            out.expr.node_count()
        );
    }
}

#[test]
fn optimizer_is_a_fixpoint_on_its_own_output() {
    for (schema, mapping, query) in golden_cases() {
        let (cat, p, _, out) = pipeline(schema, mapping, query);
        let again = optimize(&out.expr, &cat, Some(&p));
        assert!(again.trace.steps.is_empty(), "{query}: {:?}", again.trace.lines());
        assert_eq!(again.expr, out.expr);
    }
    let (cat, m, _) = people_setup();
    let vocab = Vocab::for_mapping(&m);
    for i in 0..15u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + i);
        let p = gen_pattern(&mut rng, &vocab, 3, 4);
        let e = unfold(&translate(&p), &m).unwrap();
        let out = optimize(&e, &cat, Some(&p));
        let again = optimize(&out.expr, &cat, Some(&p));
        assert_eq!(again.expr, out.expr, "{p:?}");
        assert!(again.trace.steps.is_empty(), "{p:?}: {:?}", again.trace.lines());
    }
}

// ---- derived facts hold on evaluation ------------------------------------

fn assert_props_hold(e: &RaExpr, cat: &SchemaCatalog, db: &DbInstance) {
    let Ok(r) = eval(e, db) else { return };
    let props = derive_props(e, cat);
    for (t, n) in r.iter() {
        for a in props.non_null.intersection(&r.schema) {
            assert!(
                !t.get(a).map(DbValue::is_null).unwrap_or(true),
                "claimed non-null {a} is null in {t:?}\n{}",
                dump(e)
            );
        }
        let _ = n;
    }
    for key in &props.keys {
        if !key.iter().all(|a| r.schema.contains(a)) {
            continue;
        }
        let mut seen = std::collections::BTreeSet::new();
        for (t, n) in r.iter() {
            let proj: Vec<&DbValue> = key.iter().map(|a| t.get(a).unwrap()).collect();
            if proj.iter().any(|v| v.is_null()) {
                continue;
            }
            let owned: Vec<DbValue> = proj.into_iter().cloned().collect();
            assert!(
                n == 1 && seen.insert(owned),
                "claimed key {key:?} repeats in {}",
                dump(e)
            );
        }
    }
    if let Some(prov) = &props.prov {
        let scan = eval(&scan_of(prov), db).unwrap();
        assert!(
            diff_relations("scan", &scan, "expr", &r).is_none(),
            "provenance mismatch for {}",
            dump(e)
        );
    }
    for f in tuple_invariants(e, cat) {
        if !f.attrs().iter().all(|a| r.schema.contains(a)) {
            continue;
        }
        for (t, _) in r.iter() {
            assert_eq!(
                filter_eval3(&f, t),
                Tv3::True,
                "invariant {f:?} fails on {t:?} in {}",
                dump(e)
            );
        }
    }
    for c in e.children() {
        assert_props_hold(c, cat, db);
    }
}

#[test]
fn derived_facts_agree_with_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(701);
    for (schema, mapping, query) in golden_cases() {
        let (cat, _, e, out) = pipeline(schema, mapping, query);
        for _ in 0..6 {
            let db = gen_instance(&mut rng, &cat, 8);
            assert_props_hold(&e, &cat, &db);
            assert_props_hold(&out.expr, &cat, &db);
        }
    }
}

// ---- the refuter only rejects genuinely unsatisfiable filters ------------

fn gen_filter(rng: &mut ChaCha8Rng, depth: usize) -> RaFilter {
    fn term(rng: &mut ChaCha8Rng) -> RaTerm {
        match rng.gen_range(0..6u32) {
            0 => RaTerm::attr("x"),
            1 => RaTerm::attr("y"),
            2 => RaTerm::Const(DbValue::Int(0)),
            3 => RaTerm::Const(DbValue::Int(1)),
            4 => RaTerm::Const(DbValue::Null),
            _ => RaTerm::coalesce(RaTerm::attr("x"), RaTerm::attr("y")),
        }
    }
    match rng.gen_range(0..8u32) {
        0 => RaFilter::True,
        1..=2 => RaFilter::eq(term(rng), term(rng)),
        3 => RaFilter::is_null(vec![term(rng)]),
        4 => RaFilter::is_null(vec![term(rng), term(rng)]),
        5..=6 if depth > 0 => RaFilter::and(
            gen_filter(rng, depth - 1),
            gen_filter(rng, depth - 1),
        ),
        _ if depth > 0 => RaFilter::not(gen_filter(rng, depth - 1)),
        _ => RaFilter::is_null(vec![RaTerm::attr("x")]),
    }
}

#[test]
fn refuted_filters_are_unsatisfiable() {
    use crate::ra::attrset;
    let attrs = attrset(&["x", "y"]);
    let domain = small_domain();
    let tuples = enumerate_tuples(&attrs, &domain);
    let mut rng = ChaCha8Rng::seed_from_u64(801);
    let mut refuted = 0;
    for _ in 0..400 {
        let f = gen_filter(&mut rng, 3);
        if never_true(&f) {
            refuted += 1;
            for t in &tuples {
                assert_ne!(filter_eval3(&f, t), Tv3::True, "{f:?} holds on {t:?}");
            }
        }
    }
    assert!(refuted > 10, "the corpus never produced refutable filters");
    // a contradiction the syntactic pass cannot see without congruences
    let f = RaFilter::and(
        RaFilter::eq(RaTerm::attr("x"), RaTerm::attr("y")),
        RaFilter::and(
            RaFilter::eq(RaTerm::attr("x"), RaTerm::Const(DbValue::Int(0))),
            RaFilter::and(
                RaFilter::eq(RaTerm::attr("y"), RaTerm::Const(DbValue::Int(1))),
                RaFilter::not(RaFilter::is_null(vec![RaTerm::attr("x")])),
            ),
        ),
    );
    assert!(never_true(&f));
}
