use super::eval::*;
use super::*;
use crate::model::{parse_graph, Multiplicity, RdfGraph};

fn tup(cells: &[(&str, DbValue)]) -> Tuple {
    cells
        .iter()
        .map(|(a, v)| (a.to_string(), v.clone()))
        .collect()
}

struct TwoRels;

impl BaseSchemas for TwoRels {
    fn base_attrs(&self, rel: &str) -> Option<AttrSet> {
        match rel {
            "R" => Some(attrset(&["a", "b"])),
            "S" => Some(attrset(&["b", "c"])),
            "T" => Some(attrset(&["a"])),
            "W" => Some(attrset(&["b"])),
            _ => None,
        }
    }
}

#[test]
fn attrs_inference() {
    let nj = RaExpr::nat_join(RaExpr::Base("R".into()), RaExpr::Base("S".into()));
    assert_eq!(attrs(&nj, &TwoRels).unwrap(), attrset(&["a", "b", "c"]));
    let ou = RaExpr::outer_union(RaExpr::Base("T".into()), RaExpr::Base("W".into()));
    assert_eq!(attrs(&ou, &TwoRels).unwrap(), attrset(&["a", "b"]));
    let bad = RaExpr::project(RaExpr::Base("R".into()), attrset(&["c"]));
    assert_eq!(attrs(&bad, &TwoRels).unwrap_err(), RaError::MissingAttr("c".into()));
}

#[test]
fn term_eval_cases() {
    let t = tup(&[("a", DbValue::Null)]);
    let if_null = RaTerm::If(
        Box::new(RaFilter::is_null(vec![RaTerm::attr("a")])),
        Box::new(RaTerm::Const(DbValue::Int(1))),
        Box::new(RaTerm::Const(DbValue::Int(2))),
    );
    assert_eq!(term_eval(&if_null, &t), DbValue::Int(1));

    let t = tup(&[("a", DbValue::Null), ("b", DbValue::Int(5))]);
    let c = RaTerm::coalesce(RaTerm::attr("a"), RaTerm::attr("b"));
    assert_eq!(term_eval(&c, &t), DbValue::Int(5));

    let iri = RaTerm::IriTpl("iri_1".into(), vec![RaTerm::attr("a")]);
    assert_eq!(term_eval(&iri, &t), DbValue::Null);
}

#[test]
fn filter_eval3_cases() {
    let t = tup(&[("a", DbValue::Null), ("b", DbValue::Int(1))]);
    let f = RaFilter::is_null(vec![RaTerm::attr("a"), RaTerm::attr("b")]);
    assert_eq!(filter_eval3(&f, &t), Tv3::False);
    let f = RaFilter::eq(RaTerm::attr("a"), RaTerm::attr("b"));
    assert_eq!(filter_eval3(&f, &t), Tv3::Err);
    let t = tup(&[("a", DbValue::Int(1))]);
    let f = RaFilter::eq(RaTerm::attr("a"), RaTerm::attr("a"));
    assert_eq!(filter_eval3(&f, &t), Tv3::True);
    // cross-kind comparison is false, not an error
    let t = tup(&[("a", DbValue::Int(1)), ("b", DbValue::text("1"))]);
    let f = RaFilter::eq(RaTerm::attr("a"), RaTerm::attr("b"));
    assert_eq!(filter_eval3(&f, &t), Tv3::False);
}

#[test]
fn substitute_cases() {
    let f = RaFilter::eq(RaTerm::attr("u"), RaTerm::Const(DbValue::Int(3)));
    let subst: std::collections::BTreeMap<Attr, RaTerm> = [(
        "u".to_string(),
        RaTerm::coalesce(RaTerm::attr("u1"), RaTerm::attr("u2")),
    )]
    .into();
    let g = f.substitute(&subst);
    assert_eq!(
        g,
        RaFilter::eq(
            RaTerm::coalesce(RaTerm::attr("u1"), RaTerm::attr("u2")),
            RaTerm::Const(DbValue::Int(3))
        )
    );
    assert_eq!(f.substitute(&Default::default()), f);

    // isNull({u})[u/5] always evaluates to false
    let f = RaFilter::is_null(vec![RaTerm::attr("u")]);
    let subst: std::collections::BTreeMap<Attr, RaTerm> =
        [("u".to_string(), RaTerm::Const(DbValue::Int(5)))].into();
    let g = f.substitute(&subst);
    for t in enumerate_tuples(&AttrSet::new(), &small_domain()) {
        assert_eq!(filter_eval3(&g, &t), Tv3::False);
    }
}

#[test]
fn nullify_cases() {
    let f = RaFilter::not(RaFilter::is_null(vec![RaTerm::attr("e3")]));
    let g = f.nullify(&attrset(&["e3"]));
    for t in enumerate_tuples(&AttrSet::new(), &small_domain()) {
        assert_eq!(filter_eval3(&g, &t), Tv3::False);
    }
    let f = RaFilter::eq(RaTerm::attr("e2"), RaTerm::attr("e3"));
    assert_eq!(f.nullify(&AttrSet::new()), f);
    let g = f.nullify(&attrset(&["e3"]));
    for t in enumerate_tuples(&attrset(&["e2"]), &small_domain()) {
        assert_ne!(filter_eval3(&g, &t), Tv3::True);
    }
}

#[test]
fn never_true_cases() {
    let eq_null = RaFilter::eq(RaTerm::attr("e2"), RaTerm::null());
    assert!(never_true(&RaFilter::and(
        eq_null,
        RaFilter::eq(RaTerm::attr("x"), RaTerm::attr("y"))
    )));
    let isn = RaFilter::is_null(vec![RaTerm::attr("r2")]);
    assert!(never_true(&RaFilter::and(isn.clone(), RaFilter::not(isn))));
    assert!(!never_true(&RaFilter::eq(RaTerm::attr("a"), RaTerm::attr("b"))));
    assert!(never_true(&RaFilter::is_null(vec![RaTerm::Const(DbValue::Int(7))])));
    assert!(never_true(&RaFilter::eq(
        RaTerm::Const(DbValue::Int(1)),
        RaTerm::Const(DbValue::Int(2))
    )));
}

#[test]
fn never_true_is_sound_on_enumeration() {
    let candidates = vec![
        RaFilter::and(
            RaFilter::eq(RaTerm::attr("a"), RaTerm::null()),
            RaFilter::is_null(vec![RaTerm::attr("b")]),
        ),
        RaFilter::and(
            RaFilter::is_null(vec![RaTerm::attr("a")]),
            RaFilter::not(RaFilter::is_null(vec![RaTerm::attr("a")])),
        ),
        RaFilter::not(RaFilter::is_null(vec![RaTerm::null()])),
        RaFilter::eq(RaTerm::attr("a"), RaTerm::attr("b")),
        RaFilter::is_null(vec![RaTerm::attr("a")]),
    ];
    for f in candidates {
        if never_true(&f) {
            for t in enumerate_tuples(&f.attrs(), &small_domain()) {
                assert_ne!(filter_eval3(&f, &t), Tv3::True, "never_true lied on {f:?}");
            }
        }
    }
}

#[test]
fn excluded_middle_weakening() {
    let fs = vec![
        RaFilter::eq(RaTerm::attr("a"), RaTerm::attr("b")),
        RaFilter::is_null(vec![RaTerm::attr("a")]),
        RaFilter::and(
            RaFilter::eq(RaTerm::attr("a"), RaTerm::Const(DbValue::Int(1))),
            RaFilter::not(RaFilter::is_null(vec![RaTerm::attr("b")])),
        ),
    ];
    for f in fs {
        let lem = RaFilter::or(f.clone(), RaFilter::not(f.clone()));
        for t in enumerate_tuples(&f.attrs(), &small_domain()) {
            assert_ne!(filter_eval3(&lem, &t), Tv3::False);
        }
    }
}

#[test]
fn coalesce_matches_if_expansion() {
    let c = RaTerm::coalesce(RaTerm::attr("a"), RaTerm::attr("b"));
    let expanded = RaTerm::If(
        Box::new(RaFilter::not(RaFilter::is_null(vec![RaTerm::attr("a")]))),
        Box::new(RaTerm::attr("a")),
        Box::new(RaTerm::attr("b")),
    );
    for t in enumerate_tuples(&attrset(&["a", "b"]), &small_domain()) {
        assert_eq!(term_eval(&c, &t), term_eval(&expanded, &t));
    }
    assert!(c.as_coalesce().is_some());
}

#[test]
fn eval_basics() {
    let mut db = DbInstance::new();
    let mut r = Relation::empty(attrset(&["a"]));
    r.add(tup(&[("a", DbValue::Int(1))]), 2).unwrap();
    r.add(tup(&[("a", DbValue::Int(2))]), 1).unwrap();
    db.insert("T", r);
    let mut s = Relation::empty(attrset(&["b"]));
    s.add(tup(&[("b", DbValue::Int(9))]), 1).unwrap();
    db.insert("W", s);

    let diff = RaExpr::Diff(
        Box::new(RaExpr::Base("T".into())),
        Box::new(RaExpr::Base("T".into())),
    );
    assert!(eval(&diff, &db).unwrap().is_empty());

    // outer union with an empty right side pads with null
    db.insert("W", Relation::empty(attrset(&["b"])));
    let ou = RaExpr::outer_union(RaExpr::Base("T".into()), RaExpr::Base("W".into()));
    let out = eval(&ou, &db).unwrap();
    assert_eq!(out.schema, attrset(&["a", "b"]));
    assert_eq!(
        out.multiplicity(&tup(&[("a", DbValue::Int(1)), ("b", DbValue::Null)])),
        2
    );
}

#[test]
fn natjoin_rejects_null_shared_attrs() {
    let mut db = DbInstance::new();
    let mut r = Relation::empty(attrset(&["a", "b"]));
    r.add(tup(&[("a", DbValue::Int(1)), ("b", DbValue::Null)]), 1).unwrap();
    db.insert("R", r);
    let mut s = Relation::empty(attrset(&["b", "c"]));
    s.add(tup(&[("b", DbValue::Null), ("c", DbValue::Int(3))]), 1).unwrap();
    db.insert("S", s);
    let nj = RaExpr::nat_join(RaExpr::Base("R".into()), RaExpr::Base("S".into()));
    assert!(eval(&nj, &db).unwrap().is_empty());
}

#[test]
fn left_join_pads_unmatched() {
    let mut db = DbInstance::new();
    let mut r = Relation::empty(attrset(&["a"]));
    r.add(tup(&[("a", DbValue::Int(1))]), 1).unwrap();
    r.add(tup(&[("a", DbValue::Int(2))]), 1).unwrap();
    db.insert("T", r);
    let mut s = Relation::empty(attrset(&["a", "b"]));
    s.add(tup(&[("a", DbValue::Int(1)), ("b", DbValue::text("x"))]), 1).unwrap();
    db.insert("R", s);
    let lj = RaExpr::left_join_f(
        RaExpr::Base("T".into()),
        RaExpr::Base("R".into()),
        RaFilter::True,
    );
    let out = eval(&lj, &db).unwrap();
    assert_eq!(
        out.multiplicity(&tup(&[("a", DbValue::Int(1)), ("b", DbValue::text("x"))])),
        1
    );
    assert_eq!(
        out.multiplicity(&tup(&[("a", DbValue::Int(2)), ("b", DbValue::Null)])),
        1
    );
}

#[test]
fn select_is_monotone() {
    let mut db = DbInstance::new();
    let mut r = Relation::empty(attrset(&["a"]));
    for i in 0..5 {
        r.add(tup(&[("a", DbValue::Int(i))]), (i + 1) as Multiplicity).unwrap();
    }
    db.insert("T", r);
    let base = eval(&RaExpr::Base("T".into()), &db).unwrap();
    let sel = eval(
        &RaExpr::select(
            RaExpr::Base("T".into()),
            RaFilter::eq(RaTerm::attr("a"), RaTerm::Const(DbValue::Int(3))),
        ),
        &db,
    )
    .unwrap();
    for (t, n) in sel.iter() {
        assert!(n <= base.multiplicity(t));
    }
}

#[test]
fn triple_instance_counts() {
    assert_eq!(
        triple_instance(&RdfGraph::new()).relations[TRIPLE_REL].len(),
        0
    );
    let g = parse_graph(crate::sparql::tests::PEOPLE_GRAPH).unwrap();
    assert_eq!(triple_instance(&g).relations[TRIPLE_REL].len(), 7);
    let dup = parse_graph("<a> <p> <o> .\n<a> <p> <o> .\n").unwrap();
    let rel = &triple_instance(&dup).relations[TRIPLE_REL];
    assert_eq!(rel.len(), 1);
    assert!(rel.iter().all(|(_, n)| n == 1));
}

#[test]
fn instance_parsing() {
    let text = "relation people(id,fullName,workEmail,homeEmail)\n1,Peter Smith,peter@company.com,peter@perso.org\n2,John Lang,NULL,joe@perso.org\n3,Susan Mayer,susan@company.com,NULL\n";
    let db = parse_instance(text).unwrap();
    let people = &db.relations["people"];
    assert_eq!(people.len(), 3);
    let john = tup(&[
        ("id", DbValue::Int(2)),
        ("fullName", DbValue::text("John Lang")),
        ("workEmail", DbValue::Null),
        ("homeEmail", DbValue::text("joe@perso.org")),
    ]);
    assert_eq!(people.multiplicity(&john), 1);
    // structured IRI cells round-trip
    let db = parse_instance("relation r(x)\niri:iri_1:7\n").unwrap();
    let t = tup(&[("x", DbValue::Iri("iri_1".into(), vec![DbValue::Int(7)]))]);
    assert_eq!(db.relations["r"].multiplicity(&t), 1);
}

#[test]
fn term_db_bridge_roundtrip() {
    use crate::model::RdfTerm;
    let terms = vec![
        RdfTerm::iri("http://ex/a"),
        RdfTerm::iri("iri:iri_1:5"),
        RdfTerm::lit("hello"),
        RdfTerm::Literal("5".into(), Some("#int".into())),
        RdfTerm::Literal("x".into(), Some("@en".into())),
        RdfTerm::Blank("b1".into()),
    ];
    for t in terms {
        let v = term_to_db(&t);
        assert_eq!(db_to_term(&v), Some(t.clone()), "roundtrip failed for {t}");
    }
}

#[test]
fn dump_is_stable() {
    let e = RaExpr::ext_project(
        RaExpr::select(
            RaExpr::Base(TRIPLE_REL.into()),
            RaFilter::eq(
                RaTerm::attr("pred"),
                RaTerm::Const(DbValue::Iri("#iri".into(), vec![DbValue::text(":name")])),
            ),
        ),
        vec![
            ("p#1".to_string(), RaTerm::attr("sub")),
            ("n".to_string(), RaTerm::attr("obj")),
        ],
    );
    let d = dump(&e);
    // single occurrence of the suffixed name prints without its suffix
    assert_eq!(
        d,
        "project [n/obj, p/sub]\n  select (pred = #iri(\":name\"))\n    base triple\n"
    );
}
