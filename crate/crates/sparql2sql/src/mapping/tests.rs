use super::*;
use crate::ra::eval::{eval, p_equivalent, parse_instance, small_domain};
use crate::ra::{attrset, RaExpr, RaFilter, RaTerm};
use crate::sparql::{parse_algebra, tests::EMAIL_QUERY_ALG};
use crate::translate::{relational_answer, translate};

pub(crate) const PEOPLE_SCHEMA: &str = "\
relation people(id*, fullName*, workEmail, homeEmail, spouseId)
key(id)
fk(spouseId -> people.id)
";

pub(crate) const PEOPLE_MAPPING: &str = "\
head(tpl:iri_1(id), <:name>, attr:fullName) <- people
head(tpl:iri_1(id), <:workEmail>, attr:workEmail) <- people
head(tpl:iri_1(id), <:personalEmail>, attr:homeEmail) <- people
head(tpl:iri_1(id), <:hasSpouse>, tpl:iri_1(spouseId)) <- people
";

pub(crate) const PEOPLE_DB: &str = "\
relation people(id, fullName, workEmail, homeEmail, spouseId)
1, Peter Smith, peter@company.com, peter@perso.org, NULL
2, John Lang, NULL, joe@perso.org, NULL
3, Susan Mayer, susan@company.com, NULL, NULL
";

pub(crate) fn people_setup() -> (SchemaCatalog, Mapping, DbInstance) {
    let cat = parse_schema(PEOPLE_SCHEMA).unwrap();
    let mapping = parse_mapping(PEOPLE_MAPPING, &cat).unwrap();
    let db = parse_instance(PEOPLE_DB).unwrap();
    (cat, mapping, db)
}

#[test]
fn schema_parses() {
    let cat = parse_schema(PEOPLE_SCHEMA).unwrap();
    let people = &cat.relations["people"];
    assert_eq!(
        people.attrs,
        vec!["id", "fullName", "workEmail", "homeEmail", "spouseId"]
    );
    assert_eq!(people.non_nullable, attrset(&["id", "fullName"]));
    assert_eq!(people.unique_keys, vec![attrset(&["id"])]);
    assert_eq!(cat.foreign_keys.len(), 1);
    assert_eq!(cat.foreign_keys[0].parent_rel, "people");
}

#[test]
fn schema_rejects_fk_to_non_key() {
    let bad = "relation a(x, y)\nfk(y -> a.x)\n";
    assert_eq!(
        parse_schema(bad),
        Err(MappingError::FkParentNotKey("a".to_string()))
    );
}

#[test]
fn schema_rejects_unknown_attr() {
    let bad = "relation a(x)\nkey(z)\n";
    assert!(matches!(
        parse_schema(bad),
        Err(MappingError::UnknownAttr { .. })
    ));
}

#[test]
fn mapping_parses_and_guards_head_attrs() {
    let (_, mapping, _) = people_setup();
    assert_eq!(mapping.assertions.len(), 4);
    let name = &mapping.assertions[0];
    assert_eq!(name.sub, Slot::Tpl("iri_1".to_string(), vec!["id".to_string()]));
    assert_eq!(name.pred, ":name");
    assert_eq!(name.obj, Slot::AttrRef("fullName".to_string()));
    assert_eq!(name.notnull, attrset(&["id", "fullName"]));
    let spouse = &mapping.assertions[3];
    assert_eq!(spouse.notnull, attrset(&["id", "spouseId"]));
    assert_eq!(mapping.templates["iri_1"].arity, 1);
}

#[test]
fn mapping_rejects_arity_mismatch() {
    let cat = parse_schema("relation a(x, y)\n").unwrap();
    let text = "head(tpl:t(x), <:p>, attr:y) <- a\nhead(tpl:t(x, y), <:q>, attr:y) <- a\n";
    assert!(matches!(
        parse_mapping(text, &cat),
        Err(MappingError::ArityMismatch { .. })
    ));
}

#[test]
fn mapping_rejects_unknown_relation() {
    let cat = parse_schema("relation a(x)\n").unwrap();
    assert!(matches!(
        parse_mapping("head(attr:x, <:p>, attr:x) <- b\n", &cat),
        Err(MappingError::UnknownRelation(_))
    ));
}

fn tpl1(arg: RaTerm) -> RaTerm {
    RaTerm::IriTpl("iri_1".to_string(), vec![arg])
}

#[test]
fn rewrite_same_template_argwise() {
    let f = RaFilter::eq(tpl1(RaTerm::attr("x")), tpl1(RaTerm::attr("y")));
    assert_eq!(
        iri_equality_rewrite(&f),
        RaFilter::eq(RaTerm::attr("x"), RaTerm::attr("y"))
    );
}

#[test]
fn rewrite_different_templates_never_match() {
    let f = RaFilter::eq(
        tpl1(RaTerm::attr("x")),
        RaTerm::IriTpl("iri_2".to_string(), vec![RaTerm::attr("y")]),
    );
    assert_eq!(iri_equality_rewrite(&f), RaFilter::fals());
    assert!(never_true(&iri_equality_rewrite(&f)));
}

#[test]
fn rewrite_lifts_constant_iri() {
    // a pattern constant meets a template head
    let c = RaTerm::Const(DbValue::Iri(
        "iri_1".to_string(),
        vec![DbValue::Int(2)],
    ));
    let f = RaFilter::eq(tpl1(RaTerm::attr("id")), c);
    assert_eq!(
        iri_equality_rewrite(&f),
        RaFilter::eq(RaTerm::attr("id"), RaTerm::Const(DbValue::Int(2)))
    );
}

#[test]
fn rewrite_template_vs_plain_constant() {
    let f = RaFilter::eq(tpl1(RaTerm::attr("x")), RaTerm::Const(DbValue::text("a")));
    assert_eq!(iri_equality_rewrite(&f), RaFilter::fals());
}

#[test]
fn rewrite_pushes_is_null_through_templates() {
    let f = RaFilter::is_null(vec![tpl1(RaTerm::attr("x"))]);
    assert_eq!(
        iri_equality_rewrite(&f),
        RaFilter::is_null(vec![RaTerm::attr("x")])
    );
    let two = RaFilter::is_null(vec![RaTerm::IriTpl(
        "t".to_string(),
        vec![RaTerm::attr("x"), RaTerm::attr("y")],
    )]);
    assert_eq!(
        iri_equality_rewrite(&two),
        RaFilter::or(
            RaFilter::is_null(vec![RaTerm::attr("x")]),
            RaFilter::is_null(vec![RaTerm::attr("y")]),
        )
    );
}

#[test]
fn rewrite_preserves_truth_set() {
    let dom = small_domain();
    let cases = vec![
        RaFilter::eq(tpl1(RaTerm::attr("x")), tpl1(RaTerm::attr("y"))),
        RaFilter::is_null(vec![tpl1(RaTerm::attr("x"))]),
        RaFilter::is_null(vec![tpl1(RaTerm::attr("x")), RaTerm::attr("y")]),
        RaFilter::is_null(vec![RaTerm::IriTpl(
            "t".to_string(),
            vec![RaTerm::attr("x"), RaTerm::attr("y")],
        )]),
        RaFilter::not(RaFilter::eq(tpl1(RaTerm::attr("x")), tpl1(RaTerm::attr("y")))),
        RaFilter::and(
            RaFilter::eq(tpl1(RaTerm::attr("x")), tpl1(RaTerm::attr("y"))),
            RaFilter::is_null(vec![tpl1(RaTerm::attr("y"))]),
        ),
    ];
    for f in cases {
        let r = iri_equality_rewrite(&f);
        assert!(p_equivalent(&f, &r, &dom), "truth set changed for {f:?}");
    }
}

#[test]
fn unfold_keeps_only_matching_assertions() {
    let (cat, mapping, _) = people_setup();
    let p = parse_algebra("(bgp (?s <:name> ?n))").unwrap();
    let u = unfold(&translate(&p), &mapping).unwrap();
    // one assertion matches the :name predicate, so no union appears
    fn count(e: &RaExpr, pat: fn(&RaExpr) -> bool) -> usize {
        let mut n = usize::from(pat(e));
        for c in e.children() {
            n += count(c, pat);
        }
        n
    }
    assert_eq!(count(&u, |e| matches!(e, RaExpr::OuterUnion(..))), 0);
    assert_eq!(count(&u, |e| matches!(e, RaExpr::Base(r) if r == "people")), 1);
    assert_eq!(check_wellformed(&u, &cat).unwrap(), attrset(&["n", "s"]));
}

#[test]
fn unfold_unknown_predicate_gives_empty() {
    let (_, mapping, db) = people_setup();
    let p = parse_algebra("(bgp (?s <:age> ?a))").unwrap();
    let u = unfold(&translate(&p), &mapping).unwrap();
    let mut full = db.clone();
    full.insert("unit", crate::ra::eval::unit_relation());
    let out = eval(&u, &full).unwrap();
    assert_eq!(out.schema, attrset(&["a", "s"]));
    assert!(out.is_empty());
}

#[test]
fn unfold_open_predicate_unions_all_assertions() {
    let (_, mapping, _) = people_setup();
    let p = parse_algebra("(bgp (?s ?p ?o))").unwrap();
    let u = unfold(&translate(&p), &mapping).unwrap();
    fn count(e: &RaExpr) -> usize {
        let mut n = usize::from(matches!(e, RaExpr::OuterUnion(..)));
        for c in e.children() {
            n += count(c);
        }
        n
    }
    // four assertions, three unions
    assert_eq!(count(&u), 3);
}

#[test]
fn unfold_rejects_foreign_shapes() {
    let mapping = Mapping::default();
    let bare = RaExpr::Base(TRIPLE_REL.to_string());
    assert!(matches!(
        unfold(&bare, &mapping),
        Err(MappingError::NotTranslatorShape(_))
    ));
}

#[test]
fn virtual_graph_of_people() {
    let (_, mapping, db) = people_setup();
    let g = virtual_graph(&mapping, &db).unwrap();
    // 3 names, 2 work emails, 2 personal emails, no spouses
    assert_eq!(g.len(), 7);
    let subject = RdfTerm::Iri("iri:iri_1:1".to_string());
    assert!(g.triples.iter().any(|t| {
        t.sub == subject
            && t.pred == RdfTerm::Iri(":name".to_string())
            && t.obj == RdfTerm::Literal("Peter Smith".to_string(), None)
    }));
}

#[test]
fn unfolded_email_query_matches_direct_evaluation() {
    let (_, mapping, db) = people_setup();
    let p = parse_algebra(EMAIL_QUERY_ALG).unwrap();
    let u = unfold(&translate(&p), &mapping).unwrap();
    let got = eval(&u, &db).unwrap();
    let g = virtual_graph(&mapping, &db).unwrap();
    let want = relational_answer(&p, &g);
    assert_eq!(got, want);
    // the three expected rows, one per person
    assert_eq!(got.len(), 3);
    let row = tuple_of(&[
        ("n", DbValue::text("John Lang")),
        ("e", DbValue::text("joe@perso.org")),
    ]);
    assert_eq!(got.multiplicity(&row), 1);
}

#[test]
fn unfold_with_constant_subject() {
    let (_, mapping, db) = people_setup();
    let p = parse_algebra("(bgp (<iri:iri_1:2> <:name> ?n))").unwrap();
    let u = unfold(&translate(&p), &mapping).unwrap();
    let got = eval(&u, &db).unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(
        got.multiplicity(&tuple_of(&[("n", DbValue::text("John Lang"))])),
        1
    );
}

#[test]
fn instance_validation() {
    let (cat, _, db) = people_setup();
    assert_eq!(validate_instance(&db, &cat), Ok(()));

    let null_name = parse_instance(
        "relation people(id, fullName, workEmail, homeEmail, spouseId)\n1, NULL, NULL, NULL, NULL\n",
    )
    .unwrap();
    assert!(validate_instance(&null_name, &cat).is_err());

    let dup_key = parse_instance(
        "relation people(id, fullName, workEmail, homeEmail, spouseId)\n\
         1, a, NULL, NULL, NULL\n1, b, NULL, NULL, NULL\n",
    )
    .unwrap();
    assert!(validate_instance(&dup_key, &cat).is_err());

    let bad_fk = parse_instance(
        "relation people(id, fullName, workEmail, homeEmail, spouseId)\n1, a, NULL, NULL, 9\n",
    )
    .unwrap();
    assert!(validate_instance(&bad_fk, &cat).is_err());
}

#[test]
fn source_guards_non_null_head_attrs() {
    let (_, mapping, db) = people_setup();
    // the workEmail assertion drops the row with a null cell
    let rows = eval(&mapping.assertions[1].source(), &db).unwrap();
    assert_eq!(rows.len(), 2);
}
