use super::*;
use crate::mapping::tests::{PEOPLE_DB, PEOPLE_MAPPING, PEOPLE_SCHEMA};
use crate::sparql::tests::EMAIL_QUERY_ALG;

#[test]
fn optimized_compile_reaches_the_flat_select() {
    let out = compile(
        EMAIL_QUERY_ALG,
        PEOPLE_MAPPING,
        PEOPLE_SCHEMA,
        &CompileOptions::default(),
    )
    .unwrap();
    assert_eq!(
        out.output,
        "SELECT COALESCE(workEmail, homeEmail) AS e, fullName AS n FROM people\n"
    );
    assert!(!out.trace.is_empty());
    assert!(!out.round_limit_hit);
}

#[test]
fn baseline_compile_keeps_the_left_joins() {
    let opts = CompileOptions {
        optimize: false,
        ..CompileOptions::default()
    };
    let out = compile(EMAIL_QUERY_ALG, PEOPLE_MAPPING, PEOPLE_SCHEMA, &opts).unwrap();
    assert_eq!(out.output.matches("LEFT JOIN").count(), 2, "{}", out.output);
    assert!(out.trace.is_empty());
}

#[test]
fn plan_output_prints_the_algebra() {
    let opts = CompileOptions {
        emit: EmitKind::Ra,
        ..CompileOptions::default()
    };
    let out = compile(EMAIL_QUERY_ALG, PEOPLE_MAPPING, PEOPLE_SCHEMA, &opts).unwrap();
    assert!(out.output.contains("base people"), "{}", out.output);
    assert!(!out.output.contains("SELECT"), "{}", out.output);
}

#[test]
fn errors_carry_their_stage() {
    let opts = CompileOptions::default();
    let err = compile("(bgp", PEOPLE_MAPPING, PEOPLE_SCHEMA, &opts).unwrap_err();
    assert_eq!(err.stage, "query");
    let err = compile(EMAIL_QUERY_ALG, "head(nope", PEOPLE_SCHEMA, &opts).unwrap_err();
    assert_eq!(err.stage, "mapping");
    let err = compile(EMAIL_QUERY_ALG, PEOPLE_MAPPING, "relation x(", &opts).unwrap_err();
    assert_eq!(err.stage, "schema");
}

#[test]
fn check_passes_on_the_worked_example() {
    let r = check(EMAIL_QUERY_ALG, PEOPLE_MAPPING, PEOPLE_SCHEMA, PEOPLE_DB).unwrap();
    assert!(r.equivalent, "{}", r.report);
    assert!(r.report.contains("reference answer: 3 tuple(s)"), "{}", r.report);
    assert!(r.report.ends_with("PASS\n"), "{}", r.report);
}

#[test]
fn check_refuses_a_broken_foreign_key() {
    let bad = "\
relation people(id, fullName, workEmail, homeEmail, spouseId)
1, Peter Smith, peter@company.com, peter@perso.org, 9
";
    let err = check(EMAIL_QUERY_ALG, PEOPLE_MAPPING, PEOPLE_SCHEMA, bad).unwrap_err();
    assert_eq!(err.stage, "data");
}

#[test]
fn fuzz_zero_cases_passes_trivially() {
    let r = fuzz(PEOPLE_SCHEMA, PEOPLE_MAPPING, 42, 0, false, "x").unwrap();
    assert!(r.all_passed);
    assert!(r.report.starts_with("checked 0 case(s)"), "{}", r.report);
}

#[test]
fn fuzz_report_is_reproducible() {
    let a = fuzz(PEOPLE_SCHEMA, PEOPLE_MAPPING, 42, 25, false, "x").unwrap();
    let b = fuzz(PEOPLE_SCHEMA, PEOPLE_MAPPING, 42, 25, false, "x").unwrap();
    assert_eq!(a.report, b.report);
    assert!(a.all_passed, "{}", a.report);
}
