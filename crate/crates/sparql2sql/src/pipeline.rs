//! End-to-end compilation pipeline shared by the command-line driver and
//! the integration suite: parse, translate, unfold, optimize, emit, plus
//! the oracle-backed equivalence check and the fuzzing report.

use std::fmt;

use crate::fuzz::{diff_relations, end_to_end_case, run_cases};
use crate::mapping::{
    parse_mapping, parse_schema, unfold, validate_instance, virtual_graph, Mapping, SchemaCatalog,
};
use crate::optimize::{optimize, rule_cfr};
use crate::ra::dump;
use crate::ra::eval::{eval, parse_instance};
use crate::sparql::{parse_algebra, validate, GraphPattern};
use crate::sql::{emit_with, SqlOptions};
use crate::translate::{relational_answer, translate};

/// An error tagged with the pipeline stage that produced it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for StageError {}

fn at<E: fmt::Display>(stage: &'static str) -> impl Fn(E) -> StageError {
    move |e| StageError {
        stage,
        message: e.to_string(),
    }
}

/// Output format of the compile entry point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitKind {
    Sql,
    Ra,
}

#[derive(Debug, Clone)]
pub struct CompileOptions {
    /// Run the full rewrite catalog; when off, only the standard
    /// constant-folding cleanup runs after unfolding.
    pub optimize: bool,
    pub emit: EmitKind,
    pub sql: SqlOptions,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            optimize: true,
            emit: EmitKind::Sql,
            sql: SqlOptions::default(),
        }
    }
}

#[derive(Debug)]
pub struct Compiled {
    /// SQL text or plan dump, depending on the requested format.
    pub output: String,
    /// One line per rewrite firing, in application order.
    pub trace: Vec<String>,
    pub round_limit_hit: bool,
}

fn parse_stages(
    query: &str,
    mapping: &str,
    schema: &str,
) -> Result<(SchemaCatalog, Mapping, GraphPattern), StageError> {
    let cat = parse_schema(schema).map_err(at("schema"))?;
    let m = parse_mapping(mapping, &cat).map_err(at("mapping"))?;
    let p = parse_algebra(query).map_err(at("query"))?;
    validate(&p).map_err(at("query"))?;
    Ok((cat, m, p))
}

/// Full pipeline over in-memory texts.
pub fn compile(
    query: &str,
    mapping: &str,
    schema: &str,
    opts: &CompileOptions,
) -> Result<Compiled, StageError> {
    let (cat, m, p) = parse_stages(query, mapping, schema)?;
    let unfolded = unfold(&translate(&p), &m).map_err(at("mapping"))?;
    let (expr, trace, round_limit_hit) = if opts.optimize {
        let out = optimize(&unfolded, &cat, Some(&p));
        (out.expr, out.trace.lines(), out.round_limit_hit)
    } else {
        (rule_cfr(&unfolded, &cat), Vec::new(), false)
    };
    let output = match opts.emit {
        EmitKind::Ra => dump(&expr),
        EmitKind::Sql => emit_with(&expr, &cat, &m.templates, &opts.sql).map_err(at("emit"))?,
    };
    Ok(Compiled {
        output,
        trace,
        round_limit_hit,
    })
}

#[derive(Debug)]
pub struct CheckReport {
    pub equivalent: bool,
    pub report: String,
}

/// Evaluates the reference answer over the exposed graph and compares it
/// with both the unfolded and the optimized plan on the given instance.
pub fn check(
    query: &str,
    mapping: &str,
    schema: &str,
    data: &str,
) -> Result<CheckReport, StageError> {
    let (cat, m, p) = parse_stages(query, mapping, schema)?;
    let db = parse_instance(data).map_err(at("data"))?;
    validate_instance(&db, &cat).map_err(|msg| StageError {
        stage: "data",
        message: msg,
    })?;
    let unfolded = unfold(&translate(&p), &m).map_err(at("mapping"))?;
    let optimized = optimize(&unfolded, &cat, Some(&p)).expr;
    let g = virtual_graph(&m, &db).map_err(at("data"))?;
    let want = relational_answer(&p, &g);
    let got_unfolded = eval(&unfolded, &db).map_err(at("eval"))?;
    let got_optimized = eval(&optimized, &db).map_err(at("eval"))?;

    let mut lines = vec![format!("reference answer: {} tuple(s)", want.len())];
    let mut equivalent = true;
    for (label, got) in [("unfolded", &got_unfolded), ("optimized", &got_optimized)] {
        match diff_relations("reference", &want, label, got) {
            None => lines.push(format!("{label} plan: agrees with the reference")),
            Some(d) => {
                equivalent = false;
                lines.push(format!("{label} plan: {d}"));
            }
        }
    }
    lines.push(if equivalent { "PASS".into() } else { "FAIL".into() });
    Ok(CheckReport {
        equivalent,
        report: lines.join("\n") + "\n",
    })
}

#[derive(Debug)]
pub struct FuzzReport {
    pub all_passed: bool,
    pub report: String,
}

/// Runs `count` seeded end-to-end cases and renders the tally.
/// `repro_prefix` is spliced into the reproduction command of the first
/// failure, so the report stays meaningful outside this process.
pub fn fuzz(
    schema: &str,
    mapping: &str,
    seed: u64,
    count: usize,
    optimized_only: bool,
    repro_prefix: &str,
) -> Result<FuzzReport, StageError> {
    let cat = parse_schema(schema).map_err(at("schema"))?;
    let m = parse_mapping(mapping, &cat).map_err(at("mapping"))?;
    let outcome = run_cases(count, |i| end_to_end_case(&cat, &m, seed, i, optimized_only));
    let mut report = format!(
        "checked {} case(s) with seed {}: {} passed, {} failed\n",
        outcome.checked,
        seed,
        outcome.passed(),
        outcome.failures.len()
    );
    if let Some((i, detail)) = outcome.failures.first() {
        report.push_str(&format!("first failure at case {i}: {detail}\n"));
        report.push_str(&format!(
            "reproduce: {repro_prefix} --seed {seed} --count {}\n",
            i + 1
        ));
    }
    Ok(FuzzReport {
        all_passed: outcome.failures.is_empty(),
        report,
    })
}

#[cfg(test)]
mod tests;
