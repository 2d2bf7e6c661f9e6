//! Seeded random generation of graph patterns, RDF graphs, and database
//! instances, plus the differential harnesses that cross-check the
//! set-builder evaluator against compiled plans.
//!
//! Every case derives its own RNG from `(seed, index)`, so a run is
//! reproducible per iteration and independent of scheduling. The driver
//! can fan cases out across threads; reports are sorted by index, which
//! makes the output bytes a function of the seed alone.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::mapping::{unfold, validate_instance, virtual_graph, Mapping, SchemaCatalog, Slot};
use crate::model::{RdfGraph, RdfTerm, Triple, Variable};
use crate::optimize::optimize;
use crate::ra::eval::{
    eval, render_structured_iri, DbInstance, Relation, Tuple, INT_TAG,
};
use crate::ra::DbValue;
use crate::sparql::{validate, var_scope, GraphPattern, SparqlFilter, TermOrVar, TriplePattern};
use crate::translate::{relational_answer, translate};

const VARS: &[&str] = &["a", "b", "c", "d", "e", "f"];

/// Constant pools the pattern and graph generators draw from.
#[derive(Debug, Clone)]
pub struct Vocab {
    pub preds: Vec<String>,
    pub iris: Vec<String>,
    pub lits: Vec<RdfTerm>,
    /// Whether the predicate position may hold a variable.
    pub var_pred: bool,
}

impl Vocab {
    /// A small free-standing vocabulary for translation fuzzing.
    pub fn plain() -> Vocab {
        Vocab {
            preds: (1..=4).map(|i| format!(":p{i}")).collect(),
            iris: (1..=6).map(|i| format!(":i{i}")).collect(),
            lits: (1..=3)
                .map(|i| RdfTerm::lit(format!("l{i}")))
                .chain((0..3).map(|i| RdfTerm::Literal(i.to_string(), Some(INT_TAG.to_string()))))
                .collect(),
            var_pred: true,
        }
    }

    /// Predicates and constants that can actually hit a mapping: the
    /// assertion predicates, spellings of template IRIs over small
    /// arguments, and the literal pool the instance generator uses.
    pub fn for_mapping(mapping: &Mapping) -> Vocab {
        let preds: BTreeSet<String> =
            mapping.assertions.iter().map(|a| a.pred.clone()).collect();
        let mut iris: BTreeSet<String> = BTreeSet::new();
        for a in &mapping.assertions {
            for slot in [&a.sub, &a.obj] {
                if let Slot::ConstIri(s) = slot {
                    iris.insert(s.clone());
                }
            }
        }
        for tpl in mapping.templates.values() {
            for k in 0..4i64 {
                let args: Vec<DbValue> = (0..tpl.arity).map(|j| DbValue::Int(k + j as i64)).collect();
                iris.insert(render_structured_iri(&tpl.id, &args));
            }
        }
        let mut lits: Vec<RdfTerm> = TEXT_POOL.iter().map(|s| RdfTerm::lit(*s)).collect();
        lits.extend((0..4).map(|i| RdfTerm::Literal(i.to_string(), Some(INT_TAG.to_string()))));
        Vocab {
            preds: preds.into_iter().collect(),
            iris: iris.into_iter().collect(),
            lits,
            var_pred: true,
        }
    }
}

const TEXT_POOL: &[&str] = &["a", "b", "c", "d", "e"];

fn case_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

// ---- pattern generation --------------------------------------------------

struct PatGen<'a, R: Rng> {
    rng: &'a mut R,
    vocab: &'a Vocab,
    /// Remaining triple-pattern budget.
    budget: usize,
    /// Variables used anywhere so far; later triples are biased toward
    /// reusing them, which makes joins and compatibility filters bite.
    used: BTreeSet<Variable>,
}

impl<R: Rng> PatGen<'_, R> {
    fn pick_var(&mut self) -> Variable {
        let reuse = !self.used.is_empty() && self.rng.gen_bool(0.6);
        let v = if reuse {
            let pool: Vec<&Variable> = self.used.iter().collect();
            pool[self.rng.gen_range(0..pool.len())].clone()
        } else {
            VARS[self.rng.gen_range(0..VARS.len())].to_string()
        };
        self.used.insert(v.clone());
        v
    }

    fn const_term(&mut self) -> RdfTerm {
        if self.rng.gen_bool(0.5) {
            RdfTerm::iri(self.vocab.iris[self.rng.gen_range(0..self.vocab.iris.len())].clone())
        } else {
            self.vocab.lits[self.rng.gen_range(0..self.vocab.lits.len())].clone()
        }
    }

    fn triple(&mut self) -> TriplePattern {
        let sub = if self.rng.gen_bool(0.8) {
            TermOrVar::Var(self.pick_var())
        } else {
            TermOrVar::Term(RdfTerm::iri(
                self.vocab.iris[self.rng.gen_range(0..self.vocab.iris.len())].clone(),
            ))
        };
        let pred = if self.vocab.var_pred && self.rng.gen_bool(0.15) {
            TermOrVar::Var(self.pick_var())
        } else {
            TermOrVar::Term(RdfTerm::iri(
                self.vocab.preds[self.rng.gen_range(0..self.vocab.preds.len())].clone(),
            ))
        };
        let obj = if self.rng.gen_bool(0.6) {
            TermOrVar::Var(self.pick_var())
        } else {
            TermOrVar::Term(self.const_term())
        };
        TriplePattern::new(sub, pred, obj).expect("predicate slot holds an IRI or variable")
    }

    fn bgp(&mut self) -> GraphPattern {
        if self.budget == 0 {
            // Out of triples: the empty group, i.e. the unit pattern.
            return GraphPattern::Bgp(Vec::new());
        }
        let most = self.budget.clamp(1, 2);
        let n = self.rng.gen_range(1..=most);
        self.budget = self.budget.saturating_sub(n);
        GraphPattern::Bgp((0..n).map(|_| self.triple()).collect())
    }

    fn filter_over(&mut self, scope: &BTreeSet<Variable>, depth: usize) -> SparqlFilter {
        if scope.is_empty() {
            return SparqlFilter::True;
        }
        let pool: Vec<&Variable> = scope.iter().collect();
        let pick = |rng: &mut R| pool[rng.gen_range(0..pool.len())].clone();
        match self.rng.gen_range(0..10u32) {
            0..=2 => SparqlFilter::Bound(pick(self.rng)),
            3..=4 => {
                let v = pick(self.rng);
                SparqlFilter::EqVC(v, self.const_term())
            }
            5 => SparqlFilter::EqVV(pick(self.rng), pick(self.rng)),
            6..=7 if depth > 0 => SparqlFilter::And(
                Box::new(self.filter_over(scope, depth - 1)),
                Box::new(self.filter_over(scope, depth - 1)),
            ),
            8 if depth > 0 => SparqlFilter::Not(Box::new(self.filter_over(scope, depth - 1))),
            _ => SparqlFilter::True,
        }
    }

    /// Group, join, filter, and bare optional only; optionals draw
    /// their variables mostly from what is already in use, so their
    /// private variables tend to stay private.
    fn wd_node(&mut self, depth: usize) -> GraphPattern {
        if depth == 0 || self.budget <= 1 {
            return self.bgp();
        }
        match self.rng.gen_range(0..100u32) {
            0..=29 => self.bgp(),
            30..=64 => {
                let left = self.wd_node(depth - 1);
                let right = self.wd_node(depth - 1);
                GraphPattern::Opt(Box::new(left), Box::new(right), SparqlFilter::True)
            }
            65..=84 => GraphPattern::Join(
                Box::new(self.wd_node(depth - 1)),
                Box::new(self.wd_node(depth - 1)),
            ),
            _ => {
                let inner = self.wd_node(depth - 1);
                let scope = var_scope(&inner);
                let f = self.filter_over(&scope, 2);
                GraphPattern::Filter(Box::new(inner), f)
            }
        }
    }

    fn node(&mut self, depth: usize) -> GraphPattern {
        if depth == 0 || self.budget <= 1 {
            return self.bgp();
        }
        match self.rng.gen_range(0..100u32) {
            0..=24 => self.bgp(),
            25..=49 => {
                let left = self.node(depth - 1);
                // Bias toward well-designed optionals: most of the time the
                // right side draws from the same variable pool as the left,
                // which keeps its fresh variables from leaking elsewhere.
                let snapshot = self.used.clone();
                let right = self.node(depth - 1);
                if self.rng.gen_bool(0.3) {
                    self.used = snapshot.union(&var_scope(&right)).cloned().collect();
                }
                let scope: BTreeSet<Variable> =
                    var_scope(&left).union(&var_scope(&right)).cloned().collect();
                let f = if self.rng.gen_bool(0.4) {
                    self.filter_over(&scope, 1)
                } else {
                    SparqlFilter::True
                };
                GraphPattern::Opt(Box::new(left), Box::new(right), f)
            }
            50..=59 => GraphPattern::Join(
                Box::new(self.node(depth - 1)),
                Box::new(self.node(depth - 1)),
            ),
            60..=69 => GraphPattern::Union(
                Box::new(self.node(depth - 1)),
                Box::new(self.node(depth - 1)),
            ),
            70..=79 => {
                let inner = self.node(depth - 1);
                let scope = var_scope(&inner);
                let f = self.filter_over(&scope, 2);
                GraphPattern::Filter(Box::new(inner), f)
            }
            80..=85 => {
                let inner = self.node(depth - 1);
                let scope = var_scope(&inner);
                let fresh: Vec<&&str> = VARS.iter().filter(|v| !scope.contains(**v)).collect();
                if fresh.is_empty() {
                    return inner;
                }
                let v = fresh[self.rng.gen_range(0..fresh.len())].to_string();
                self.used.insert(v.clone());
                let t = self.const_term();
                GraphPattern::Bind(Box::new(inner), v, t)
            }
            86..=91 => GraphPattern::Minus(
                Box::new(self.node(depth - 1)),
                Box::new(self.node(depth - 1)),
            ),
            92..=95 => {
                let inner = self.node(depth - 1);
                let scope: Vec<Variable> = var_scope(&inner).into_iter().collect();
                let keep: BTreeSet<Variable> = scope
                    .into_iter()
                    .filter(|_| self.rng.gen_bool(0.6))
                    .collect();
                GraphPattern::Proj(Box::new(inner), keep)
            }
            _ => GraphPattern::Dist(Box::new(self.node(depth - 1))),
        }
    }
}

/// A random pattern of at most `depth` operator nesting and `triples`
/// triple patterns, covering all nine operators over many draws.
pub fn gen_pattern(
    rng: &mut ChaCha8Rng,
    vocab: &Vocab,
    depth: usize,
    triples: usize,
) -> GraphPattern {
    for _ in 0..20 {
        let mut g = PatGen {
            rng,
            vocab,
            budget: triples,
            used: BTreeSet::new(),
        };
        let p = g.node(depth);
        if validate(&p).is_ok() {
            return p;
        }
    }
    let mut g = PatGen {
        rng,
        vocab,
        budget: 1,
        used: BTreeSet::new(),
    };
    g.bgp()
}

/// A random pattern from the fragment where optional matching is
/// order-independent: group, join, filter, and bare optionals whose
/// private variables do not leak outside. Rejection-sampled against the
/// shape predicate; usually wrapped in a projection of part of the scope.
pub fn gen_wd_pattern(
    rng: &mut ChaCha8Rng,
    vocab: &Vocab,
    depth: usize,
    triples: usize,
) -> GraphPattern {
    use crate::sparql::is_well_designed;
    for _ in 0..200 {
        let mut g = PatGen {
            rng,
            vocab,
            budget: triples,
            used: BTreeSet::new(),
        };
        let mut p = g.wd_node(depth);
        if rng.gen_bool(0.7) {
            let keep: BTreeSet<Variable> = var_scope(&p)
                .into_iter()
                .filter(|_| rng.gen_bool(0.7))
                .collect();
            p = GraphPattern::Proj(Box::new(p), keep);
        }
        if validate(&p).is_ok() && is_well_designed(&p) {
            return p;
        }
    }
    let mut g = PatGen {
        rng,
        vocab,
        budget: 1,
        used: BTreeSet::new(),
    };
    g.bgp()
}

/// Number of operators plus triple patterns, the size measure the
/// linear-translation bound is stated against.
pub fn pattern_size(p: &GraphPattern) -> usize {
    1 + match p {
        GraphPattern::Bgp(ts) => ts.len(),
        GraphPattern::Filter(a, _)
        | GraphPattern::Bind(a, _, _)
        | GraphPattern::Proj(a, _)
        | GraphPattern::Dist(a) => pattern_size(a),
        GraphPattern::Union(a, b)
        | GraphPattern::Join(a, b)
        | GraphPattern::Minus(a, b)
        | GraphPattern::Opt(a, b, _) => pattern_size(a) + pattern_size(b),
    }
}

/// Which of the nine pattern operators occur in `p`; used to confirm
/// corpus coverage.
pub fn operators_used(p: &GraphPattern) -> BTreeSet<&'static str> {
    let mut out = BTreeSet::new();
    fn walk(p: &GraphPattern, out: &mut BTreeSet<&'static str>) {
        match p {
            GraphPattern::Bgp(_) => {
                out.insert("bgp");
            }
            GraphPattern::Filter(a, _) => {
                out.insert("filter");
                walk(a, out);
            }
            GraphPattern::Bind(a, _, _) => {
                out.insert("bind");
                walk(a, out);
            }
            GraphPattern::Union(a, b) => {
                out.insert("union");
                walk(a, out);
                walk(b, out);
            }
            GraphPattern::Join(a, b) => {
                out.insert("join");
                walk(a, out);
                walk(b, out);
            }
            GraphPattern::Opt(a, b, _) => {
                out.insert("opt");
                walk(a, out);
                walk(b, out);
            }
            GraphPattern::Minus(a, b) => {
                out.insert("minus");
                walk(a, out);
                walk(b, out);
            }
            GraphPattern::Proj(a, _) => {
                out.insert("proj");
                walk(a, out);
            }
            GraphPattern::Dist(a) => {
                out.insert("dist");
                walk(a, out);
            }
        }
    }
    walk(p, &mut out);
    out
}

// ---- graph and instance generation ---------------------------------------

/// A random RDF graph with at most `max_triples` triples over the vocab.
pub fn gen_graph(rng: &mut ChaCha8Rng, vocab: &Vocab, max_triples: usize) -> RdfGraph {
    let mut g = RdfGraph::new();
    let n = rng.gen_range(0..=max_triples);
    for _ in 0..n {
        let s = RdfTerm::iri(vocab.iris[rng.gen_range(0..vocab.iris.len())].clone());
        let p = RdfTerm::iri(vocab.preds[rng.gen_range(0..vocab.preds.len())].clone());
        let o = if rng.gen_bool(0.5) {
            RdfTerm::iri(vocab.iris[rng.gen_range(0..vocab.iris.len())].clone())
        } else {
            vocab.lits[rng.gen_range(0..vocab.lits.len())].clone()
        };
        g.insert(Triple::new(s, p, o).expect("generated predicate is an IRI"));
    }
    g
}

fn random_cell(rng: &mut ChaCha8Rng) -> DbValue {
    if rng.gen_bool(0.5) {
        DbValue::Int(rng.gen_range(0..8))
    } else {
        DbValue::text(TEXT_POOL[rng.gen_range(0..TEXT_POOL.len())])
    }
}

/// A random instance satisfying every catalog constraint: non-nullable
/// columns are filled, unique keys get distinct integers, and foreign
/// keys reference generated parent rows (or go null when nullable).
pub fn gen_instance(
    rng: &mut ChaCha8Rng,
    catalog: &SchemaCatalog,
    max_rows: usize,
) -> DbInstance {
    let mut rows: BTreeMap<String, Vec<Tuple>> = BTreeMap::new();
    let mut uniq: i64 = 100;
    for (name, schema) in &catalog.relations {
        let fk_child: BTreeSet<&String> = catalog
            .foreign_keys
            .iter()
            .filter(|fk| fk.child_rel == *name)
            .flat_map(|fk| fk.child_attrs.iter())
            .collect();
        let key_attrs: BTreeSet<&String> =
            schema.unique_keys.iter().flat_map(|k| k.iter()).collect();
        let n = rng.gen_range(1..=max_rows.max(1));
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut cells = BTreeMap::new();
            for a in &schema.attrs {
                let v = if key_attrs.contains(a) {
                    uniq += 1;
                    DbValue::Int(uniq)
                } else if fk_child.contains(a) {
                    DbValue::Null // filled from parent rows below
                } else if !schema.non_nullable.contains(a) && rng.gen_bool(0.3) {
                    DbValue::Null
                } else {
                    random_cell(rng)
                };
                cells.insert(a.clone(), v);
            }
            out.push(Tuple { cells });
        }
        rows.insert(name.clone(), out);
    }
    for fk in &catalog.foreign_keys {
        let parents: Vec<Vec<DbValue>> = rows
            .get(&fk.parent_rel)
            .map(|rs| {
                rs.iter()
                    .map(|t| {
                        fk.parent_attrs
                            .iter()
                            .map(|a| t.get(a).cloned().unwrap_or(DbValue::Null))
                            .collect()
                    })
                    .collect()
            })
            .unwrap_or_default();
        let nullable = catalog
            .relations
            .get(&fk.child_rel)
            .map(|s| fk.child_attrs.iter().all(|a| !s.non_nullable.contains(a)))
            .unwrap_or(true);
        if let Some(child_rows) = rows.get_mut(&fk.child_rel) {
            for t in child_rows {
                if parents.is_empty() || (nullable && rng.gen_bool(0.4)) {
                    continue; // leave the group null
                }
                let pick = &parents[rng.gen_range(0..parents.len())];
                for (a, v) in fk.child_attrs.iter().zip(pick) {
                    t.cells.insert(a.clone(), v.clone());
                }
            }
        }
    }
    // A foreign-key column landing inside a unique key could now collide;
    // keep the first row per key projection.
    for (name, schema) in &catalog.relations {
        if schema.unique_keys.is_empty() {
            continue;
        }
        let Some(rs) = rows.get_mut(name) else { continue };
        let mut seen: BTreeSet<Vec<Vec<DbValue>>> = BTreeSet::new();
        rs.retain(|t| {
            let projs: Vec<Vec<DbValue>> = schema
                .unique_keys
                .iter()
                .map(|k| k.iter().map(|a| t.get(a).cloned().unwrap()).collect())
                .collect();
            seen.insert(projs)
        });
    }
    let mut db = DbInstance::new();
    for (name, schema) in &catalog.relations {
        let attrs = schema.attrs.iter().cloned().collect();
        let mut rel = Relation::empty(attrs);
        let keyed = !schema.unique_keys.is_empty();
        for t in rows.remove(name).unwrap_or_default() {
            // Unkeyed relations get occasional duplicates to exercise bags.
            let m = if !keyed && rng.gen_bool(0.2) { 2 } else { 1 };
            rel.add(t, m).expect("fresh relation cannot overflow");
        }
        db.insert(name.clone(), rel);
    }
    debug_assert!(validate_instance(&db, catalog).is_ok());
    db
}

// ---- differential checks -------------------------------------------------

fn render_cell(v: &DbValue) -> String {
    match v {
        DbValue::Null => "NULL".to_string(),
        DbValue::Text(s) => format!("{s:?}"),
        DbValue::Int(i) => i.to_string(),
        DbValue::Iri(tpl, args) => render_structured_iri(tpl, args),
    }
}

fn render_tuple(t: &Tuple) -> String {
    let cells: Vec<String> = t
        .cells
        .iter()
        .map(|(a, v)| format!("{a}={}", render_cell(v)))
        .collect();
    format!("({})", cells.join(", "))
}

/// The smallest tuple whose multiplicity differs between the two bags,
/// rendered for a report, or None when they are equal.
pub fn diff_relations(
    label_a: &str,
    a: &Relation,
    label_b: &str,
    b: &Relation,
) -> Option<String> {
    if a.schema != b.schema {
        return Some(format!(
            "{label_a} has columns {:?}, {label_b} has {:?}",
            a.schema, b.schema
        ));
    }
    let keys: BTreeSet<&Tuple> = a.entries.keys().chain(b.entries.keys()).collect();
    for t in keys {
        let (na, nb) = (a.multiplicity(t), b.multiplicity(t));
        if na != nb {
            return Some(format!(
                "tuple {} appears {na} time(s) in {label_a}, {nb} in {label_b}",
                render_tuple(t)
            ));
        }
    }
    None
}

/// One translation-soundness case: a random pattern against a random
/// graph, set-builder answer versus the compiled algebra over the
/// `triple` encoding. Returns a description of the first mismatch.
pub fn translation_case(seed: u64, index: usize, max_graph: usize) -> Option<String> {
    let mut rng = case_rng(seed, index);
    let vocab = Vocab::plain();
    let p = gen_pattern(&mut rng, &vocab, 4, 6);
    let g = gen_graph(&mut rng, &vocab, max_graph);
    let want = relational_answer(&p, &g);
    let e = translate(&p);
    let got = match eval(&e, &crate::ra::eval::triple_instance(&g)) {
        Ok(r) => r,
        Err(err) => return Some(format!("evaluation error: {err:?}")),
    };
    diff_relations("reference", &want, "compiled", &got)
}

/// One end-to-end case over a mapping: random pattern, random instance;
/// compares the reference answer over the exposed graph against the
/// unfolded plan and against the optimized plan.
pub fn end_to_end_case(
    catalog: &SchemaCatalog,
    mapping: &Mapping,
    seed: u64,
    index: usize,
    optimized_only: bool,
) -> Option<String> {
    let mut rng = case_rng(seed, index);
    let vocab = Vocab::for_mapping(mapping);
    let p = gen_pattern(&mut rng, &vocab, 4, 6);
    let db = gen_instance(&mut rng, catalog, 50);
    let unfolded = match unfold(&translate(&p), mapping) {
        Ok(e) => e,
        Err(err) => return Some(format!("unfold error: {err}")),
    };
    let got_unfolded = match eval(&unfolded, &db) {
        Ok(r) => r,
        Err(err) => return Some(format!("evaluation error (unfolded): {err:?}")),
    };
    let opt = optimize(&unfolded, catalog, Some(&p));
    let got_opt = match eval(&opt.expr, &db) {
        Ok(r) => r,
        Err(err) => return Some(format!("evaluation error (optimized): {err:?}")),
    };
    if optimized_only {
        return diff_relations("unfolded", &got_unfolded, "optimized", &got_opt);
    }
    let g = match virtual_graph(mapping, &db) {
        Ok(g) => g,
        Err(err) => return Some(format!("graph materialization error: {err:?}")),
    };
    let want = relational_answer(&p, &g);
    diff_relations("reference", &want, "unfolded", &got_unfolded)
        .or_else(|| diff_relations("reference", &want, "optimized", &got_opt))
}

/// Sizes observed for one fuzz iteration, for the linearity check.
pub struct SizeSample {
    pub pattern: usize,
    pub translated: usize,
}

/// Regenerates the pattern of a translation case and reports which
/// operators it uses, for corpus coverage checks.
pub fn translation_case_operators(seed: u64, index: usize) -> BTreeSet<&'static str> {
    let mut rng = case_rng(seed, index);
    let vocab = Vocab::plain();
    let p = gen_pattern(&mut rng, &vocab, 4, 6);
    operators_used(&p)
}

/// Regenerates the pattern of a translation case and reports its size
/// next to the node count of its translation.
pub fn translation_case_sizes(seed: u64, index: usize) -> SizeSample {
    let mut rng = case_rng(seed, index);
    let vocab = Vocab::plain();
    let p = gen_pattern(&mut rng, &vocab, 4, 6);
    SizeSample {
        pattern: pattern_size(&p),
        translated: translate(&p).node_count(),
    }
}

// ---- drivers -------------------------------------------------------------

/// Outcome of a fuzz run: failures carry the iteration index and a
/// human-readable mismatch, sorted by index.
#[derive(Debug, Clone, Default)]
pub struct FuzzOutcome {
    pub checked: usize,
    pub failures: Vec<(usize, String)>,
}

impl FuzzOutcome {
    pub fn passed(&self) -> usize {
        self.checked - self.failures.len()
    }
}

/// Runs `count` independent cases, in parallel when the crate is built
/// with the `parallel` feature.
pub fn run_cases<F>(count: usize, case: F) -> FuzzOutcome
where
    F: Fn(usize) -> Option<String> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    let mut failures: Vec<(usize, String)> = (0..count)
        .into_par_iter()
        .filter_map(|i| case(i).map(|d| (i, d)))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let mut failures: Vec<(usize, String)> =
        (0..count).filter_map(|i| case(i).map(|d| (i, d))).collect();
    failures.sort();
    FuzzOutcome {
        checked: count,
        failures,
    }
}

/// Always-sequential variant, kept for the throughput benchmarks.
pub fn run_cases_sequential<F>(count: usize, case: F) -> FuzzOutcome
where
    F: Fn(usize) -> Option<String>,
{
    let failures: Vec<(usize, String)> =
        (0..count).filter_map(|i| case(i).map(|d| (i, d))).collect();
    FuzzOutcome {
        checked: count,
        failures,
    }
}
