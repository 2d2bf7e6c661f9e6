//! SPARQL fragment: AST, two parsers, filter evaluation over the three
//! truth values, the direct bag-semantics evaluator, and the
//! well-designedness check.

mod algebra_parse;
mod query_parse;

pub use algebra_parse::parse_algebra;
pub use query_parse::parse_sparql;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{Multiplicity, RdfGraph, RdfTerm, SolutionBag, SolutionMapping, Variable};
use crate::three::Tv3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermOrVar {
    Term(RdfTerm),
    Var(Variable),
}

impl TermOrVar {
    pub fn var(&self) -> Option<&str> {
        match self {
            TermOrVar::Var(v) => Some(v),
            TermOrVar::Term(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriplePattern {
    pub sub: TermOrVar,
    pub pred: TermOrVar,
    pub obj: TermOrVar,
}

impl TriplePattern {
    /// The predicate slot only admits IRIs or variables.
    pub fn new(sub: TermOrVar, pred: TermOrVar, obj: TermOrVar) -> Result<Self, SparqlError> {
        if let TermOrVar::Term(t) = &pred {
            if !t.is_iri() {
                return Err(SparqlError::BadPredicate(format!("{t}")));
            }
        }
        Ok(TriplePattern { sub, pred, obj })
    }

    pub fn vars(&self) -> BTreeSet<Variable> {
        [&self.sub, &self.pred, &self.obj]
            .into_iter()
            .filter_map(|t| t.var().map(str::to_string))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SparqlFilter {
    True,
    Bound(Variable),
    EqVC(Variable, RdfTerm),
    EqVV(Variable, Variable),
    And(Box<SparqlFilter>, Box<SparqlFilter>),
    Not(Box<SparqlFilter>),
}

impl SparqlFilter {
    pub fn and(a: SparqlFilter, b: SparqlFilter) -> SparqlFilter {
        SparqlFilter::And(Box::new(a), Box::new(b))
    }

    pub fn not(a: SparqlFilter) -> SparqlFilter {
        SparqlFilter::Not(Box::new(a))
    }

    /// Or is not primitive: F1 ∨ F2 = ¬(¬F1 ∧ ¬F2).
    pub fn or(a: SparqlFilter, b: SparqlFilter) -> SparqlFilter {
        SparqlFilter::not(SparqlFilter::and(SparqlFilter::not(a), SparqlFilter::not(b)))
    }

    pub fn vars(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Variable>) {
        match self {
            SparqlFilter::True => {}
            SparqlFilter::Bound(v) => {
                out.insert(v.clone());
            }
            SparqlFilter::EqVC(v, _) => {
                out.insert(v.clone());
            }
            SparqlFilter::EqVV(v, w) => {
                out.insert(v.clone());
                out.insert(w.clone());
            }
            SparqlFilter::And(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            SparqlFilter::Not(a) => a.collect_vars(out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GraphPattern {
    Bgp(Vec<TriplePattern>),
    Filter(Box<GraphPattern>, SparqlFilter),
    Bind(Box<GraphPattern>, Variable, RdfTerm),
    Union(Box<GraphPattern>, Box<GraphPattern>),
    Join(Box<GraphPattern>, Box<GraphPattern>),
    Opt(Box<GraphPattern>, Box<GraphPattern>, SparqlFilter),
    Minus(Box<GraphPattern>, Box<GraphPattern>),
    Proj(Box<GraphPattern>, BTreeSet<Variable>),
    Dist(Box<GraphPattern>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SparqlError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unsafe filter: variable {0} does not occur in the pattern")]
    UnsafeFilter(Variable),
    #[error("bind variable {0} already occurs in the pattern")]
    BindNotFresh(Variable),
    #[error("predicate must be an IRI or variable, got {0}")]
    BadPredicate(String),
    #[error("unsupported feature: {0}")]
    Unsupported(String),
}

/// var(P).
pub fn var_scope(p: &GraphPattern) -> BTreeSet<Variable> {
    match p {
        GraphPattern::Bgp(tps) => tps.iter().flat_map(|tp| tp.vars()).collect(),
        GraphPattern::Filter(inner, _) => var_scope(inner),
        GraphPattern::Bind(inner, v, _) => {
            let mut s = var_scope(inner);
            s.insert(v.clone());
            s
        }
        GraphPattern::Union(a, b) | GraphPattern::Join(a, b) => {
            var_scope(a).union(&var_scope(b)).cloned().collect()
        }
        GraphPattern::Opt(a, b, _) => var_scope(a).union(&var_scope(b)).cloned().collect(),
        GraphPattern::Minus(a, _) => var_scope(a),
        GraphPattern::Proj(inner, l) => var_scope(inner).intersection(l).cloned().collect(),
        GraphPattern::Dist(inner) => var_scope(inner),
    }
}

/// Checks the structural invariants the parsers enforce: filter safety
/// and bind freshness, everywhere in the tree.
pub fn validate(p: &GraphPattern) -> Result<(), SparqlError> {
    match p {
        GraphPattern::Bgp(_) => Ok(()),
        GraphPattern::Filter(inner, f) => {
            validate(inner)?;
            let scope = var_scope(inner);
            for v in f.vars() {
                if !scope.contains(&v) {
                    return Err(SparqlError::UnsafeFilter(v));
                }
            }
            Ok(())
        }
        GraphPattern::Bind(inner, v, _) => {
            validate(inner)?;
            if var_scope(inner).contains(v) {
                return Err(SparqlError::BindNotFresh(v.clone()));
            }
            Ok(())
        }
        GraphPattern::Union(a, b) | GraphPattern::Join(a, b) | GraphPattern::Minus(a, b) => {
            validate(a)?;
            validate(b)
        }
        GraphPattern::Opt(a, b, f) => {
            validate(a)?;
            validate(b)?;
            let scope: BTreeSet<_> = var_scope(a).union(&var_scope(b)).cloned().collect();
            for v in f.vars() {
                if !scope.contains(&v) {
                    return Err(SparqlError::UnsafeFilter(v));
                }
            }
            Ok(())
        }
        GraphPattern::Proj(inner, _) | GraphPattern::Dist(inner) => validate(inner),
    }
}

/// F^s over {true, false, error}. bound is two-valued; equality atoms
/// error out on unbound variables.
pub fn filter_eval(f: &SparqlFilter, s: &SolutionMapping) -> Tv3 {
    match f {
        SparqlFilter::True => Tv3::True,
        SparqlFilter::Bound(v) => Tv3::from_bool(s.get(v).is_some()),
        SparqlFilter::EqVC(v, c) => match s.get(v) {
            None => Tv3::Err,
            Some(t) => Tv3::from_bool(t == c),
        },
        SparqlFilter::EqVV(v, w) => match (s.get(v), s.get(w)) {
            (Some(a), Some(b)) => Tv3::from_bool(a == b),
            _ => Tv3::Err,
        },
        SparqlFilter::And(a, b) => filter_eval(a, s).and(filter_eval(b, s)),
        SparqlFilter::Not(a) => filter_eval(a, s).not(),
    }
}

fn match_slot(slot: &TermOrVar, term: &RdfTerm, s: &SolutionMapping) -> Option<Option<(Variable, RdfTerm)>> {
    match slot {
        TermOrVar::Term(t) => (t == term).then_some(None),
        TermOrVar::Var(v) => match s.get(v) {
            Some(bound) => (bound == term).then_some(None),
            None => Some(Some((v.clone(), term.clone()))),
        },
    }
}

fn bgp_solutions(tps: &[TriplePattern], g: &RdfGraph) -> Vec<SolutionMapping> {
    // Left-to-right nested loop; the result is order-independent.
    let mut partial = vec![SolutionMapping::new()];
    for tp in tps {
        let mut next = Vec::new();
        for s in &partial {
            for t in &g.triples {
                let (Some(bs), Some(bp), Some(bo)) = (
                    match_slot(&tp.sub, &t.sub, s),
                    match_slot(&tp.pred, &t.pred, s),
                    match_slot(&tp.obj, &t.obj, s),
                ) else {
                    continue;
                };
                let mut ext = s.clone();
                let mut ok = true;
                for binding in [bs, bp, bo].into_iter().flatten() {
                    // repeated variable within one triple pattern: both
                    // occurrences must agree
                    match ext.bindings.get(&binding.0) {
                        Some(prev) if *prev != binding.1 => {
                            ok = false;
                            break;
                        }
                        _ => {
                            ext.bindings.insert(binding.0, binding.1);
                        }
                    }
                }
                if ok {
                    next.push(ext);
                }
            }
        }
        next.sort();
        next.dedup();
        partial = next;
    }
    partial
}

/// ⟦P⟧_G under bag semantics. BGP answers form a set; Union adds
/// multiplicities, Join multiplies them over compatible pairs, Dist caps
/// them at one, Proj sums over restriction preimages.
pub fn eval_pattern(p: &GraphPattern, g: &RdfGraph) -> SolutionBag {
    let mut out = SolutionBag::new();
    match p {
        GraphPattern::Bgp(tps) => {
            for s in bgp_solutions(tps, g) {
                out.add(s, 1);
            }
        }
        GraphPattern::Filter(inner, f) => {
            for (s, n) in eval_pattern(inner, g).iter() {
                if filter_eval(f, s).is_true() {
                    out.add(s.clone(), n);
                }
            }
        }
        GraphPattern::Bind(inner, v, c) => {
            for (s, n) in eval_pattern(inner, g).iter() {
                out.add(s.clone().bind(v.clone(), c.clone()), n);
            }
        }
        GraphPattern::Union(a, b) => {
            for (s, n) in eval_pattern(a, g).iter() {
                out.add(s.clone(), n);
            }
            for (s, n) in eval_pattern(b, g).iter() {
                out.add(s.clone(), n);
            }
        }
        GraphPattern::Join(a, b) => {
            let ra = eval_pattern(a, g);
            let rb = eval_pattern(b, g);
            for (s1, n1) in ra.iter() {
                for (s2, n2) in rb.iter() {
                    if s1.compatible(s2) {
                        out.add(s1.merge(s2), mul(n1, n2));
                    }
                }
            }
        }
        GraphPattern::Opt(a, b, f) => {
            let ra = eval_pattern(a, g);
            let rb = eval_pattern(b, g);
            for (s1, n1) in ra.iter() {
                let mut matched = false;
                for (s2, n2) in rb.iter() {
                    if s1.compatible(s2) {
                        let merged = s1.merge(s2);
                        if filter_eval(f, &merged).is_true() {
                            matched = true;
                            out.add(merged, mul(n1, n2));
                        }
                    }
                }
                if !matched {
                    out.add(s1.clone(), n1);
                }
            }
        }
        GraphPattern::Minus(a, b) => {
            let ra = eval_pattern(a, g);
            let rb = eval_pattern(b, g);
            for (s1, n1) in ra.iter() {
                let excluded = rb.iter().any(|(s2, _)| {
                    s1.compatible(s2) && !s1.dom().is_disjoint(&s2.dom())
                });
                if !excluded {
                    out.add(s1.clone(), n1);
                }
            }
        }
        GraphPattern::Proj(inner, l) => {
            for (s, n) in eval_pattern(inner, g).iter() {
                out.add(s.restrict(l), n);
            }
        }
        GraphPattern::Dist(inner) => {
            for (s, _) in eval_pattern(inner, g).iter() {
                if out.multiplicity(s) == 0 {
                    out.add(s.clone(), 1);
                }
            }
        }
    }
    out
}

fn mul(a: Multiplicity, b: Multiplicity) -> Multiplicity {
    a.checked_mul(b).expect("multiplicity overflow")
}

/// Sufficient condition for compatibility-filter removal: the pattern
/// uses only BGP, Join, Filter, and OPTIONAL with the trivial filter,
/// and for every OPTIONAL subpattern the right-side variables that leak
/// outside it also occur on the left side. Anything else is
/// conservatively rejected.
pub fn is_well_designed(p: &GraphPattern) -> bool {
    // top-level projection/distinct wrappers do not affect the property
    let mut core = p;
    loop {
        match core {
            GraphPattern::Proj(inner, _) | GraphPattern::Dist(inner) => core = inner,
            _ => break,
        }
    }
    if !wd_fragment(core) {
        return false;
    }
    wd_opts(core, &BTreeSet::new())
}

fn wd_fragment(p: &GraphPattern) -> bool {
    match p {
        GraphPattern::Bgp(_) => true,
        GraphPattern::Filter(inner, _) => wd_fragment(inner),
        GraphPattern::Join(a, b) => wd_fragment(a) && wd_fragment(b),
        GraphPattern::Opt(a, b, f) => {
            *f == SparqlFilter::True && wd_fragment(a) && wd_fragment(b)
        }
        _ => false,
    }
}

/// `outside` holds variables occurring outside the current subtree.
fn wd_opts(p: &GraphPattern, outside: &BTreeSet<Variable>) -> bool {
    match p {
        GraphPattern::Bgp(_) => true,
        GraphPattern::Filter(inner, f) => {
            let mut o = outside.clone();
            o.extend(f.vars());
            wd_opts(inner, &o)
        }
        GraphPattern::Join(a, b) => {
            let mut oa = outside.clone();
            oa.extend(var_scope(b));
            let mut ob = outside.clone();
            ob.extend(var_scope(a));
            wd_opts(a, &oa) && wd_opts(b, &ob)
        }
        GraphPattern::Opt(a, b, _) => {
            let va = var_scope(a);
            let leak_ok = var_scope(b)
                .intersection(outside)
                .all(|v| va.contains(v));
            let mut oa = outside.clone();
            oa.extend(var_scope(b));
            let mut ob = outside.clone();
            ob.extend(va.iter().cloned());
            leak_ok && wd_opts(a, &oa) && wd_opts(b, &ob)
        }
        _ => false,
    }
}
