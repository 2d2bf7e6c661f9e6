//! Relational algebra IR with bag semantics and three-valued filters:
//! terms with `if`/`coalesce` and structured IRI values, filters over
//! `isNull`/`=`, and the operator set used by the translation, plus
//! structural utilities (attribute inference, substitution, nullify,
//! conservative never-true detection) and the stable textual dump.

pub mod eval;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::three::Tv3;

pub type Attr = String;
pub type AttrSet = BTreeSet<Attr>;

pub fn attrset(names: &[&str]) -> AttrSet {
    names.iter().map(|s| s.to_string()).collect()
}

/// A database value. Iri is structured (template id plus arguments); the
/// string rendering happens only in the evaluator's bridge to RDF terms
/// and in the SQL emitter. Iri arguments never contain Null: applying a
/// template to null collapses the whole value to Null first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DbValue {
    Null,
    Text(String),
    Int(i64),
    Iri(String, Vec<DbValue>),
}

impl DbValue {
    pub fn text(s: impl Into<String>) -> DbValue {
        DbValue::Text(s.into())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, DbValue::Null)
    }

    /// Three-valued equality: error if either side is null; values of
    /// different kinds are unequal, not errors.
    pub fn eq3(&self, other: &DbValue) -> Tv3 {
        if self.is_null() || other.is_null() {
            Tv3::Err
        } else {
            Tv3::from_bool(self == other)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RaTerm {
    Attr(Attr),
    Const(DbValue),
    If(Box<RaFilter>, Box<RaTerm>, Box<RaTerm>),
    IriTpl(String, Vec<RaTerm>),
}

impl RaTerm {
    pub fn attr(a: impl Into<Attr>) -> RaTerm {
        RaTerm::Attr(a.into())
    }

    pub fn null() -> RaTerm {
        RaTerm::Const(DbValue::Null)
    }

    /// coalesce(v, v') is definitionally if(¬isNull(v), v, v').
    pub fn coalesce(v: RaTerm, w: RaTerm) -> RaTerm {
        RaTerm::If(
            Box::new(RaFilter::not(RaFilter::is_null(vec![v.clone()]))),
            Box::new(v),
            Box::new(w),
        )
    }

    /// Recognises the coalesce shape produced by [`RaTerm::coalesce`].
    pub fn as_coalesce(&self) -> Option<(&RaTerm, &RaTerm)> {
        let RaTerm::If(f, v, w) = self else { return None };
        let RaFilter::Not(inner) = f.as_ref() else { return None };
        let RaFilter::IsNull(set) = inner.as_ref() else { return None };
        (set.len() == 1 && &set[0] == v.as_ref()).then(|| (v.as_ref(), w.as_ref()))
    }

    pub fn attrs(&self) -> AttrSet {
        let mut out = AttrSet::new();
        self.collect_attrs(&mut out);
        out
    }

    fn collect_attrs(&self, out: &mut AttrSet) {
        match self {
            RaTerm::Attr(a) => {
                out.insert(a.clone());
            }
            RaTerm::Const(_) => {}
            RaTerm::If(f, v, w) => {
                f.collect_attrs(out);
                v.collect_attrs(out);
                w.collect_attrs(out);
            }
            RaTerm::IriTpl(_, args) => {
                for a in args {
                    a.collect_attrs(out);
                }
            }
        }
    }

    pub fn substitute(&self, subst: &BTreeMap<Attr, RaTerm>) -> RaTerm {
        match self {
            RaTerm::Attr(a) => subst.get(a).cloned().unwrap_or_else(|| self.clone()),
            RaTerm::Const(_) => self.clone(),
            RaTerm::If(f, v, w) => RaTerm::If(
                Box::new(f.substitute(subst)),
                Box::new(v.substitute(subst)),
                Box::new(w.substitute(subst)),
            ),
            RaTerm::IriTpl(id, args) => RaTerm::IriTpl(
                id.clone(),
                args.iter().map(|a| a.substitute(subst)).collect(),
            ),
        }
    }
}

/// Filters: isNull over a non-empty term set, equality, conjunction and
/// negation. Disjunction is the derived ¬(¬F ∧ ¬F).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RaFilter {
    True,
    IsNull(Vec<RaTerm>),
    Eq(RaTerm, RaTerm),
    And(Box<RaFilter>, Box<RaFilter>),
    Not(Box<RaFilter>),
}

impl RaFilter {
    pub fn is_null(mut terms: Vec<RaTerm>) -> RaFilter {
        assert!(!terms.is_empty(), "isNull needs at least one term");
        terms.sort();
        terms.dedup();
        RaFilter::IsNull(terms)
    }

    pub fn eq(a: RaTerm, b: RaTerm) -> RaFilter {
        RaFilter::Eq(a, b)
    }

    pub fn and(a: RaFilter, b: RaFilter) -> RaFilter {
        match (a, b) {
            (RaFilter::True, x) | (x, RaFilter::True) => x,
            (a, b) => RaFilter::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn not(a: RaFilter) -> RaFilter {
        RaFilter::Not(Box::new(a))
    }

    pub fn or(a: RaFilter, b: RaFilter) -> RaFilter {
        RaFilter::not(RaFilter::and(RaFilter::not(a), RaFilter::not(b)))
    }

    /// Recognises the derived disjunction shape.
    pub fn as_or(&self) -> Option<(&RaFilter, &RaFilter)> {
        let RaFilter::Not(inner) = self else { return None };
        let RaFilter::And(a, b) = inner.as_ref() else { return None };
        let (RaFilter::Not(a), RaFilter::Not(b)) = (a.as_ref(), b.as_ref()) else {
            return None;
        };
        Some((a, b))
    }

    /// Top-level disjuncts, the derived ∨ flattened; a non-disjunction is
    /// its own single disjunct.
    pub fn disjuncts(&self) -> Vec<RaFilter> {
        match self.as_or() {
            Some((a, b)) => {
                let mut out = a.disjuncts();
                out.extend(b.disjuncts());
                out
            }
            None => vec![self.clone()],
        }
    }

    /// The always-false filter, ¬true.
    pub fn fals() -> RaFilter {
        RaFilter::not(RaFilter::True)
    }

    pub fn conj(parts: impl IntoIterator<Item = RaFilter>) -> RaFilter {
        parts
            .into_iter()
            .fold(RaFilter::True, RaFilter::and)
    }

    pub fn disj(parts: impl IntoIterator<Item = RaFilter>) -> RaFilter {
        let mut it = parts.into_iter();
        match it.next() {
            None => RaFilter::fals(),
            Some(first) => it.fold(first, RaFilter::or),
        }
    }

    /// Top-level conjuncts, And flattened.
    pub fn conjuncts(&self) -> Vec<&RaFilter> {
        let mut out = Vec::new();
        fn walk<'a>(f: &'a RaFilter, out: &mut Vec<&'a RaFilter>) {
            match f {
                RaFilter::And(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                RaFilter::True => {}
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn attrs(&self) -> AttrSet {
        let mut out = AttrSet::new();
        self.collect_attrs(&mut out);
        out
    }

    fn collect_attrs(&self, out: &mut AttrSet) {
        match self {
            RaFilter::True => {}
            RaFilter::IsNull(ts) => {
                for t in ts {
                    t.collect_attrs(out);
                }
            }
            RaFilter::Eq(a, b) => {
                a.collect_attrs(out);
                b.collect_attrs(out);
            }
            RaFilter::And(a, b) => {
                a.collect_attrs(out);
                b.collect_attrs(out);
            }
            RaFilter::Not(a) => a.collect_attrs(out),
        }
    }

    /// Simultaneous replacement of attribute occurrences by terms; also
    /// covers plain renamings F[u/v].
    pub fn substitute(&self, subst: &BTreeMap<Attr, RaTerm>) -> RaFilter {
        match self {
            RaFilter::True => RaFilter::True,
            RaFilter::IsNull(ts) => {
                RaFilter::is_null(ts.iter().map(|t| t.substitute(subst)).collect())
            }
            RaFilter::Eq(a, b) => RaFilter::Eq(a.substitute(subst), b.substitute(subst)),
            RaFilter::And(a, b) => {
                RaFilter::And(Box::new(a.substitute(subst)), Box::new(b.substitute(subst)))
            }
            RaFilter::Not(a) => RaFilter::Not(Box::new(a.substitute(subst))),
        }
    }

    /// Replaces occurrences of the given attributes by the null constant.
    pub fn nullify(&self, attrs: &AttrSet) -> RaFilter {
        let subst: BTreeMap<Attr, RaTerm> = attrs
            .iter()
            .map(|a| (a.clone(), RaTerm::null()))
            .collect();
        self.substitute(&subst)
    }
}

fn term_never_null(t: &RaTerm) -> bool {
    match t {
        RaTerm::Const(c) => !c.is_null(),
        RaTerm::IriTpl(_, args) => args.iter().all(term_never_null),
        _ => false,
    }
}

fn term_always_null(t: &RaTerm) -> bool {
    match t {
        RaTerm::Const(c) => c.is_null(),
        RaTerm::IriTpl(_, args) => args.iter().any(term_always_null),
        _ => false,
    }
}

/// Conservative check that a filter can never evaluate to true: sound but
/// incomplete, used to certify the ≡⁺-falsity side conditions. Works on
/// the conjunct set: equality conjuncts force both sides non-null and
/// equal (templates decompose argwise, they are injective on non-null
/// arguments), isNull conjuncts force all members null, and a
/// disjunction conjunct is contradictory when every disjunct is. The
/// derived facts are closed under equality and checked for clashes.
pub fn never_true(f: &RaFilter) -> bool {
    never_true_depth(f, 3)
}

/// Union-find over terms; two terms in one class must be equal and
/// non-null for the conjunction to be true.
struct EqClasses {
    parent: BTreeMap<RaTerm, RaTerm>,
}

impl EqClasses {
    fn new() -> Self {
        EqClasses { parent: BTreeMap::new() }
    }

    fn find(&self, t: &RaTerm) -> RaTerm {
        let mut cur = t.clone();
        while let Some(p) = self.parent.get(&cur) {
            if *p == cur {
                break;
            }
            cur = p.clone();
        }
        cur
    }

    fn union(&mut self, a: &RaTerm, b: &RaTerm) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent.insert(ra, rb);
        }
    }
}

fn never_true_depth(f: &RaFilter, depth: usize) -> bool {
    // flatten conjuncts, strip double negation
    let mut work: Vec<RaFilter> = vec![f.clone()];
    let mut conjs: Vec<RaFilter> = Vec::new();
    while let Some(c) = work.pop() {
        match c {
            RaFilter::True => {}
            RaFilter::And(a, b) => {
                work.push(*a);
                work.push(*b);
            }
            RaFilter::Not(inner) => match *inner {
                RaFilter::Not(x) => work.push(*x),
                RaFilter::True => return true,
                other => conjs.push(RaFilter::Not(Box::new(other))),
            },
            other => conjs.push(other),
        }
    }

    let mut classes = EqClasses::new();
    let mut null_terms: BTreeSet<RaTerm> = BTreeSet::new();
    let mut nonnull_terms: BTreeSet<RaTerm> = BTreeSet::new();
    let mut diseqs: Vec<(RaTerm, RaTerm)> = Vec::new();
    let mut not_all_null: Vec<Vec<RaTerm>> = Vec::new();
    let mut or_lists: Vec<usize> = Vec::new(); // indices into conjs

    fn mark_nonnull(t: &RaTerm, out: &mut BTreeSet<RaTerm>) -> bool {
        if term_always_null(t) {
            return true;
        }
        if out.insert(t.clone()) {
            if let RaTerm::IriTpl(_, args) = t {
                // a non-null template value has non-null arguments
                for a in args {
                    if mark_nonnull(a, out) {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn mark_null(t: &RaTerm, out: &mut BTreeSet<RaTerm>) -> bool {
        if term_never_null(t) {
            return true;
        }
        if out.insert(t.clone()) {
            if let RaTerm::IriTpl(_, args) = t {
                if args.len() == 1 {
                    // unary templates are null-preserving both ways
                    return mark_null(&args[0], out);
                }
            }
        }
        false
    }

    for (i, c) in conjs.iter().enumerate() {
        if c.as_or().is_some() {
            or_lists.push(i);
            continue;
        }
        match c {
            RaFilter::Eq(a, b) => {
                if mark_nonnull(a, &mut nonnull_terms) || mark_nonnull(b, &mut nonnull_terms) {
                    return true;
                }
                classes.union(a, b);
            }
            RaFilter::IsNull(ts) => {
                for t in ts {
                    if mark_null(t, &mut null_terms) {
                        return true;
                    }
                }
            }
            RaFilter::Not(inner) => match inner.as_ref() {
                RaFilter::IsNull(ts) => {
                    if ts.len() == 1 {
                        if mark_nonnull(&ts[0], &mut nonnull_terms) {
                            return true;
                        }
                    }
                    not_all_null.push(ts.clone());
                }
                RaFilter::Eq(a, b) => {
                    // ¬ of an error is still an error, never true
                    if mark_nonnull(a, &mut nonnull_terms) || mark_nonnull(b, &mut nonnull_terms) {
                        return true;
                    }
                    if let (RaTerm::Const(x), RaTerm::Const(y)) = (a, b) {
                        if x.eq3(y) == Tv3::True {
                            return true;
                        }
                    }
                    diseqs.push((a.clone(), b.clone()));
                }
                _ => {}
            },
            _ => {}
        }
    }

    // saturate: decompose equalities between structured values
    loop {
        let mut by_root: BTreeMap<RaTerm, Vec<RaTerm>> = BTreeMap::new();
        for t in classes.parent.keys() {
            by_root.entry(classes.find(t)).or_default().push(t.clone());
        }
        let mut new_unions: Vec<(RaTerm, RaTerm)> = Vec::new();
        for (root, mut members) in by_root {
            members.push(root);
            let mut consts: Vec<&DbValue> = Vec::new();
            let mut tpls: Vec<(&String, &Vec<RaTerm>)> = Vec::new();
            for m in &members {
                match m {
                    RaTerm::Const(v) => consts.push(v),
                    RaTerm::IriTpl(id, args) => tpls.push((id, args)),
                    _ => {}
                }
            }
            for w in consts.windows(2) {
                if w[0].eq3(w[1]) == Tv3::False {
                    return true;
                }
            }
            for w in tpls.windows(2) {
                let ((i1, a1), (i2, a2)) = (&w[0], &w[1]);
                if i1 != i2 || a1.len() != a2.len() {
                    return true;
                }
                for (x, y) in a1.iter().zip(a2.iter()) {
                    new_unions.push((x.clone(), y.clone()));
                }
            }
            if let (Some(v), Some((id, args))) = (consts.first(), tpls.first()) {
                match v {
                    DbValue::Iri(cid, cargs) => {
                        if *cid != **id || cargs.len() != args.len() {
                            return true;
                        }
                        for (x, cv) in args.iter().zip(cargs.iter()) {
                            new_unions.push((x.clone(), RaTerm::Const(cv.clone())));
                        }
                    }
                    _ => return true, // a template value never equals a scalar
                }
            }
        }
        let mut grew = false;
        for (a, b) in new_unions {
            if classes.find(&a) != classes.find(&b) {
                classes.union(&a, &b);
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }

    // equality participants are non-null; carry that through the classes
    let null_roots: BTreeSet<RaTerm> = null_terms.iter().map(|t| classes.find(t)).collect();
    if nonnull_terms.iter().any(|t| null_roots.contains(&classes.find(t))) {
        return true;
    }
    // every union-find member stems from an equality, which forces it
    // non-null when true; a null class member is a clash
    if classes.parent.keys().any(|t| null_roots.contains(&classes.find(t))) {
        return true;
    }
    if diseqs.iter().any(|(a, b)| classes.find(a) == classes.find(b)) {
        return true;
    }
    let is_known_null =
        |t: &RaTerm| null_terms.contains(t) || term_always_null(t);
    if not_all_null.iter().any(|ts| ts.iter().all(|t| is_known_null(t))) {
        return true;
    }

    // a disjunction conjunct whose every disjunct contradicts the rest
    if depth > 0 {
        for &i in &or_lists {
            let rest = RaFilter::conj(
                conjs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, c)| c.clone()),
            );
            let all_dead = conjs[i]
                .disjuncts()
                .into_iter()
                .all(|d| never_true_depth(&RaFilter::and(rest.clone(), d), depth - 1));
            if all_dead {
                return true;
            }
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RaExpr {
    Base(String),
    Union(Box<RaExpr>, Box<RaExpr>),
    Diff(Box<RaExpr>, Box<RaExpr>),
    Project(Box<RaExpr>, AttrSet),
    /// Generalised projection: each output attribute is defined by a term
    /// over the input; subsumes projection combined with renaming and
    /// term application.
    ExtProject(Box<RaExpr>, Vec<(Attr, RaTerm)>),
    Select(Box<RaExpr>, RaFilter),
    Rename(Box<RaExpr>, Attr, Attr),
    Extend(Box<RaExpr>, Attr, RaTerm),
    NatJoin(Box<RaExpr>, Box<RaExpr>),
    JoinF(Box<RaExpr>, Box<RaExpr>, RaFilter),
    LeftJoinF(Box<RaExpr>, Box<RaExpr>, RaFilter),
    OuterUnion(Box<RaExpr>, Box<RaExpr>),
    Distinct(Box<RaExpr>),
    Pad(Box<RaExpr>, AttrSet),
}

impl RaExpr {
    pub fn select(e: RaExpr, f: RaFilter) -> RaExpr {
        RaExpr::Select(Box::new(e), f)
    }

    pub fn project(e: RaExpr, u: AttrSet) -> RaExpr {
        RaExpr::Project(Box::new(e), u)
    }

    pub fn ext_project(e: RaExpr, assigns: Vec<(Attr, RaTerm)>) -> RaExpr {
        RaExpr::ExtProject(Box::new(e), assigns)
    }

    pub fn nat_join(a: RaExpr, b: RaExpr) -> RaExpr {
        RaExpr::NatJoin(Box::new(a), Box::new(b))
    }

    pub fn join_f(a: RaExpr, b: RaExpr, f: RaFilter) -> RaExpr {
        RaExpr::JoinF(Box::new(a), Box::new(b), f)
    }

    pub fn left_join_f(a: RaExpr, b: RaExpr, f: RaFilter) -> RaExpr {
        RaExpr::LeftJoinF(Box::new(a), Box::new(b), f)
    }

    pub fn outer_union(a: RaExpr, b: RaExpr) -> RaExpr {
        RaExpr::OuterUnion(Box::new(a), Box::new(b))
    }

    pub fn children(&self) -> Vec<&RaExpr> {
        match self {
            RaExpr::Base(_) => vec![],
            RaExpr::Project(e, _)
            | RaExpr::ExtProject(e, _)
            | RaExpr::Select(e, _)
            | RaExpr::Rename(e, _, _)
            | RaExpr::Extend(e, _, _)
            | RaExpr::Distinct(e)
            | RaExpr::Pad(e, _) => vec![e],
            RaExpr::Union(a, b)
            | RaExpr::Diff(a, b)
            | RaExpr::NatJoin(a, b)
            | RaExpr::JoinF(a, b, _)
            | RaExpr::LeftJoinF(a, b, _)
            | RaExpr::OuterUnion(a, b) => vec![a, b],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RaError {
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("attribute {0} is not available here")]
    MissingAttr(Attr),
    #[error("attribute {0} already present")]
    AttrClash(Attr),
    #[error("union arguments have different attribute sets")]
    UnionMismatch,
    #[error("duplicate output attribute {0}")]
    DuplicateAttr(Attr),
    #[error("schema mismatch for relation {0}")]
    SchemaMismatch(String),
    #[error("multiplicity overflow")]
    Overflow,
}

/// Source of base-relation signatures for attribute inference.
pub trait BaseSchemas {
    fn base_attrs(&self, rel: &str) -> Option<AttrSet>;
}

/// The universal ternary relation the translation targets.
pub struct TripleSchema;

pub const TRIPLE_REL: &str = "triple";
pub const TRIPLE_ATTRS: [&str; 3] = ["sub", "pred", "obj"];

/// Relation with no attributes and exactly one tuple; implicitly present
/// in every schema and instance.
pub const UNIT_REL: &str = "unit";

impl BaseSchemas for TripleSchema {
    fn base_attrs(&self, rel: &str) -> Option<AttrSet> {
        (rel == TRIPLE_REL).then(|| attrset(&TRIPLE_ATTRS))
    }
}

/// Output attribute set of an expression; checks the structural
/// invariants of every operator along the way.
pub fn attrs(e: &RaExpr, schemas: &dyn BaseSchemas) -> Result<AttrSet, RaError> {
    match e {
        RaExpr::Base(rel) if rel == UNIT_REL => Ok(AttrSet::new()),
        RaExpr::Base(rel) => schemas
            .base_attrs(rel)
            .ok_or_else(|| RaError::UnknownRelation(rel.clone())),
        RaExpr::Union(a, b) | RaExpr::Diff(a, b) => {
            let ua = attrs(a, schemas)?;
            let ub = attrs(b, schemas)?;
            if ua != ub {
                return Err(RaError::UnionMismatch);
            }
            Ok(ua)
        }
        RaExpr::Project(a, u) => {
            let ua = attrs(a, schemas)?;
            for x in u {
                if !ua.contains(x) {
                    return Err(RaError::MissingAttr(x.clone()));
                }
            }
            Ok(u.clone())
        }
        RaExpr::ExtProject(a, assigns) => {
            let ua = attrs(a, schemas)?;
            let mut out = AttrSet::new();
            for (name, term) in assigns {
                for x in term.attrs() {
                    if !ua.contains(&x) {
                        return Err(RaError::MissingAttr(x));
                    }
                }
                if !out.insert(name.clone()) {
                    return Err(RaError::DuplicateAttr(name.clone()));
                }
            }
            Ok(out)
        }
        RaExpr::Select(a, f) => {
            let ua = attrs(a, schemas)?;
            for x in f.attrs() {
                if !ua.contains(&x) {
                    return Err(RaError::MissingAttr(x));
                }
            }
            Ok(ua)
        }
        RaExpr::Rename(a, from, to) => {
            let mut ua = attrs(a, schemas)?;
            if !ua.remove(from) {
                return Err(RaError::MissingAttr(from.clone()));
            }
            if !ua.insert(to.clone()) {
                return Err(RaError::AttrClash(to.clone()));
            }
            Ok(ua)
        }
        RaExpr::Extend(a, name, term) => {
            let mut ua = attrs(a, schemas)?;
            for x in term.attrs() {
                if !ua.contains(&x) {
                    return Err(RaError::MissingAttr(x));
                }
            }
            if !ua.insert(name.clone()) {
                return Err(RaError::AttrClash(name.clone()));
            }
            Ok(ua)
        }
        RaExpr::NatJoin(a, b) | RaExpr::OuterUnion(a, b) => {
            let mut ua = attrs(a, schemas)?;
            ua.extend(attrs(b, schemas)?);
            Ok(ua)
        }
        RaExpr::JoinF(a, b, f) | RaExpr::LeftJoinF(a, b, f) => {
            let mut ua = attrs(a, schemas)?;
            ua.extend(attrs(b, schemas)?);
            for x in f.attrs() {
                if !ua.contains(&x) {
                    return Err(RaError::MissingAttr(x));
                }
            }
            Ok(ua)
        }
        RaExpr::Distinct(a) => attrs(a, schemas),
        RaExpr::Pad(a, u) => {
            let ua = attrs(a, schemas)?;
            for x in u {
                if ua.contains(x) {
                    return Err(RaError::AttrClash(x.clone()));
                }
            }
            Ok(ua.union(u).cloned().collect())
        }
    }
}

// ---- textual dump -------------------------------------------------------

/// Strips the `#k` freshness suffix from every attribute when doing so is
/// unambiguous within the expression.
fn display_names(e: &RaExpr) -> BTreeMap<Attr, String> {
    let mut all = AttrSet::new();
    collect_all_attrs(e, &mut all);
    let mut by_base: BTreeMap<String, Vec<Attr>> = BTreeMap::new();
    for a in &all {
        by_base.entry(strip_suffix(a)).or_default().push(a.clone());
    }
    let mut out = BTreeMap::new();
    for (base, names) in by_base {
        if names.len() == 1 {
            out.insert(names[0].clone(), base);
        } else {
            for n in names {
                out.insert(n.clone(), n);
            }
        }
    }
    out
}

fn strip_suffix(a: &str) -> String {
    match a.rfind('#') {
        Some(i) if a[i + 1..].chars().all(|c| c.is_ascii_digit()) && i > 0 => a[..i].to_string(),
        _ => a.to_string(),
    }
}

fn collect_all_attrs(e: &RaExpr, out: &mut AttrSet) {
    match e {
        RaExpr::Base(_) => {}
        RaExpr::Project(a, u) | RaExpr::Pad(a, u) => {
            out.extend(u.iter().cloned());
            collect_all_attrs(a, out);
        }
        RaExpr::ExtProject(a, assigns) => {
            for (n, t) in assigns {
                out.insert(n.clone());
                out.extend(t.attrs());
            }
            collect_all_attrs(a, out);
        }
        RaExpr::Select(a, f) => {
            out.extend(f.attrs());
            collect_all_attrs(a, out);
        }
        RaExpr::Rename(a, from, to) => {
            out.insert(from.clone());
            out.insert(to.clone());
            collect_all_attrs(a, out);
        }
        RaExpr::Extend(a, n, t) => {
            out.insert(n.clone());
            out.extend(t.attrs());
            collect_all_attrs(a, out);
        }
        RaExpr::JoinF(a, b, f) | RaExpr::LeftJoinF(a, b, f) => {
            out.extend(f.attrs());
            collect_all_attrs(a, out);
            collect_all_attrs(b, out);
        }
        RaExpr::Union(a, b)
        | RaExpr::Diff(a, b)
        | RaExpr::NatJoin(a, b)
        | RaExpr::OuterUnion(a, b) => {
            collect_all_attrs(a, out);
            collect_all_attrs(b, out);
        }
        RaExpr::Distinct(a) => collect_all_attrs(a, out),
    }
}

pub fn dump_value(v: &DbValue) -> String {
    match v {
        DbValue::Null => "null".to_string(),
        DbValue::Text(s) => format!("\"{s}\""),
        DbValue::Int(i) => i.to_string(),
        DbValue::Iri(tpl, args) => format!(
            "{tpl}({})",
            args.iter().map(dump_value).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn dump_term(t: &RaTerm, names: &BTreeMap<Attr, String>) -> String {
    if let Some((v, w)) = t.as_coalesce() {
        return format!("coalesce({}, {})", dump_term(v, names), dump_term(w, names));
    }
    match t {
        RaTerm::Attr(a) => names.get(a).cloned().unwrap_or_else(|| a.clone()),
        RaTerm::Const(v) => dump_value(v),
        RaTerm::If(f, v, w) => format!(
            "if({}, {}, {})",
            dump_filter(f, names),
            dump_term(v, names),
            dump_term(w, names)
        ),
        RaTerm::IriTpl(id, args) => format!(
            "{id}({})",
            args.iter()
                .map(|a| dump_term(a, names))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn dump_filter(f: &RaFilter, names: &BTreeMap<Attr, String>) -> String {
    if let Some((a, b)) = f.as_or() {
        return format!("({} ∨ {})", dump_filter(a, names), dump_filter(b, names));
    }
    match f {
        RaFilter::True => "true".to_string(),
        RaFilter::IsNull(ts) => format!(
            "isNull({{{}}})",
            ts.iter()
                .map(|t| dump_term(t, names))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        RaFilter::Eq(a, b) => format!("({} = {})", dump_term(a, names), dump_term(b, names)),
        RaFilter::And(a, b) => format!("({} ∧ {})", dump_filter(a, names), dump_filter(b, names)),
        RaFilter::Not(a) => format!("¬{}", dump_filter(a, names)),
    }
}

/// Stable textual rendering: one operator per line, two-space indent,
/// attributes sorted, filters fully parenthesised.
pub fn dump(e: &RaExpr) -> String {
    let names = display_names(e);
    let mut out = String::new();
    dump_rec(e, &names, 0, &mut out);
    out
}

fn dump_rec(e: &RaExpr, names: &BTreeMap<Attr, String>, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    let disp = |a: &Attr| names.get(a).cloned().unwrap_or_else(|| a.clone());
    let set = |u: &AttrSet| {
        let mut v: Vec<String> = u.iter().map(disp).collect();
        v.sort();
        v.join(", ")
    };
    let line = match e {
        RaExpr::Base(r) => format!("base {r}"),
        RaExpr::Union(_, _) => "union".to_string(),
        RaExpr::Diff(_, _) => "diff".to_string(),
        RaExpr::Project(_, u) => format!("project [{}]", set(u)),
        RaExpr::ExtProject(_, assigns) => {
            let mut parts: Vec<String> = assigns
                .iter()
                .map(|(n, t)| format!("{}/{}", disp(n), dump_term(t, names)))
                .collect();
            parts.sort();
            format!("project [{}]", parts.join(", "))
        }
        RaExpr::Select(_, f) => format!("select {}", dump_filter(f, names)),
        RaExpr::Rename(_, from, to) => format!("rename {}/{}", disp(to), disp(from)),
        RaExpr::Extend(_, n, t) => format!("extend {}/{}", disp(n), dump_term(t, names)),
        RaExpr::NatJoin(_, _) => "join".to_string(),
        RaExpr::JoinF(_, _, f) => format!("join-on {}", dump_filter(f, names)),
        RaExpr::LeftJoinF(_, _, f) => format!("leftjoin-on {}", dump_filter(f, names)),
        RaExpr::OuterUnion(_, _) => "outer-union".to_string(),
        RaExpr::Distinct(_) => "distinct".to_string(),
        RaExpr::Pad(_, u) => format!("pad [{}]", set(u)),
    };
    let _ = writeln!(out, "{indent}{line}");
    for c in e.children() {
        dump_rec(c, names, depth + 1, out);
    }
}

#[cfg(test)]
mod tests;
