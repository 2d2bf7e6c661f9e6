//! Reference bag-semantics evaluator over in-memory instances. Naive on
//! purpose: nested loops and hash-grouped bags, trusted as the oracle
//! against which the translation and every rewrite are checked.

use std::collections::BTreeMap;

use crate::model::{Multiplicity, RdfGraph, RdfTerm};
use crate::ra::{
    attrset, Attr, AttrSet, BaseSchemas, DbValue, RaError, RaExpr, RaFilter, RaTerm, TRIPLE_REL,
    UNIT_REL,
};

/// The single-empty-tuple relation backing [`UNIT_REL`].
pub fn unit_relation() -> Relation {
    let mut r = Relation::empty(AttrSet::new());
    r.add(Tuple::default(), 1).expect("unit");
    r
}
use crate::three::Tv3;

/// A total map from a fixed attribute set to values. The unique tuple
/// over the empty set is `Tuple::default()`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tuple {
    pub cells: BTreeMap<Attr, DbValue>,
}

impl Tuple {
    pub fn get(&self, a: &str) -> Option<&DbValue> {
        self.cells.get(a)
    }

    pub fn dom(&self) -> AttrSet {
        self.cells.keys().cloned().collect()
    }

    pub fn restrict(&self, u: &AttrSet) -> Tuple {
        Tuple {
            cells: self
                .cells
                .iter()
                .filter(|(a, _)| u.contains(*a))
                .map(|(a, v)| (a.clone(), v.clone()))
                .collect(),
        }
    }
}

impl FromIterator<(Attr, DbValue)> for Tuple {
    fn from_iter<I: IntoIterator<Item = (Attr, DbValue)>>(iter: I) -> Self {
        Tuple {
            cells: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub schema: AttrSet,
    pub entries: BTreeMap<Tuple, Multiplicity>,
}

impl Relation {
    pub fn empty(schema: AttrSet) -> Relation {
        Relation {
            schema,
            entries: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, t: Tuple, n: Multiplicity) -> Result<(), RaError> {
        debug_assert_eq!(t.dom(), self.schema);
        if n <= 0 {
            return Ok(());
        }
        let slot = self.entries.entry(t).or_insert(0);
        *slot = slot.checked_add(n).ok_or(RaError::Overflow)?;
        Ok(())
    }

    pub fn multiplicity(&self, t: &Tuple) -> Multiplicity {
        self.entries.get(t).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tuple, Multiplicity)> {
        self.entries.iter().map(|(t, n)| (t, *n))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DbInstance {
    pub relations: BTreeMap<String, Relation>,
}

impl DbInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, rel: Relation) {
        self.relations.insert(name.into(), rel);
    }
}

impl BaseSchemas for DbInstance {
    fn base_attrs(&self, rel: &str) -> Option<AttrSet> {
        self.relations.get(rel).map(|r| r.schema.clone())
    }
}

/// t(v): term evaluation. `if` takes its second branch unless the filter
/// is strictly true; applying an IRI template to a null argument yields
/// null.
pub fn term_eval(t: &RaTerm, tuple: &Tuple) -> DbValue {
    match t {
        RaTerm::Attr(a) => tuple
            .get(a)
            .unwrap_or_else(|| panic!("attribute {a} not bound in tuple"))
            .clone(),
        RaTerm::Const(v) => v.clone(),
        RaTerm::If(f, v, w) => {
            if filter_eval3(f, tuple).is_true() {
                term_eval(v, tuple)
            } else {
                term_eval(w, tuple)
            }
        }
        RaTerm::IriTpl(id, args) => {
            let vals: Vec<DbValue> = args.iter().map(|a| term_eval(a, tuple)).collect();
            if vals.iter().any(DbValue::is_null) {
                DbValue::Null
            } else {
                DbValue::Iri(id.clone(), vals)
            }
        }
    }
}

/// F^t over the three truth values. isNull is two-valued: true iff every
/// term evaluates to null. Equality errors out on null operands.
pub fn filter_eval3(f: &RaFilter, tuple: &Tuple) -> Tv3 {
    match f {
        RaFilter::True => Tv3::True,
        RaFilter::IsNull(ts) => {
            Tv3::from_bool(ts.iter().all(|t| term_eval(t, tuple).is_null()))
        }
        RaFilter::Eq(a, b) => term_eval(a, tuple).eq3(&term_eval(b, tuple)),
        RaFilter::And(a, b) => filter_eval3(a, tuple).and(filter_eval3(b, tuple)),
        RaFilter::Not(a) => filter_eval3(a, tuple).not(),
    }
}

fn mul(a: Multiplicity, b: Multiplicity) -> Result<Multiplicity, RaError> {
    a.checked_mul(b).ok_or(RaError::Overflow)
}

/// Shared attributes must be equal and non-null for two tuples to join.
fn join_tuples(t1: &Tuple, t2: &Tuple) -> Option<Tuple> {
    for (a, v1) in &t1.cells {
        if let Some(v2) = t2.get(a) {
            if v1.is_null() || v2.is_null() || v1 != v2 {
                return None;
            }
        }
    }
    let mut cells = t1.cells.clone();
    for (a, v) in &t2.cells {
        cells.entry(a.clone()).or_insert_with(|| v.clone());
    }
    Some(Tuple { cells })
}

fn pad_tuple(t: &Tuple, extra: &AttrSet) -> Tuple {
    let mut cells = t.cells.clone();
    for a in extra {
        cells.insert(a.clone(), DbValue::Null);
    }
    Tuple { cells }
}

pub fn eval(e: &RaExpr, db: &DbInstance) -> Result<Relation, RaError> {
    match e {
        RaExpr::Base(rel) => match db.relations.get(rel) {
            Some(r) => Ok(r.clone()),
            None if rel == UNIT_REL => Ok(unit_relation()),
            None => Err(RaError::UnknownRelation(rel.clone())),
        },
        RaExpr::Union(a, b) => {
            let ra = eval(a, db)?;
            let rb = eval(b, db)?;
            if ra.schema != rb.schema {
                return Err(RaError::UnionMismatch);
            }
            let mut out = ra;
            for (t, n) in rb.iter() {
                out.add(t.clone(), n)?;
            }
            Ok(out)
        }
        RaExpr::Diff(a, b) => {
            let ra = eval(a, db)?;
            let rb = eval(b, db)?;
            if ra.schema != rb.schema {
                return Err(RaError::UnionMismatch);
            }
            let mut out = Relation::empty(ra.schema.clone());
            for (t, n) in ra.iter() {
                if rb.multiplicity(t) == 0 {
                    out.add(t.clone(), n)?;
                }
            }
            Ok(out)
        }
        RaExpr::Project(a, u) => {
            let ra = eval(a, db)?;
            let mut out = Relation::empty(u.clone());
            for (t, n) in ra.iter() {
                out.add(t.restrict(u), n)?;
            }
            Ok(out)
        }
        RaExpr::ExtProject(a, assigns) => {
            let ra = eval(a, db)?;
            let schema: AttrSet = assigns.iter().map(|(n, _)| n.clone()).collect();
            let mut out = Relation::empty(schema);
            for (t, n) in ra.iter() {
                let nt: Tuple = assigns
                    .iter()
                    .map(|(name, term)| (name.clone(), term_eval(term, t)))
                    .collect();
                out.add(nt, n)?;
            }
            Ok(out)
        }
        RaExpr::Select(a, f) => {
            let ra = eval(a, db)?;
            let mut out = Relation::empty(ra.schema.clone());
            for (t, n) in ra.iter() {
                if filter_eval3(f, t).is_true() {
                    out.add(t.clone(), n)?;
                }
            }
            Ok(out)
        }
        RaExpr::Rename(a, from, to) => {
            let ra = eval(a, db)?;
            let mut schema = ra.schema.clone();
            if !schema.remove(from) {
                return Err(RaError::MissingAttr(from.clone()));
            }
            if !schema.insert(to.clone()) {
                return Err(RaError::AttrClash(to.clone()));
            }
            let mut out = Relation::empty(schema);
            for (t, n) in ra.iter() {
                let mut cells = t.cells.clone();
                let v = cells.remove(from).expect("rename source present");
                cells.insert(to.clone(), v);
                out.add(Tuple { cells }, n)?;
            }
            Ok(out)
        }
        RaExpr::Extend(a, name, term) => {
            let ra = eval(a, db)?;
            let mut schema = ra.schema.clone();
            if !schema.insert(name.clone()) {
                return Err(RaError::AttrClash(name.clone()));
            }
            let mut out = Relation::empty(schema);
            for (t, n) in ra.iter() {
                let mut cells = t.cells.clone();
                cells.insert(name.clone(), term_eval(term, t));
                out.add(Tuple { cells }, n)?;
            }
            Ok(out)
        }
        RaExpr::NatJoin(a, b) => {
            let ra = eval(a, db)?;
            let rb = eval(b, db)?;
            let schema: AttrSet = ra.schema.union(&rb.schema).cloned().collect();
            let mut out = Relation::empty(schema);
            for (t1, n1) in ra.iter() {
                for (t2, n2) in rb.iter() {
                    if let Some(t) = join_tuples(t1, t2) {
                        out.add(t, mul(n1, n2)?)?;
                    }
                }
            }
            Ok(out)
        }
        RaExpr::JoinF(a, b, f) => {
            let joined = RaExpr::nat_join((**a).clone(), (**b).clone());
            eval(&RaExpr::select(joined, f.clone()), db)
        }
        RaExpr::LeftJoinF(a, b, f) => {
            let ra = eval(a, db)?;
            let matched = eval(
                &RaExpr::select(
                    RaExpr::nat_join((**a).clone(), (**b).clone()),
                    f.clone(),
                ),
                db,
            )?;
            let schema = matched.schema.clone();
            let pad: AttrSet = schema.difference(&ra.schema).cloned().collect();
            let mut out = Relation::empty(schema);
            for (t, n) in matched.iter() {
                out.add(t.clone(), n)?;
            }
            // unmatched left part, padded with nulls
            for (t, n) in ra.iter() {
                let seen = matched
                    .iter()
                    .any(|(m, _)| m.restrict(&ra.schema) == *t);
                if !seen {
                    out.add(pad_tuple(t, &pad), n)?;
                }
            }
            Ok(out)
        }
        RaExpr::OuterUnion(a, b) => {
            let ra = eval(a, db)?;
            let rb = eval(b, db)?;
            let schema: AttrSet = ra.schema.union(&rb.schema).cloned().collect();
            let pa: AttrSet = schema.difference(&ra.schema).cloned().collect();
            let pb: AttrSet = schema.difference(&rb.schema).cloned().collect();
            let mut out = Relation::empty(schema);
            for (t, n) in ra.iter() {
                out.add(pad_tuple(t, &pa), n)?;
            }
            for (t, n) in rb.iter() {
                out.add(pad_tuple(t, &pb), n)?;
            }
            Ok(out)
        }
        RaExpr::Distinct(a) => {
            let ra = eval(a, db)?;
            let mut out = Relation::empty(ra.schema.clone());
            for (t, _) in ra.iter() {
                out.add(t.clone(), 1)?;
            }
            Ok(out)
        }
        RaExpr::Pad(a, u) => {
            let ra = eval(a, db)?;
            for x in u {
                if ra.schema.contains(x) {
                    return Err(RaError::AttrClash(x.clone()));
                }
            }
            let schema: AttrSet = ra.schema.union(u).cloned().collect();
            let mut out = Relation::empty(schema);
            for (t, n) in ra.iter() {
                out.add(pad_tuple(t, u), n)?;
            }
            Ok(out)
        }
    }
}

// ---- bridge between RDF terms and database values -----------------------

pub const TPL_OPAQUE_IRI: &str = "#iri";
pub const TPL_BNODE: &str = "#bnode";
pub const TPL_TAGGED_LIT: &str = "#lit";
pub const INT_TAG: &str = "#int";

fn parse_structured_iri(s: &str) -> Option<DbValue> {
    let rest = s.strip_prefix("iri:")?;
    let (tpl, args) = rest.split_once(':')?;
    if tpl.is_empty() {
        return None;
    }
    let vals: Vec<DbValue> = args.split('|').map(parse_cell_scalar).collect();
    Some(DbValue::Iri(tpl.to_string(), vals))
}

fn parse_cell_scalar(s: &str) -> DbValue {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_digit())
        || (s.starts_with('-') && s.len() > 1 && s[1..].chars().all(|c| c.is_ascii_digit()))
    {
        if let Ok(i) = s.parse::<i64>() {
            return DbValue::Int(i);
        }
    }
    DbValue::Text(s.to_string())
}

fn render_cell_scalar(v: &DbValue) -> String {
    match v {
        DbValue::Text(s) => s.clone(),
        DbValue::Int(i) => i.to_string(),
        DbValue::Null => "NULL".to_string(),
        DbValue::Iri(tpl, args) => render_structured_iri(tpl, args),
    }
}

pub fn render_structured_iri(tpl: &str, args: &[DbValue]) -> String {
    format!(
        "iri:{tpl}:{}",
        args.iter().map(render_cell_scalar).collect::<Vec<_>>().join("|")
    )
}

/// Injective embedding of RDF terms into database values. Structured IRI
/// spellings (`iri:<tpl>:<args>`) round-trip into structured values so
/// the virtual-graph oracle agrees with mapping unfolding.
pub fn term_to_db(t: &RdfTerm) -> DbValue {
    match t {
        RdfTerm::Iri(s) => parse_structured_iri(s)
            .unwrap_or_else(|| DbValue::Iri(TPL_OPAQUE_IRI.to_string(), vec![DbValue::text(s)])),
        RdfTerm::Blank(l) => DbValue::Iri(TPL_BNODE.to_string(), vec![DbValue::text(l)]),
        RdfTerm::Literal(lex, None) => DbValue::text(lex),
        RdfTerm::Literal(lex, Some(tag)) => {
            if tag == INT_TAG {
                if let Ok(i) = lex.parse::<i64>() {
                    if i.to_string() == *lex {
                        return DbValue::Int(i);
                    }
                }
            }
            DbValue::Iri(
                TPL_TAGGED_LIT.to_string(),
                vec![DbValue::text(lex), DbValue::text(tag)],
            )
        }
    }
}

/// Inverse of [`term_to_db`]; null has no term counterpart.
pub fn db_to_term(v: &DbValue) -> Option<RdfTerm> {
    match v {
        DbValue::Null => None,
        DbValue::Text(s) => Some(RdfTerm::Literal(s.clone(), None)),
        DbValue::Int(i) => Some(RdfTerm::Literal(i.to_string(), Some(INT_TAG.to_string()))),
        DbValue::Iri(tpl, args) => match (tpl.as_str(), args.as_slice()) {
            (TPL_OPAQUE_IRI, [DbValue::Text(s)]) => Some(RdfTerm::Iri(s.clone())),
            (TPL_BNODE, [DbValue::Text(l)]) => Some(RdfTerm::Blank(l.clone())),
            (TPL_TAGGED_LIT, [DbValue::Text(lex), DbValue::Text(tag)]) => {
                Some(RdfTerm::Literal(lex.clone(), Some(tag.clone())))
            }
            _ => Some(RdfTerm::Iri(render_structured_iri(tpl, args))),
        },
    }
}

/// Stores a graph as the ternary `triple` relation; the result is a set.
pub fn triple_instance(g: &RdfGraph) -> DbInstance {
    let mut rel = Relation::empty(attrset(&["sub", "pred", "obj"]));
    for t in &g.triples {
        let tuple: Tuple = [
            ("sub".to_string(), term_to_db(&t.sub)),
            ("pred".to_string(), term_to_db(&t.pred)),
            ("obj".to_string(), term_to_db(&t.obj)),
        ]
        .into_iter()
        .collect();
        rel.add(tuple, 1).expect("fresh relation cannot overflow");
    }
    let mut db = DbInstance::new();
    db.insert(TRIPLE_REL, rel);
    db
}

// ---- instance file format -----------------------------------------------

/// Loads the per-relation CSV format: a `relation <name>(a,b,...)` header
/// followed by rows; `NULL` cells are null, `iri:<tpl>:<a>|<b>` cells are
/// structured IRIs, bare digits are integers, everything else is text.
pub fn parse_instance(text: &str) -> Result<DbInstance, RaError> {
    let mut db = DbInstance::new();
    let mut current: Option<(String, Vec<Attr>, Relation)> = None;
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("relation ") {
            if let Some((name, _, rel)) = current.take() {
                db.insert(name, rel);
            }
            let (name, attrs_part) = rest
                .split_once('(')
                .ok_or_else(|| RaError::SchemaMismatch(rest.to_string()))?;
            let attrs_part = attrs_part
                .strip_suffix(')')
                .ok_or_else(|| RaError::SchemaMismatch(rest.to_string()))?;
            let attrs: Vec<Attr> = attrs_part
                .split(',')
                .map(|a| a.trim().to_string())
                .filter(|a| !a.is_empty())
                .collect();
            let schema: AttrSet = attrs.iter().cloned().collect();
            if schema.len() != attrs.len() {
                return Err(RaError::SchemaMismatch(name.trim().to_string()));
            }
            current = Some((
                name.trim().to_string(),
                attrs,
                Relation::empty(schema),
            ));
        } else {
            let Some((name, attrs, rel)) = current.as_mut() else {
                return Err(RaError::SchemaMismatch(line.to_string()));
            };
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != attrs.len() {
                return Err(RaError::SchemaMismatch(name.clone()));
            }
            let tuple: Tuple = attrs
                .iter()
                .zip(cells)
                .map(|(a, c)| (a.clone(), parse_cell(c)))
                .collect();
            rel.add(tuple, 1)?;
        }
    }
    if let Some((name, _, rel)) = current.take() {
        db.insert(name, rel);
    }
    Ok(db)
}

fn parse_cell(s: &str) -> DbValue {
    if s == "NULL" {
        return DbValue::Null;
    }
    if let Some(v) = parse_structured_iri(s) {
        return v;
    }
    parse_cell_scalar(s)
}

// ---- small-domain filter oracle -----------------------------------------

/// Default value domain for exhaustive filter checks.
pub fn small_domain() -> Vec<DbValue> {
    vec![
        DbValue::Null,
        DbValue::Int(0),
        DbValue::Int(1),
        DbValue::text("a"),
    ]
}

/// Enumerates every tuple over `attrs` with cells drawn from `domain`.
pub fn enumerate_tuples(attrs: &AttrSet, domain: &[DbValue]) -> Vec<Tuple> {
    let names: Vec<&Attr> = attrs.iter().collect();
    let mut out = vec![Tuple::default()];
    for a in names {
        let mut next = Vec::with_capacity(out.len() * domain.len());
        for t in &out {
            for v in domain {
                let mut cells = t.cells.clone();
                cells.insert(a.clone(), v.clone());
                next.push(Tuple { cells });
            }
        }
        out = next;
    }
    out
}

/// F1 ≡⁺ F2: the filters are true on exactly the same tuples over the
/// enumerated domain. This is the test-side certification oracle.
pub fn p_equivalent(f1: &RaFilter, f2: &RaFilter, domain: &[DbValue]) -> bool {
    let mut attrs = f1.attrs();
    attrs.extend(f2.attrs());
    enumerate_tuples(&attrs, domain)
        .iter()
        .all(|t| filter_eval3(f1, t).is_true() == filter_eval3(f2, t).is_true())
}
