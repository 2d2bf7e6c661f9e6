//! Mapping assertions (triple templates over filtered base relations),
//! the schema and constraint catalog, and unfolding of triple scans into
//! unions of instantiated sources. IRI templates are injective and map
//! only null to null, which is what licenses rewriting equalities on
//! templated terms into equalities on their arguments.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{RdfGraph, RdfTerm, Triple};
use crate::ra::eval::{db_to_term, eval, term_eval, DbInstance, Tuple, TPL_OPAQUE_IRI};
use crate::ra::{
    attrs, never_true, Attr, AttrSet, BaseSchemas, DbValue, RaError, RaExpr, RaFilter, RaTerm,
    TRIPLE_REL, UNIT_REL,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IriTemplate {
    pub id: String,
    pub arity: usize,
    /// Rendering pieces for SQL concatenation: prefix, then one separator
    /// before each argument after the first.
    pub prefix: String,
    pub separators: Vec<String>,
}

impl IriTemplate {
    pub fn new(id: impl Into<String>, arity: usize) -> Self {
        let id = id.into();
        IriTemplate {
            prefix: format!("urn:{id}:"),
            separators: vec!["/".to_string(); arity.saturating_sub(1)],
            id,
            arity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slot {
    Tpl(String, Vec<Attr>),
    AttrRef(Attr),
    ConstIri(String),
}

impl Slot {
    pub fn attrs(&self) -> Vec<Attr> {
        match self {
            Slot::Tpl(_, args) => args.clone(),
            Slot::AttrRef(a) => vec![a.clone()],
            Slot::ConstIri(_) => vec![],
        }
    }

    /// The term this slot exposes over the source relation.
    pub fn term(&self) -> RaTerm {
        match self {
            Slot::Tpl(id, args) => RaTerm::IriTpl(
                id.clone(),
                args.iter().map(|a| RaTerm::attr(a.clone())).collect(),
            ),
            Slot::AttrRef(a) => RaTerm::attr(a.clone()),
            Slot::ConstIri(s) => RaTerm::Const(opaque_iri(s)),
        }
    }
}

pub fn opaque_iri(s: &str) -> DbValue {
    DbValue::Iri(TPL_OPAQUE_IRI.to_string(), vec![DbValue::text(s)])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingAssertion {
    pub sub: Slot,
    pub pred: String,
    pub obj: Slot,
    pub rel: String,
    /// Attributes guarded by ¬isNull in the source; always covers every
    /// attribute the head uses.
    pub notnull: AttrSet,
}

impl MappingAssertion {
    /// σ_{¬isNull...} base: the source query of the assertion.
    pub fn source(&self) -> RaExpr {
        let base = RaExpr::Base(self.rel.clone());
        let f = RaFilter::conj(
            self.notnull
                .iter()
                .map(|a| RaFilter::not(RaFilter::is_null(vec![RaTerm::attr(a.clone())]))),
        );
        if f == RaFilter::True {
            base
        } else {
            RaExpr::select(base, f)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKey {
    pub child_rel: String,
    pub child_attrs: Vec<Attr>,
    pub parent_rel: String,
    pub parent_attrs: Vec<Attr>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationSchema {
    pub attrs: Vec<Attr>,
    pub non_nullable: AttrSet,
    pub unique_keys: Vec<AttrSet>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaCatalog {
    pub relations: BTreeMap<String, RelationSchema>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl BaseSchemas for SchemaCatalog {
    fn base_attrs(&self, rel: &str) -> Option<AttrSet> {
        self.relations
            .get(rel)
            .map(|r| r.attrs.iter().cloned().collect())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MappingError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("unknown attribute {attr} in relation {rel}")]
    UnknownAttr { rel: String, attr: String },
    #[error("template {id} used with arity {got}, expected {expected}")]
    ArityMismatch { id: String, got: usize, expected: usize },
    #[error("foreign key parent attributes are not a unique key of {0}")]
    FkParentNotKey(String),
    #[error("expression is not in translator shape: {0}")]
    NotTranslatorShape(String),
}

// ---- schema file --------------------------------------------------------

/// Parses the schema format: `relation name(attr[*],...)` with `*` for
/// non-nullable attributes, then `key(attr,...)` and
/// `fk(attr,... -> rel.attr,...)` lines attaching to the latest relation.
pub fn parse_schema(text: &str) -> Result<SchemaCatalog, MappingError> {
    let mut cat = SchemaCatalog::default();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        let syn = |msg: String| MappingError::Syntax { line: line_no, msg };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("relation ") {
            let (name, args) = split_call(rest).ok_or_else(|| syn("bad relation header".into()))?;
            let mut schema = RelationSchema::default();
            for a in args {
                if let Some(nn) = a.strip_suffix('*') {
                    schema.attrs.push(nn.trim().to_string());
                    schema.non_nullable.insert(nn.trim().to_string());
                } else {
                    schema.attrs.push(a);
                }
            }
            current = Some(name.clone());
            cat.relations.insert(name, schema);
        } else if let Some(rest) = line.strip_prefix("key") {
            let rel = current.clone().ok_or_else(|| syn("key before relation".into()))?;
            let attrs = paren_list(rest).ok_or_else(|| syn("bad key line".into()))?;
            let key: AttrSet = attrs.into_iter().collect();
            check_attrs(&cat, &rel, key.iter())?;
            cat.relations.get_mut(&rel).unwrap().unique_keys.push(key);
        } else if let Some(rest) = line.strip_prefix("fk") {
            let rel = current.clone().ok_or_else(|| syn("fk before relation".into()))?;
            let body = rest
                .trim()
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| syn("bad fk line".into()))?;
            let (child, parent) = body
                .split_once("->")
                .ok_or_else(|| syn("fk needs ->".into()))?;
            let child_attrs: Vec<Attr> =
                child.split(',').map(|s| s.trim().to_string()).collect();
            let (parent_rel, parent_attr_text) = parent
                .trim()
                .split_once('.')
                .ok_or_else(|| syn("fk parent needs rel.attr".into()))?;
            let parent_attrs: Vec<Attr> = parent_attr_text
                .split(',')
                .map(|s| s.trim().to_string())
                .collect();
            check_attrs(&cat, &rel, child_attrs.iter())?;
            check_attrs(&cat, parent_rel.trim(), parent_attrs.iter())?;
            cat.foreign_keys.push(ForeignKey {
                child_rel: rel,
                child_attrs,
                parent_rel: parent_rel.trim().to_string(),
                parent_attrs,
            });
        } else {
            return Err(syn(format!("unrecognised line: {line}")));
        }
    }
    // FK parents must be unique keys
    for fk in &cat.foreign_keys {
        let key: AttrSet = fk.parent_attrs.iter().cloned().collect();
        let parent = cat
            .relations
            .get(&fk.parent_rel)
            .ok_or_else(|| MappingError::UnknownRelation(fk.parent_rel.clone()))?;
        if !parent.unique_keys.contains(&key) {
            return Err(MappingError::FkParentNotKey(fk.parent_rel.clone()));
        }
    }
    Ok(cat)
}

fn check_attrs<'a>(
    cat: &SchemaCatalog,
    rel: &str,
    attrs: impl Iterator<Item = &'a Attr>,
) -> Result<(), MappingError> {
    let schema = cat
        .relations
        .get(rel)
        .ok_or_else(|| MappingError::UnknownRelation(rel.to_string()))?;
    for a in attrs {
        if !schema.attrs.contains(a) {
            return Err(MappingError::UnknownAttr {
                rel: rel.to_string(),
                attr: a.clone(),
            });
        }
    }
    Ok(())
}

fn split_call(s: &str) -> Option<(String, Vec<String>)> {
    let (name, rest) = s.split_once('(')?;
    let args = rest.strip_suffix(')')?;
    let list = if args.trim().is_empty() {
        vec![]
    } else {
        args.split(',').map(|a| a.trim().to_string()).collect()
    };
    Some((name.trim().to_string(), list))
}

fn paren_list(s: &str) -> Option<Vec<String>> {
    let body = s.trim().strip_prefix('(')?.strip_suffix(')')?;
    Some(body.split(',').map(|a| a.trim().to_string()).collect())
}

// ---- mapping file -------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct Mapping {
    pub assertions: Vec<MappingAssertion>,
    pub templates: BTreeMap<String, IriTemplate>,
}

/// One assertion per line:
/// `head(subSlot, predIri, objSlot) <- relation WHERE notnull(a,b,...)`
/// with slots `tpl:<id>(attr,...)`, `attr:<name>`, `iri:<text>`. The
/// WHERE part may be omitted; the ¬isNull guards for every head
/// attribute are always added.
pub fn parse_mapping(text: &str, catalog: &SchemaCatalog) -> Result<Mapping, MappingError> {
    let mut mapping = Mapping::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        let syn = |msg: String| MappingError::Syntax { line: line_no, msg };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rest = line
            .strip_prefix("head(")
            .ok_or_else(|| syn("assertion must start with head(".into()))?;
        let close = find_matching(rest).ok_or_else(|| syn("unbalanced head(...)".into()))?;
        let head_body = &rest[..close];
        let tail = rest[close + 1..].trim();
        let tail = tail
            .strip_prefix("<-")
            .ok_or_else(|| syn("missing <- after head".into()))?
            .trim();
        let (rel_part, where_part) = match tail.split_once("WHERE") {
            Some((r, w)) => (r.trim(), Some(w.trim())),
            None => (tail, None),
        };
        let rel = rel_part.to_string();
        if !catalog.relations.contains_key(&rel) {
            return Err(MappingError::UnknownRelation(rel));
        }
        let parts = split_top_level(head_body);
        if parts.len() != 3 {
            return Err(syn("head needs exactly three slots".into()));
        }
        let sub = parse_slot(parts[0].trim()).map_err(|m| syn(m))?;
        let pred = match parse_slot(parts[1].trim()).map_err(|m| syn(m))? {
            Slot::ConstIri(s) => s,
            _ => return Err(syn("predicate slot must be a constant IRI".into())),
        };
        let obj = parse_slot(parts[2].trim()).map_err(|m| syn(m))?;
        let mut notnull: AttrSet = AttrSet::new();
        notnull.extend(sub.attrs());
        notnull.extend(obj.attrs());
        if let Some(w) = where_part {
            let extra = w
                .trim()
                .strip_prefix("notnull")
                .and_then(paren_list)
                .ok_or_else(|| syn("WHERE clause must be notnull(...)".into()))?;
            notnull.extend(extra);
        }
        check_attrs(catalog, &rel, notnull.iter())?;
        for slot in [&sub, &obj] {
            if let Slot::Tpl(id, args) = slot {
                match mapping.templates.get(id) {
                    None => {
                        mapping
                            .templates
                            .insert(id.clone(), IriTemplate::new(id.clone(), args.len()));
                    }
                    Some(t) if t.arity != args.len() => {
                        return Err(MappingError::ArityMismatch {
                            id: id.clone(),
                            got: args.len(),
                            expected: t.arity,
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        mapping.assertions.push(MappingAssertion {
            sub,
            pred,
            obj,
            rel,
            notnull,
        });
    }
    Ok(mapping)
}

fn find_matching(s: &str) -> Option<usize> {
    let mut depth = 1usize;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '<' => depth += 1,
            ')' | '>' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_slot(s: &str) -> Result<Slot, String> {
    if let Some(rest) = s.strip_prefix("tpl:") {
        let (id, args) =
            split_call(rest).ok_or_else(|| format!("bad template slot: {s}"))?;
        if args.is_empty() {
            return Err(format!("template {id} needs arguments"));
        }
        return Ok(Slot::Tpl(id, args));
    }
    if let Some(a) = s.strip_prefix("attr:") {
        return Ok(Slot::AttrRef(a.trim().to_string()));
    }
    if let Some(iri) = s.strip_prefix("iri:") {
        return Ok(Slot::ConstIri(iri.trim().to_string()));
    }
    if let Some(body) = s.strip_prefix('<').and_then(|x| x.strip_suffix('>')) {
        return Ok(Slot::ConstIri(body.to_string()));
    }
    Err(format!("unrecognised slot: {s}"))
}

// ---- injectivity-based filter rewriting ---------------------------------

/// Lifts constant structured IRI values into template terms so the
/// argument-wise rules below see a uniform shape.
fn lift(t: &RaTerm) -> RaTerm {
    match t {
        RaTerm::Const(DbValue::Iri(tpl, args)) => RaTerm::IriTpl(
            tpl.clone(),
            args.iter().map(|v| RaTerm::Const(v.clone())).collect(),
        ),
        other => other.clone(),
    }
}

/// Rewrites template equalities argument-wise (injectivity), turns
/// equalities between different templates into the never-true filter, and
/// pushes isNull through templates (null in iff null out).
pub fn iri_equality_rewrite(f: &RaFilter) -> RaFilter {
    match f {
        RaFilter::True => RaFilter::True,
        RaFilter::Eq(a, b) => match (lift(a), lift(b)) {
            (RaTerm::IriTpl(i, xs), RaTerm::IriTpl(j, ys)) => {
                if i == j && xs.len() == ys.len() {
                    RaFilter::conj(
                        xs.into_iter()
                            .zip(ys)
                            .map(|(x, y)| RaFilter::eq(x, y)),
                    )
                } else {
                    RaFilter::fals()
                }
            }
            (RaTerm::IriTpl(_, _), RaTerm::Const(c)) | (RaTerm::Const(c), RaTerm::IriTpl(_, _))
                if !c.is_null() =>
            {
                // a templated IRI never equals a non-IRI constant
                RaFilter::fals()
            }
            _ => f.clone(),
        },
        RaFilter::IsNull(ts) => {
            if ts.len() == 1 {
                if let RaTerm::IriTpl(_, args) = lift(&ts[0]) {
                    // the template value is null iff some argument is
                    return RaFilter::disj(
                        args.into_iter().map(|a| RaFilter::is_null(vec![a])),
                    );
                }
            }
            let flat: Vec<RaTerm> = ts
                .iter()
                .map(|t| match lift(t) {
                    // single-argument templates: null in iff null out
                    RaTerm::IriTpl(_, mut args) if args.len() == 1 => args.remove(0),
                    _ => t.clone(),
                })
                .collect();
            RaFilter::is_null(flat)
        }
        RaFilter::And(a, b) => RaFilter::And(
            Box::new(iri_equality_rewrite(a)),
            Box::new(iri_equality_rewrite(b)),
        ),
        RaFilter::Not(a) => RaFilter::Not(Box::new(iri_equality_rewrite(a))),
    }
}

// ---- unfolding ----------------------------------------------------------

/// Replaces every triple scan in a translator output by the outer union
/// of all matching instantiated assertion sources. Zero matches give the
/// canonical empty relation over the scan's attributes.
pub fn unfold(e: &RaExpr, mapping: &Mapping) -> Result<RaExpr, MappingError> {
    match e {
        RaExpr::ExtProject(inner, assigns) => match inner.as_ref() {
            RaExpr::Base(rel) if rel == TRIPLE_REL => {
                unfold_scan(assigns, &RaFilter::True, mapping)
            }
            RaExpr::Select(base, f) if matches!(base.as_ref(), RaExpr::Base(r) if r == TRIPLE_REL) => {
                unfold_scan(assigns, f, mapping)
            }
            _ => Ok(RaExpr::ExtProject(
                Box::new(unfold(inner, mapping)?),
                assigns.clone(),
            )),
        },
        RaExpr::Base(rel) if rel == TRIPLE_REL => Err(MappingError::NotTranslatorShape(
            "bare triple scan without projection".into(),
        )),
        RaExpr::Base(_) => Ok(e.clone()),
        RaExpr::Union(a, b) => Ok(RaExpr::Union(
            Box::new(unfold(a, mapping)?),
            Box::new(unfold(b, mapping)?),
        )),
        RaExpr::Diff(a, b) => Ok(RaExpr::Diff(
            Box::new(unfold(a, mapping)?),
            Box::new(unfold(b, mapping)?),
        )),
        RaExpr::Project(a, u) => Ok(RaExpr::Project(Box::new(unfold(a, mapping)?), u.clone())),
        RaExpr::Select(a, f) => Ok(RaExpr::Select(Box::new(unfold(a, mapping)?), f.clone())),
        RaExpr::Rename(a, x, y) => Ok(RaExpr::Rename(
            Box::new(unfold(a, mapping)?),
            x.clone(),
            y.clone(),
        )),
        RaExpr::Extend(a, n, t) => Ok(RaExpr::Extend(
            Box::new(unfold(a, mapping)?),
            n.clone(),
            t.clone(),
        )),
        RaExpr::NatJoin(a, b) => Ok(RaExpr::NatJoin(
            Box::new(unfold(a, mapping)?),
            Box::new(unfold(b, mapping)?),
        )),
        RaExpr::JoinF(a, b, f) => Ok(RaExpr::JoinF(
            Box::new(unfold(a, mapping)?),
            Box::new(unfold(b, mapping)?),
            f.clone(),
        )),
        RaExpr::LeftJoinF(a, b, f) => Ok(RaExpr::LeftJoinF(
            Box::new(unfold(a, mapping)?),
            Box::new(unfold(b, mapping)?),
            f.clone(),
        )),
        RaExpr::OuterUnion(a, b) => Ok(RaExpr::OuterUnion(
            Box::new(unfold(a, mapping)?),
            Box::new(unfold(b, mapping)?),
        )),
        RaExpr::Distinct(a) => Ok(RaExpr::Distinct(Box::new(unfold(a, mapping)?))),
        RaExpr::Pad(a, u) => Ok(RaExpr::Pad(Box::new(unfold(a, mapping)?), u.clone())),
    }
}

fn unfold_scan(
    assigns: &[(Attr, RaTerm)],
    filter: &RaFilter,
    mapping: &Mapping,
) -> Result<RaExpr, MappingError> {
    let mut branches: Vec<RaExpr> = Vec::new();
    for assertion in &mapping.assertions {
        let subst: BTreeMap<Attr, RaTerm> = [
            ("sub".to_string(), assertion.sub.term()),
            (
                "pred".to_string(),
                RaTerm::Const(opaque_iri(&assertion.pred)),
            ),
            ("obj".to_string(), assertion.obj.term()),
        ]
        .into();
        let instantiated = filter.substitute(&subst);
        let rewritten = iri_equality_rewrite(&instantiated);
        if never_true(&rewritten) {
            continue;
        }
        let guards = RaFilter::conj(
            assertion
                .notnull
                .iter()
                .map(|a| RaFilter::not(RaFilter::is_null(vec![RaTerm::attr(a.clone())]))),
        );
        let cond = RaFilter::and(guards, rewritten);
        let source = if cond == RaFilter::True {
            RaExpr::Base(assertion.rel.clone())
        } else {
            RaExpr::select(RaExpr::Base(assertion.rel.clone()), cond)
        };
        let new_assigns: Vec<(Attr, RaTerm)> = assigns
            .iter()
            .map(|(n, t)| (n.clone(), t.substitute(&subst)))
            .collect();
        branches.push(RaExpr::ext_project(source, new_assigns));
    }
    match branches.len() {
        0 => {
            // empty relation over the scan's output attributes
            let nulls: Vec<(Attr, RaTerm)> = assigns
                .iter()
                .map(|(n, _)| (n.clone(), RaTerm::null()))
                .collect();
            Ok(RaExpr::ext_project(
                RaExpr::select(RaExpr::Base(UNIT_REL.to_string()), RaFilter::fals()),
                nulls,
            ))
        }
        _ => {
            let mut it = branches.into_iter();
            let first = it.next().unwrap();
            Ok(it.fold(first, RaExpr::outer_union))
        }
    }
}

// ---- oracle: virtual graph ----------------------------------------------

/// Materialises the virtual RDF graph: evaluates every assertion source
/// and emits its head triples. The result is a set.
pub fn virtual_graph(mapping: &Mapping, db: &DbInstance) -> Result<RdfGraph, RaError> {
    let mut g = RdfGraph::new();
    for assertion in &mapping.assertions {
        let rows = eval(&assertion.source(), db)?;
        let sub_t = assertion.sub.term();
        let obj_t = assertion.obj.term();
        for (row, _) in rows.iter() {
            let s = term_eval(&sub_t, row);
            let o = term_eval(&obj_t, row);
            let (Some(s), Some(o)) = (db_to_term(&s), db_to_term(&o)) else {
                continue;
            };
            let t = Triple::new(s, RdfTerm::Iri(assertion.pred.clone()), o)
                .expect("predicate is an IRI");
            g.insert(t);
        }
    }
    Ok(g)
}

// ---- instance validation -------------------------------------------------

/// Checks an instance against the catalog: schemas, non-null columns,
/// unique keys, and foreign keys.
pub fn validate_instance(db: &DbInstance, catalog: &SchemaCatalog) -> Result<(), String> {
    for (name, schema) in &catalog.relations {
        let Some(rel) = db.relations.get(name) else {
            continue; // missing relations are treated as empty
        };
        let expected: AttrSet = schema.attrs.iter().cloned().collect();
        if rel.schema != expected {
            return Err(format!("relation {name}: attribute set mismatch"));
        }
        for (t, _) in rel.iter() {
            for a in &schema.non_nullable {
                if t.get(a).map(DbValue::is_null).unwrap_or(true) {
                    return Err(format!("relation {name}: null in non-nullable {a}"));
                }
            }
        }
        for key in &schema.unique_keys {
            let mut seen = std::collections::BTreeSet::new();
            for (t, n) in rel.iter() {
                let kt: Vec<&DbValue> = key.iter().map(|a| t.get(a).unwrap()).collect();
                if kt.iter().any(|v| v.is_null()) {
                    continue;
                }
                let rendered: Vec<DbValue> = kt.into_iter().cloned().collect();
                if n > 1 || !seen.insert(rendered) {
                    return Err(format!("relation {name}: duplicate key {key:?}"));
                }
            }
        }
    }
    for fk in &catalog.foreign_keys {
        let child = db.relations.get(&fk.child_rel);
        let parent = db.relations.get(&fk.parent_rel);
        let Some(child) = child else { continue };
        for (t, _) in child.iter() {
            let vals: Vec<&DbValue> = fk.child_attrs.iter().map(|a| t.get(a).unwrap()).collect();
            if vals.iter().any(|v| v.is_null()) {
                continue;
            }
            let found = parent.map_or(false, |p| {
                p.iter().any(|(pt, _)| {
                    fk.parent_attrs
                        .iter()
                        .zip(&vals)
                        .all(|(a, v)| pt.get(a) == Some(*v))
                })
            });
            if !found {
                return Err(format!(
                    "foreign key violation: {}({:?}) has no parent in {}",
                    fk.child_rel, fk.child_attrs, fk.parent_rel
                ));
            }
        }
    }
    Ok(())
}

/// Well-formedness check of an unfolded expression against the catalog.
pub fn check_wellformed(e: &RaExpr, catalog: &SchemaCatalog) -> Result<AttrSet, RaError> {
    attrs(e, catalog)
}

/// Builds an instance skeleton for a tuple helper in tests.
pub fn tuple_of(pairs: &[(&str, DbValue)]) -> Tuple {
    pairs
        .iter()
        .map(|(a, v)| (a.to_string(), v.clone()))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests;
