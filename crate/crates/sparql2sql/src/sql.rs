//! Rendering of algebra plans into portable SQL text.
//!
//! The dialect is conservative: SQL-92 plus COALESCE and CASE. Plans are
//! flattened where possible, so a projection over a filtered scan comes
//! out as one SELECT, joins keep their operands in a single FROM list,
//! and a filter on the optional side of a left join merges into the ON
//! clause. Aliases v1, v2, ... are assigned to scans and derived tables
//! in the order they are reached. Output is deterministic: identical
//! plans yield byte-identical statements.

use std::collections::BTreeMap;

use crate::mapping::IriTemplate;
use crate::ra::{
    Attr, BaseSchemas, DbValue, RaExpr, RaFilter, RaTerm, UNIT_REL,
};
use crate::ra::eval::{render_structured_iri, TPL_OPAQUE_IRI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SqlError {
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("attribute {0} is not available here")]
    MissingAttr(Attr),
    #[error("null padding outside a union cannot be rendered")]
    StrayPad,
    #[error("difference rendering is disabled")]
    DiffDisabled,
}

#[derive(Debug, Clone)]
pub struct SqlOptions {
    /// Terminate the statement with a semicolon.
    pub semicolon: bool,
    /// Render bag difference as EXCEPT ALL; when off it is rejected.
    pub except_all: bool,
}

impl Default for SqlOptions {
    fn default() -> Self {
        SqlOptions {
            semicolon: false,
            except_all: true,
        }
    }
}

/// Renders a plan against the given base schemas and IRI templates.
pub fn emit(
    e: &RaExpr,
    schemas: &dyn BaseSchemas,
    templates: &BTreeMap<String, IriTemplate>,
) -> Result<String, SqlError> {
    emit_with(e, schemas, templates, &SqlOptions::default())
}

pub fn emit_with(
    e: &RaExpr,
    schemas: &dyn BaseSchemas,
    templates: &BTreeMap<String, IriTemplate>,
    opts: &SqlOptions,
) -> Result<String, SqlError> {
    let mut em = Emitter {
        schemas,
        templates,
        opts,
        next_alias: 0,
    };
    // a union at the root needs no wrapping SELECT
    let body = match e {
        RaExpr::Union(..) | RaExpr::OuterUnion(..) | RaExpr::Diff(..) => em.union_query(e)?.0,
        _ => {
            let b = em.block(e)?;
            em.render(&b)
        }
    };
    let terminator = if opts.semicolon { ";\n" } else { "\n" };
    Ok(format!("{body}{terminator}"))
}

// ---- expression forms ----------------------------------------------------

/// A column expression kept structured until rendering, so late choices
/// (alias qualification, equality of same-template IRIs) stay possible.
#[derive(Debug, Clone, PartialEq, Eq)]
enum ColExpr {
    Col(String, Attr),
    Lit(String),
    Tpl(String, Vec<ColExpr>),
    Coalesce(Vec<ColExpr>),
    Case(Box<Cond>, Box<ColExpr>, Box<ColExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Cond {
    True,
    False,
    AllNull(Vec<ColExpr>),
    NotNull(ColExpr),
    Eq(ColExpr, ColExpr),
    And(Vec<Cond>),
    Or(Vec<Cond>),
    Not(Box<Cond>),
}

type Env = BTreeMap<Attr, ColExpr>;

#[derive(Debug, Clone)]
enum Source {
    Table(String, String),
    Derived(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum JoinKind {
    First,
    Inner,
    Left,
}

#[derive(Debug, Clone)]
struct FromItem {
    kind: JoinKind,
    source: Source,
    on: Vec<Cond>,
}

/// One SELECT statement under construction.
#[derive(Debug, Clone)]
struct Block {
    cols: Env,
    distinct: bool,
    from: Vec<FromItem>,
    wheres: Vec<Cond>,
}

struct Emitter<'a> {
    schemas: &'a dyn BaseSchemas,
    templates: &'a BTreeMap<String, IriTemplate>,
    opts: &'a SqlOptions,
    next_alias: usize,
}

impl Emitter<'_> {
    fn alias(&mut self) -> String {
        self.next_alias += 1;
        format!("v{}", self.next_alias)
    }

    fn block(&mut self, e: &RaExpr) -> Result<Block, SqlError> {
        match e {
            RaExpr::Base(rel) if rel == UNIT_REL => {
                let a = self.alias();
                Ok(Block {
                    cols: Env::new(),
                    distinct: false,
                    from: vec![FromItem {
                        kind: JoinKind::First,
                        source: Source::Derived("SELECT 1 AS one".to_string(), a),
                        on: vec![],
                    }],
                    wheres: vec![],
                })
            }
            RaExpr::Base(rel) => {
                let attrs = self
                    .schemas
                    .base_attrs(rel)
                    .ok_or_else(|| SqlError::UnknownRelation(rel.clone()))?;
                let a = self.alias();
                let cols = attrs
                    .iter()
                    .map(|x| (x.clone(), ColExpr::Col(a.clone(), x.clone())))
                    .collect();
                Ok(Block {
                    cols,
                    distinct: false,
                    from: vec![FromItem {
                        kind: JoinKind::First,
                        source: Source::Table(rel.clone(), a),
                        on: vec![],
                    }],
                    wheres: vec![],
                })
            }
            RaExpr::Select(x, f) => {
                let mut b = { let b0 = self.block(x)?; self.maybe_wrap(b0) };
                let c = cond_of(f, &b.cols, self.templates)?;
                if c != Cond::True {
                    b.wheres.push(c);
                }
                Ok(b)
            }
            RaExpr::Project(x, u) => {
                let mut b = { let b0 = self.block(x)?; self.maybe_wrap(b0) };
                b.cols.retain(|a, _| u.contains(a));
                Ok(b)
            }
            RaExpr::ExtProject(x, assigns) => {
                let b = { let b0 = self.block(x)?; self.maybe_wrap(b0) };
                let mut cols = Env::new();
                for (a, t) in assigns {
                    cols.insert(a.clone(), term_of(t, &b.cols, self.templates)?);
                }
                Ok(Block { cols, ..b })
            }
            RaExpr::Extend(x, a, t) => {
                let mut b = { let b0 = self.block(x)?; self.maybe_wrap(b0) };
                let c = term_of(t, &b.cols, self.templates)?;
                b.cols.insert(a.clone(), c);
                Ok(b)
            }
            RaExpr::Rename(x, from, to) => {
                let mut b = { let b0 = self.block(x)?; self.maybe_wrap(b0) };
                let c = b
                    .cols
                    .remove(from)
                    .ok_or_else(|| SqlError::MissingAttr(from.clone()))?;
                b.cols.insert(to.clone(), c);
                Ok(b)
            }
            RaExpr::NatJoin(a, b) => self.join(a, b, JoinKind::Inner, &RaFilter::True),
            RaExpr::JoinF(a, b, f) => self.join(a, b, JoinKind::Inner, f),
            RaExpr::LeftJoinF(a, b, f) => self.join(a, b, JoinKind::Left, f),
            RaExpr::Union(..) | RaExpr::OuterUnion(..) | RaExpr::Diff(..) => {
                let (sql, attrs) = self.union_query(e)?;
                let alias = self.alias();
                let cols = attrs
                    .iter()
                    .map(|x| (x.clone(), ColExpr::Col(alias.clone(), x.clone())))
                    .collect();
                Ok(Block {
                    cols,
                    distinct: false,
                    from: vec![FromItem {
                        kind: JoinKind::First,
                        source: Source::Derived(sql, alias),
                        on: vec![],
                    }],
                    wheres: vec![],
                })
            }
            RaExpr::Distinct(x) => {
                let mut b = self.block(x)?;
                b.distinct = true;
                Ok(b)
            }
            RaExpr::Pad(..) => Err(SqlError::StrayPad),
        }
    }

    /// A DISTINCT block cannot absorb further clauses; box it up.
    fn maybe_wrap(&mut self, b: Block) -> Block {
        if b.distinct {
            self.wrap(b)
        } else {
            b
        }
    }

    fn wrap(&mut self, b: Block) -> Block {
        let sql = self.render(&b);
        let alias = self.alias();
        let cols = b
            .cols
            .keys()
            .map(|a| (a.clone(), ColExpr::Col(alias.clone(), a.clone())))
            .collect();
        Block {
            cols,
            distinct: false,
            from: vec![FromItem {
                kind: JoinKind::First,
                source: Source::Derived(sql, alias),
                on: vec![],
            }],
            wheres: vec![],
        }
    }

    fn join(
        &mut self,
        a: &RaExpr,
        b: &RaExpr,
        kind: JoinKind,
        f: &RaFilter,
    ) -> Result<Block, SqlError> {
        let left = { let b0 = self.block(a)?; self.maybe_wrap(b0) };
        let right = { let b0 = self.block(b)?; self.maybe_wrap(b0) };
        // the right operand must fit in one FROM entry; otherwise box it
        let (src, mut on, right_cols) = if right.from.len() == 1 && right.from[0].on.is_empty() {
            let mut r = right;
            let item = r.from.remove(0);
            (item.source, r.wheres, r.cols)
        } else {
            let r = self.wrap(right);
            let item = r.from.into_iter().next().expect("wrapped block has one source");
            (item.source, vec![], r.cols)
        };
        let mut cols = left.cols.clone();
        for (x, c) in &right_cols {
            if let Some(lc) = cols.get(x) {
                on.push(eq_of(lc.clone(), c.clone()));
            } else {
                cols.insert(x.clone(), c.clone());
            }
        }
        // the join condition sees shared attributes through the left side
        let mut env = cols.clone();
        for (x, c) in &right_cols {
            env.entry(x.clone()).or_insert_with(|| c.clone());
        }
        let c = cond_of(f, &env, self.templates)?;
        if c != Cond::True {
            on.push(c);
        }
        let mut from = left.from;
        from.push(FromItem {
            kind,
            source: src,
            on,
        });
        Ok(Block {
            cols,
            distinct: left.distinct,
            from,
            wheres: left.wheres,
        })
    }

    /// Branches of a union, with nested unions of the same flavour
    /// flattened into one list.
    fn union_query(&mut self, e: &RaExpr) -> Result<(String, Vec<Attr>), SqlError> {
        let (sep, a, b) = match e {
            RaExpr::Union(a, b) | RaExpr::OuterUnion(a, b) => (" UNION ALL ", a, b),
            RaExpr::Diff(a, b) => {
                if !self.opts.except_all {
                    return Err(SqlError::DiffDisabled);
                }
                (" EXCEPT ALL ", a, b)
            }
            _ => unreachable!("union_query on a non-union node"),
        };
        let mut branches = Vec::new();
        collect_branches(e, a, &mut branches);
        collect_branches(e, b, &mut branches);
        // pool the output columns; branches pad what they lack with NULL
        let mut attrs: Vec<Attr> = Vec::new();
        let mut shapes = Vec::new();
        for br in branches {
            let core = match br {
                RaExpr::Pad(x, _) => x,
                other => other,
            };
            let blk = self.block(core)?;
            for x in blk.cols.keys() {
                if !attrs.contains(x) {
                    attrs.push(x.clone());
                }
            }
            shapes.push(blk);
        }
        attrs.sort();
        let rendered: Vec<String> = shapes
            .iter()
            .map(|blk| self.render_ordered(blk, &attrs))
            .collect();
        Ok((rendered.join(sep), attrs))
    }

    fn render(&self, b: &Block) -> String {
        let order: Vec<Attr> = b.cols.keys().cloned().collect();
        self.render_ordered(b, &order)
    }

    fn render_ordered(&self, b: &Block, order: &[Attr]) -> String {
        let qualify = b.from.len() > 1;
        let mut items = Vec::new();
        for a in order {
            match b.cols.get(a) {
                Some(c) => {
                    let e = render_col(c, qualify, self.templates);
                    if e == ident(a) {
                        items.push(e);
                    } else {
                        items.push(format!("{e} AS {}", ident(a)));
                    }
                }
                None => items.push(format!("NULL AS {}", ident(a))),
            }
        }
        if items.is_empty() {
            items.push("1 AS one".to_string());
        }
        let mut sql = String::from("SELECT ");
        if b.distinct {
            sql.push_str("DISTINCT ");
        }
        sql.push_str(&items.join(", "));
        sql.push_str(" FROM ");
        for (i, item) in b.from.iter().enumerate() {
            if i > 0 {
                sql.push_str(match item.kind {
                    JoinKind::Inner => " INNER JOIN ",
                    JoinKind::Left => " LEFT JOIN ",
                    JoinKind::First => " CROSS JOIN ",
                });
            }
            match &item.source {
                Source::Table(name, alias) => {
                    if qualify {
                        sql.push_str(&format!("{name} {alias}"));
                    } else {
                        sql.push_str(name);
                    }
                }
                Source::Derived(inner, alias) => {
                    sql.push_str(&format!("({inner}) {alias}"));
                }
            }
            if i > 0 {
                let on = if item.on.is_empty() {
                    "1=1".to_string()
                } else {
                    render_conj(&item.on, qualify, self.templates)
                };
                sql.push_str(&format!(" ON {on}"));
            }
        }
        if !b.wheres.is_empty() {
            sql.push_str(" WHERE ");
            sql.push_str(&render_conj(&b.wheres, qualify, self.templates));
        }
        sql
    }
}

fn collect_branches<'a>(parent: &RaExpr, e: &'a RaExpr, out: &mut Vec<&'a RaExpr>) {
    let same = matches!(
        (parent, e),
        (RaExpr::Union(..), RaExpr::Union(..))
            | (RaExpr::OuterUnion(..), RaExpr::OuterUnion(..))
    );
    match e {
        RaExpr::Union(a, b) | RaExpr::OuterUnion(a, b) if same => {
            collect_branches(parent, a, out);
            collect_branches(parent, b, out);
        }
        _ => out.push(e),
    }
}

// ---- term and condition lowering -----------------------------------------

fn term_of(
    t: &RaTerm,
    env: &Env,
    templates: &BTreeMap<String, IriTemplate>,
) -> Result<ColExpr, SqlError> {
    if let Some((v, w)) = t.as_coalesce() {
        let head = term_of(v, env, templates)?;
        let tail = term_of(w, env, templates)?;
        let mut args = vec![head];
        match tail {
            ColExpr::Coalesce(rest) => args.extend(rest),
            other => args.push(other),
        }
        return Ok(ColExpr::Coalesce(args));
    }
    match t {
        RaTerm::Attr(a) => env
            .get(a)
            .cloned()
            .ok_or_else(|| SqlError::MissingAttr(a.clone())),
        RaTerm::Const(v) => Ok(ColExpr::Lit(render_const(v, templates))),
        RaTerm::If(g, a, b) => Ok(ColExpr::Case(
            Box::new(cond_of(g, env, templates)?),
            Box::new(term_of(a, env, templates)?),
            Box::new(term_of(b, env, templates)?),
        )),
        RaTerm::IriTpl(id, args) => {
            let lowered: Result<Vec<ColExpr>, SqlError> =
                args.iter().map(|x| term_of(x, env, templates)).collect();
            Ok(ColExpr::Tpl(id.clone(), lowered?))
        }
    }
}

/// Equality that looks through identical IRI templates: two terms built
/// by the same injective template are equal exactly when their
/// arguments are.
fn eq_of(a: ColExpr, b: ColExpr) -> Cond {
    if let (ColExpr::Tpl(ia, xa), ColExpr::Tpl(ib, xb)) = (&a, &b) {
        if ia == ib && xa.len() == xb.len() {
            let parts: Vec<Cond> = xa
                .iter()
                .zip(xb.iter())
                .map(|(x, y)| eq_of(x.clone(), y.clone()))
                .collect();
            return if parts.len() == 1 {
                parts.into_iter().next().unwrap()
            } else {
                Cond::And(parts)
            };
        }
    }
    Cond::Eq(a, b)
}

fn cond_of(
    f: &RaFilter,
    env: &Env,
    templates: &BTreeMap<String, IriTemplate>,
) -> Result<Cond, SqlError> {
    if *f == RaFilter::fals() {
        return Ok(Cond::False);
    }
    let ds = f.disjuncts();
    if ds.len() > 1 {
        let parts: Result<Vec<Cond>, SqlError> =
            ds.iter().map(|d| cond_of(d, env, templates)).collect();
        return Ok(Cond::Or(parts?));
    }
    match f {
        RaFilter::True => Ok(Cond::True),
        RaFilter::IsNull(ts) => {
            let lowered: Result<Vec<ColExpr>, SqlError> =
                ts.iter().map(|t| term_of(t, env, templates)).collect();
            Ok(Cond::AllNull(lowered?))
        }
        RaFilter::Eq(a, b) => Ok(eq_of(
            term_of(a, env, templates)?,
            term_of(b, env, templates)?,
        )),
        RaFilter::And(a, b) => {
            let mut parts = Vec::new();
            for part in [cond_of(a, env, templates)?, cond_of(b, env, templates)?] {
                match part {
                    Cond::True => {}
                    Cond::And(inner) => parts.extend(inner),
                    other => parts.push(other),
                }
            }
            Ok(match parts.len() {
                0 => Cond::True,
                1 => parts.into_iter().next().unwrap(),
                _ => Cond::And(parts),
            })
        }
        RaFilter::Not(inner) => match &**inner {
            RaFilter::IsNull(ts) if ts.len() == 1 => {
                Ok(Cond::NotNull(term_of(&ts[0], env, templates)?))
            }
            other => Ok(Cond::Not(Box::new(cond_of(other, env, templates)?))),
        },
    }
}

// ---- rendering -----------------------------------------------------------

fn plain_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().unwrap().is_ascii_alphabetic()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn ident(s: &str) -> String {
    if plain_ident(s) {
        s.to_string()
    } else {
        format!("\"{}\"", s.replace('"', "\"\""))
    }
}

fn quote_str(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn render_const(v: &DbValue, templates: &BTreeMap<String, IriTemplate>) -> String {
    match v {
        DbValue::Null => "NULL".to_string(),
        DbValue::Int(i) => i.to_string(),
        DbValue::Text(s) => quote_str(s),
        DbValue::Iri(tpl, args) => {
            if tpl == TPL_OPAQUE_IRI {
                if let [DbValue::Text(s)] = args.as_slice() {
                    return quote_str(s);
                }
            }
            if let Some(t) = templates.get(tpl) {
                let mut s = t.prefix.clone();
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        s.push_str(t.separators.get(i - 1).map(String::as_str).unwrap_or("/"));
                    }
                    s.push_str(&scalar_text(a, templates));
                }
                return quote_str(&s);
            }
            quote_str(&render_structured_iri(tpl, args))
        }
    }
}

fn scalar_text(v: &DbValue, templates: &BTreeMap<String, IriTemplate>) -> String {
    match v {
        DbValue::Null => "NULL".to_string(),
        DbValue::Int(i) => i.to_string(),
        DbValue::Text(s) => s.clone(),
        DbValue::Iri(..) => render_const(v, templates).trim_matches('\'').to_string(),
    }
}

fn render_col(c: &ColExpr, qualify: bool, templates: &BTreeMap<String, IriTemplate>) -> String {
    match c {
        ColExpr::Col(alias, a) => {
            if qualify {
                format!("{alias}.{}", ident(a))
            } else {
                ident(a)
            }
        }
        ColExpr::Lit(s) => s.clone(),
        ColExpr::Tpl(id, args) => {
            let (prefix, seps) = match templates.get(id) {
                Some(t) => (t.prefix.clone(), t.separators.clone()),
                None => (
                    format!("iri:{id}:"),
                    vec!["|".to_string(); args.len().saturating_sub(1)],
                ),
            };
            let mut parts = vec![quote_str(&prefix)];
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    parts.push(quote_str(
                        seps.get(i - 1).map(String::as_str).unwrap_or("/"),
                    ));
                }
                parts.push(render_col(a, qualify, templates));
            }
            format!("CONCAT({})", parts.join(", "))
        }
        ColExpr::Coalesce(args) => {
            let parts: Vec<String> = args
                .iter()
                .map(|a| render_col(a, qualify, templates))
                .collect();
            format!("COALESCE({})", parts.join(", "))
        }
        ColExpr::Case(c, a, b) => format!(
            "CASE WHEN {} THEN {} ELSE {} END",
            render_cond(c, qualify, templates),
            render_col(a, qualify, templates),
            render_col(b, qualify, templates)
        ),
    }
}

/// Null test of a structured expression: a template value is null
/// exactly when one of its arguments is.
fn render_isnull(c: &ColExpr, qualify: bool, templates: &BTreeMap<String, IriTemplate>) -> String {
    match c {
        ColExpr::Tpl(_, args) => {
            let parts: Vec<String> = args
                .iter()
                .map(|a| render_isnull(a, qualify, templates))
                .collect();
            if parts.len() == 1 {
                parts.into_iter().next().unwrap()
            } else {
                format!("({})", parts.join(" OR "))
            }
        }
        _ => format!("{} IS NULL", render_col(c, qualify, templates)),
    }
}

fn render_notnull(c: &ColExpr, qualify: bool, templates: &BTreeMap<String, IriTemplate>) -> String {
    match c {
        ColExpr::Tpl(_, args) => {
            let parts: Vec<String> = args
                .iter()
                .map(|a| render_notnull(a, qualify, templates))
                .collect();
            if parts.len() == 1 {
                parts.into_iter().next().unwrap()
            } else {
                format!("({})", parts.join(" AND "))
            }
        }
        _ => format!("{} IS NOT NULL", render_col(c, qualify, templates)),
    }
}

fn render_cond(c: &Cond, qualify: bool, templates: &BTreeMap<String, IriTemplate>) -> String {
    match c {
        Cond::True => "1=1".to_string(),
        Cond::False => "1=0".to_string(),
        Cond::AllNull(ts) => {
            let parts: Vec<String> = ts
                .iter()
                .map(|t| render_isnull(t, qualify, templates))
                .collect();
            if parts.len() == 1 {
                parts.into_iter().next().unwrap()
            } else {
                format!("({})", parts.join(" AND "))
            }
        }
        Cond::NotNull(t) => render_notnull(t, qualify, templates),
        Cond::Eq(a, b) => format!(
            "{} = {}",
            render_col(a, qualify, templates),
            render_col(b, qualify, templates)
        ),
        Cond::And(parts) => {
            let rs: Vec<String> = parts
                .iter()
                .map(|p| match p {
                    Cond::Or(_) => format!("({})", render_cond(p, qualify, templates)),
                    _ => render_cond(p, qualify, templates),
                })
                .collect();
            rs.join(" AND ")
        }
        Cond::Or(parts) => {
            let rs: Vec<String> = parts
                .iter()
                .map(|p| render_cond(p, qualify, templates))
                .collect();
            format!("({})", rs.join(" OR "))
        }
        Cond::Not(inner) => format!("NOT ({})", render_cond(inner, qualify, templates)),
    }
}

fn render_conj(cs: &[Cond], qualify: bool, templates: &BTreeMap<String, IriTemplate>) -> String {
    let merged = if cs.len() == 1 {
        cs[0].clone()
    } else {
        Cond::And(cs.to_vec())
    };
    render_cond(&merged, qualify, templates)
}
