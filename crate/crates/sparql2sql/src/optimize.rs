//! Rewrite engine: a catalog of equivalence-preserving rules over the
//! relational algebra, driven by schema constraints (non-nullability,
//! unique keys, foreign keys) and by provenance of scans. Rules fire in
//! phases until a fixpoint or a round limit.

use std::collections::BTreeMap;

use crate::mapping::SchemaCatalog;
use crate::ra::{attrs, never_true, Attr, AttrSet, DbValue, RaExpr, RaFilter, RaTerm, UNIT_REL};
use crate::sparql::{is_well_designed, GraphPattern};

/// Where the rows of a subexpression come from: a single base relation,
/// a set of filter conjuncts over its attributes, and for every output
/// attribute the defining term over base attributes. Exact, not an
/// over-approximation: the rows are precisely the image of the filtered
/// scan under the lineage terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prov {
    pub base: String,
    pub conj: Vec<RaFilter>,
    pub lineage: BTreeMap<Attr, RaTerm>,
}

/// Static facts about a subexpression used as rule side conditions.
#[derive(Debug, Clone, Default)]
pub struct Props {
    pub attrs: AttrSet,
    pub non_null: AttrSet,
    pub keys: Vec<AttrSet>,
    pub prov: Option<Prov>,
}

fn dedup_push(keys: &mut Vec<AttrSet>, k: AttrSet) {
    if keys.len() < 8 && !keys.iter().any(|e| e.is_subset(&k)) {
        keys.retain(|e| !k.is_subset(e));
        keys.push(k);
    }
}

fn term_never_null(t: &RaTerm) -> bool {
    match t {
        RaTerm::Const(c) => !c.is_null(),
        RaTerm::IriTpl(_, args) => args.iter().all(term_never_null),
        _ => false,
    }
}

/// Attributes a filter forces to be non-null on every tuple it accepts.
fn forced_nonnull(f: &RaFilter) -> AttrSet {
    let mut out = AttrSet::new();
    for c in f.conjuncts() {
        match c {
            RaFilter::Eq(a, b) => {
                mark_null_attrs(a, &mut out);
                mark_null_attrs(b, &mut out);
            }
            RaFilter::Not(inner) => {
                if let RaFilter::IsNull(ts) = inner.as_ref() {
                    if ts.len() == 1 {
                        mark_null_attrs(&ts[0], &mut out);
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Attributes whose nullness decides the nullness of the term: the term
/// is null as soon as any of them is. Templates collapse to null on any
/// null argument, so they descend.
fn mark_null_attrs(t: &RaTerm, out: &mut AttrSet) {
    match t {
        RaTerm::Attr(a) => {
            out.insert(a.clone());
        }
        RaTerm::IriTpl(_, args) => {
            for a in args {
                mark_null_attrs(a, out);
            }
        }
        _ => {}
    }
}

/// Whether the term is non-null on every tuple whose attributes in `nn`
/// are non-null.
pub fn term_forced_nonnull(t: &RaTerm, nn: &AttrSet) -> bool {
    match t {
        RaTerm::Const(c) => !c.is_null(),
        RaTerm::Attr(a) => nn.contains(a),
        RaTerm::IriTpl(_, args) => args.iter().all(|a| term_forced_nonnull(a, nn)),
        RaTerm::If(_, v, w) => {
            if let Some((v, w)) = t.as_coalesce() {
                return term_forced_nonnull(v, nn) || term_forced_nonnull(w, nn);
            }
            term_forced_nonnull(v, nn) && term_forced_nonnull(w, nn)
        }
    }
}

fn expr_attrs(e: &RaExpr, catalog: &SchemaCatalog) -> AttrSet {
    attrs(e, catalog).unwrap_or_default()
}

/// Joinable attribute pairs (left attr, right attr): the shared natural
/// attributes plus equality conjuncts of the condition that bridge the
/// two sides.
fn join_links(ua: &AttrSet, ub: &AttrSet, f: &RaFilter) -> Vec<(Attr, Attr)> {
    let mut out: Vec<(Attr, Attr)> = ua
        .intersection(ub)
        .map(|s| (s.clone(), s.clone()))
        .collect();
    for c in f.conjuncts() {
        if let RaFilter::Eq(RaTerm::Attr(x), RaTerm::Attr(y)) = c {
            if ua.contains(x) && !ub.contains(x) && ub.contains(y) && !ua.contains(y) {
                out.push((x.clone(), y.clone()));
            } else if ua.contains(y) && !ub.contains(y) && ub.contains(x) && !ua.contains(x) {
                out.push((y.clone(), x.clone()));
            }
        }
    }
    out
}

pub fn covers_key(p: &Props, over: &AttrSet) -> bool {
    p.keys.iter().any(|k| k.is_subset(over))
}

/// Each left tuple joins with at most one right tuple: the right ends of
/// the links cover a unique key of the right side.
pub fn at_most_one_match(right: &Props, links: &[(Attr, Attr)]) -> bool {
    let over: AttrSet = links.iter().map(|(_, y)| y.clone()).collect();
    covers_key(right, &over)
}

fn conj_contains(haystack: &[RaFilter], needle: &RaFilter) -> bool {
    haystack.iter().any(|c| c == needle)
}

fn pinned_nonnull(a: &Attr, conj: &[RaFilter], base: &str, catalog: &SchemaCatalog) -> bool {
    if let Some(schema) = catalog.relations.get(base) {
        if schema.non_nullable.contains(a) {
            return true;
        }
    }
    conj_contains(
        conj,
        &RaFilter::not(RaFilter::is_null(vec![RaTerm::attr(a.clone())])),
    )
}

/// Every left tuple has at least one joining right tuple. Certified
/// either by shared provenance (same base scan, right filter weaker) or
/// by a foreign key from the left base into the right base.
pub fn inclusion(
    pa: &Props,
    pb: &Props,
    links: &[(Attr, Attr)],
    catalog: &SchemaCatalog,
) -> bool {
    let (Some(la), Some(lb)) = (&pa.prov, &pb.prov) else {
        return false;
    };
    if la.base == lb.base {
        let aligned = links.iter().all(|(x, y)| {
            matches!((la.lineage.get(x), lb.lineage.get(y)), (Some(tx), Some(ty)) if tx == ty)
        });
        return aligned && lb.conj.iter().all(|c| conj_contains(&la.conj, c));
    }
    for fk in &catalog.foreign_keys {
        if fk.child_rel != la.base || fk.parent_rel != lb.base {
            continue;
        }
        let child_set: AttrSet = fk.child_attrs.iter().cloned().collect();
        let to_parent: BTreeMap<Attr, RaTerm> = fk
            .child_attrs
            .iter()
            .zip(&fk.parent_attrs)
            .map(|(c, p)| (c.clone(), RaTerm::attr(p.clone())))
            .collect();
        let aligned = links.iter().all(|(x, y)| {
            match (la.lineage.get(x), lb.lineage.get(y)) {
                (Some(tx), Some(ty)) => {
                    tx.attrs().is_subset(&child_set) && &tx.substitute(&to_parent) == ty
                }
                _ => false,
            }
        });
        if !aligned {
            continue;
        }
        // the referencing attributes must be non-null, otherwise the fk
        // does not promise a parent row
        if !fk
            .child_attrs
            .iter()
            .all(|c| pinned_nonnull(c, &la.conj, &la.base, catalog))
        {
            continue;
        }
        // the parent scan may only filter on facts the fk already
        // guarantees for the referenced row
        let parent_nn = catalog
            .relations
            .get(&lb.base)
            .map(|s| s.non_nullable.clone())
            .unwrap_or_default();
        let guaranteed = |c: &RaFilter| {
            let RaFilter::Not(inner) = c else { return false };
            let RaFilter::IsNull(ts) = inner.as_ref() else {
                return false;
            };
            ts.len() == 1
                && matches!(&ts[0], RaTerm::Attr(p)
                    if fk.parent_attrs.contains(p) || parent_nn.contains(p))
        };
        if lb.conj.iter().all(guaranteed) {
            return true;
        }
    }
    false
}

/// Base attributes a link term pins down injectively: equal term values
/// imply equal values for these attributes. None when the term is not
/// injective in its attributes.
fn injective_base_attrs(t: &RaTerm) -> Option<AttrSet> {
    match t {
        RaTerm::Attr(a) => Some([a.clone()].into_iter().collect()),
        RaTerm::Const(_) => Some(AttrSet::new()),
        RaTerm::IriTpl(_, args) => {
            let mut out = AttrSet::new();
            for a in args {
                let RaTerm::Attr(k) = a else { return None };
                out.insert(k.clone());
            }
            Some(out)
        }
        RaTerm::If(..) => None,
    }
}

/// When two scans of the same base relation join on attributes that pin
/// down a unique key, every row pairs with itself only; the join is then
/// a single scan. Returns the merged provenance.
fn try_scan_merge(
    pa: &Props,
    pb: &Props,
    links: &[(Attr, Attr)],
    residual: &RaFilter,
    catalog: &SchemaCatalog,
) -> Option<Prov> {
    let (la, lb) = (pa.prov.as_ref()?, pb.prov.as_ref()?);
    if la.base != lb.base {
        return None;
    }
    let schema = catalog.relations.get(&la.base)?;
    let mut pinned = AttrSet::new();
    for (x, y) in links {
        let tx = la.lineage.get(x)?;
        let ty = lb.lineage.get(y)?;
        if tx != ty {
            return None;
        }
        pinned.extend(injective_base_attrs(tx)?);
    }
    if !schema.unique_keys.iter().any(|k| k.is_subset(&pinned)) {
        return None;
    }
    // the join drops null link values, so merging is only exact when the
    // pinned attributes cannot be null on either side
    let combined = la.base_conj_union(lb);
    for (x, y) in links {
        let ok = la.lineage[x]
            .attrs()
            .iter()
            .chain(lb.lineage[y].attrs().iter())
            .all(|a| pinned_nonnull(a, &combined, &la.base, catalog));
        if !ok {
            return None;
        }
    }
    let mut lineage = la.lineage.clone();
    for (o, t) in &lb.lineage {
        match lineage.get(o) {
            Some(prev) if prev != t => return None,
            _ => {
                lineage.insert(o.clone(), t.clone());
            }
        }
    }
    let mut conj = la.conj.clone();
    for c in &lb.conj {
        if !conj_contains(&conj, c) {
            conj.push(c.clone());
        }
    }
    let as_terms: BTreeMap<Attr, RaTerm> = lineage.clone();
    for c in residual.conjuncts() {
        if !c.attrs().iter().all(|a| as_terms.contains_key(a)) {
            return None;
        }
        let sub = c.substitute(&as_terms);
        if !conj_contains(&conj, &sub) {
            conj.push(sub);
        }
    }
    Some(Prov {
        base: la.base.clone(),
        conj,
        lineage,
    })
}

impl Prov {
    fn base_conj_union(&self, other: &Prov) -> Vec<RaFilter> {
        let mut out = self.conj.clone();
        for c in &other.conj {
            if !conj_contains(&out, c) {
                out.push(c.clone());
            }
        }
        out
    }
}

/// Derives non-nullability, unique keys and provenance bottom-up.
pub fn derive_props(e: &RaExpr, catalog: &SchemaCatalog) -> Props {
    match e {
        RaExpr::Base(rel) if rel == UNIT_REL => Props {
            attrs: AttrSet::new(),
            non_null: AttrSet::new(),
            keys: vec![AttrSet::new()],
            prov: Some(Prov {
                base: UNIT_REL.to_string(),
                conj: vec![],
                lineage: BTreeMap::new(),
            }),
        },
        RaExpr::Base(rel) => {
            let Some(schema) = catalog.relations.get(rel) else {
                return Props::default();
            };
            let attrs: AttrSet = schema.attrs.iter().cloned().collect();
            Props {
                non_null: schema.non_nullable.clone(),
                keys: schema.unique_keys.clone(),
                prov: Some(Prov {
                    base: rel.clone(),
                    conj: vec![],
                    lineage: attrs
                        .iter()
                        .map(|a| (a.clone(), RaTerm::attr(a.clone())))
                        .collect(),
                }),
                attrs,
            }
        }
        RaExpr::Select(x, f) => {
            let mut p = derive_props(x, catalog);
            p.non_null.extend(forced_nonnull(f));
            p.prov = p.prov.take().and_then(|mut prov| {
                for c in f.conjuncts() {
                    if !c.attrs().iter().all(|a| prov.lineage.contains_key(a)) {
                        return None;
                    }
                    let sub = c.substitute(&prov.lineage);
                    if !conj_contains(&prov.conj, &sub) {
                        prov.conj.push(sub);
                    }
                }
                Some(prov)
            });
            p
        }
        RaExpr::Project(x, u) => {
            let p = derive_props(x, catalog);
            Props {
                attrs: u.clone(),
                non_null: p.non_null.intersection(u).cloned().collect(),
                keys: p.keys.into_iter().filter(|k| k.is_subset(u)).collect(),
                prov: p.prov.map(|mut prov| {
                    prov.lineage.retain(|a, _| u.contains(a));
                    prov
                }),
            }
        }
        RaExpr::ExtProject(x, assigns) => {
            let p = derive_props(x, catalog);
            let out_attrs: AttrSet = assigns.iter().map(|(o, _)| o.clone()).collect();
            let non_null = assigns
                .iter()
                .filter(|(_, t)| term_forced_nonnull(t, &p.non_null))
                .map(|(o, _)| o.clone())
                .collect();
            // a key survives when every key attribute is carried by some
            // output injectively
            let carrier: BTreeMap<Attr, Attr> = assigns
                .iter()
                .filter_map(|(o, t)| match t {
                    RaTerm::Attr(k) => Some((k.clone(), o.clone())),
                    RaTerm::IriTpl(_, args) => match args.as_slice() {
                        [RaTerm::Attr(k)] => Some((k.clone(), o.clone())),
                        _ => None,
                    },
                    _ => None,
                })
                .collect();
            let mut keys = Vec::new();
            for k in &p.keys {
                if k.iter().all(|a| carrier.contains_key(a)) {
                    dedup_push(&mut keys, k.iter().map(|a| carrier[a].clone()).collect());
                }
            }
            let prov = p.prov.as_ref().and_then(|prov| {
                let mut lineage = BTreeMap::new();
                for (o, t) in assigns {
                    if !t.attrs().iter().all(|a| prov.lineage.contains_key(a)) {
                        return None;
                    }
                    lineage.insert(o.clone(), t.substitute(&prov.lineage));
                }
                Some(Prov {
                    base: prov.base.clone(),
                    conj: prov.conj.clone(),
                    lineage,
                })
            });
            Props {
                attrs: out_attrs,
                non_null,
                keys,
                prov,
            }
        }
        RaExpr::Rename(x, from, to) => {
            let p = derive_props(x, catalog);
            let map = |a: &Attr| if a == from { to.clone() } else { a.clone() };
            Props {
                attrs: p.attrs.iter().map(&map).collect(),
                non_null: p.non_null.iter().map(&map).collect(),
                keys: p
                    .keys
                    .iter()
                    .map(|k| k.iter().map(&map).collect())
                    .collect(),
                prov: p.prov.map(|prov| Prov {
                    base: prov.base,
                    conj: prov.conj,
                    lineage: prov
                        .lineage
                        .into_iter()
                        .map(|(a, t)| (map(&a), t))
                        .collect(),
                }),
            }
        }
        RaExpr::Extend(x, n, t) => {
            let mut p = derive_props(x, catalog);
            p.attrs.insert(n.clone());
            if term_forced_nonnull(t, &p.non_null) {
                p.non_null.insert(n.clone());
            }
            p.prov = p.prov.take().and_then(|mut prov| {
                if !t.attrs().iter().all(|a| prov.lineage.contains_key(a)) {
                    return None;
                }
                let sub = t.substitute(&prov.lineage);
                prov.lineage.insert(n.clone(), sub);
                Some(prov)
            });
            p
        }
        RaExpr::Pad(x, u) => {
            let mut p = derive_props(x, catalog);
            for a in u {
                p.attrs.insert(a.clone());
                if let Some(prov) = &mut p.prov {
                    prov.lineage.insert(a.clone(), RaTerm::null());
                }
            }
            p
        }
        RaExpr::Distinct(x) => {
            let mut p = derive_props(x, catalog);
            dedup_push(&mut p.keys, p.attrs.clone());
            p
        }
        RaExpr::NatJoin(a, b) | RaExpr::JoinF(a, b, _) => {
            let f = match e {
                RaExpr::JoinF(_, _, f) => f.clone(),
                _ => RaFilter::True,
            };
            let pa = derive_props(a, catalog);
            let pb = derive_props(b, catalog);
            let shared: AttrSet = pa.attrs.intersection(&pb.attrs).cloned().collect();
            let links = join_links(&pa.attrs, &pb.attrs, &f);
            let mut non_null: AttrSet = pa.non_null.union(&pb.non_null).cloned().collect();
            non_null.extend(shared.iter().cloned());
            non_null.extend(forced_nonnull(&f));
            let mut keys = Vec::new();
            let right_link: AttrSet = links.iter().map(|(_, y)| y.clone()).collect();
            let left_link: AttrSet = links.iter().map(|(x, _)| x.clone()).collect();
            if covers_key(&pb, &right_link) {
                for k in &pa.keys {
                    dedup_push(&mut keys, k.clone());
                }
            }
            if covers_key(&pa, &left_link) {
                for k in &pb.keys {
                    dedup_push(&mut keys, k.clone());
                }
            }
            for ka in pa.keys.iter().take(2) {
                for kb in pb.keys.iter().take(2) {
                    dedup_push(&mut keys, ka.union(kb).cloned().collect());
                }
            }
            let prov = try_scan_merge(&pa, &pb, &links, &f, catalog);
            Props {
                attrs: pa.attrs.union(&pb.attrs).cloned().collect(),
                non_null,
                keys,
                prov,
            }
        }
        RaExpr::LeftJoinF(a, b, _) => {
            let pa = derive_props(a, catalog);
            let pb = derive_props(b, catalog);
            let shared: AttrSet = pa.attrs.intersection(&pb.attrs).cloned().collect();
            let keys = if covers_key(&pb, &shared) {
                pa.keys.clone()
            } else {
                Vec::new()
            };
            Props {
                attrs: pa.attrs.union(&pb.attrs).cloned().collect(),
                non_null: pa.non_null,
                keys,
                prov: None,
            }
        }
        RaExpr::Union(a, b) => {
            let pa = derive_props(a, catalog);
            let pb = derive_props(b, catalog);
            Props {
                attrs: pa.attrs.clone(),
                non_null: pa.non_null.intersection(&pb.non_null).cloned().collect(),
                keys: Vec::new(),
                prov: None,
            }
        }
        RaExpr::OuterUnion(a, b) => {
            let pa = derive_props(a, catalog);
            let pb = derive_props(b, catalog);
            let shared: AttrSet = pa.attrs.intersection(&pb.attrs).cloned().collect();
            Props {
                attrs: pa.attrs.union(&pb.attrs).cloned().collect(),
                non_null: pa
                    .non_null
                    .intersection(&pb.non_null)
                    .filter(|a| shared.contains(*a))
                    .cloned()
                    .collect(),
                keys: Vec::new(),
                prov: None,
            }
        }
        RaExpr::Diff(a, _) => {
            let mut p = derive_props(a, catalog);
            p.prov = None;
            p
        }
    }
}

fn nn_facts(nn: &AttrSet) -> Vec<RaFilter> {
    nn.iter()
        .map(|a| RaFilter::not(RaFilter::is_null(vec![RaTerm::attr(a.clone())])))
        .collect()
}

/// Whether a term participates in some equality conjunct, which forces it
/// non-null whenever the conjunction holds.
fn in_equality(t: &RaTerm, conjuncts: &[RaFilter]) -> bool {
    conjuncts.iter().any(|c| match c {
        RaFilter::Eq(a, b) => {
            covers_term(a, t) || covers_term(b, t)
        }
        _ => false,
    })
}

/// Whether nullness of `part` forces nullness of `whole`.
fn covers_term(whole: &RaTerm, part: &RaTerm) -> bool {
    if whole == part {
        return true;
    }
    match whole {
        RaTerm::IriTpl(_, args) => args.iter().any(|a| covers_term(a, part)),
        _ => false,
    }
}

/// One conjunct logically implied by another: every disjunct of the
/// stronger one appears among the disjuncts of the weaker.
fn implies_conjunct(stronger: &RaFilter, weaker: &RaFilter) -> bool {
    let wd = weaker.disjuncts();
    stronger.disjuncts().iter().all(|d| wd.contains(d))
}

/// Truth-preserving simplification of a condition under known non-null
/// attributes: removes disjuncts that contradict the remaining conjuncts,
/// drops implied conjuncts and collapses to false when the whole
/// conjunction cannot hold.
fn term_always_null(t: &RaTerm) -> bool {
    match t {
        RaTerm::Const(c) => c.is_null(),
        RaTerm::IriTpl(_, args) => args.iter().any(term_always_null),
        _ => false,
    }
}

/// Filters that hold on every tuple regardless of its values.
fn trivially_true(c: &RaFilter) -> bool {
    match c {
        RaFilter::True => true,
        RaFilter::Eq(a, b) => a == b && term_never_null(a),
        RaFilter::IsNull(ts) => ts.iter().all(term_always_null),
        RaFilter::Not(inner) => match inner.as_ref() {
            RaFilter::IsNull(ts) => ts.len() == 1 && term_never_null(&ts[0]),
            RaFilter::Not(g) => trivially_true(g),
            _ => false,
        },
        _ => false,
    }
}

/// Simplifies the terms a filter embeds, leaving its shape alone.
fn simplify_filter_terms(f: &RaFilter, nn: &AttrSet) -> RaFilter {
    match f {
        RaFilter::True => RaFilter::True,
        RaFilter::IsNull(ts) => {
            RaFilter::is_null(ts.iter().map(|t| simplify_term(t, nn)).collect())
        }
        RaFilter::Eq(a, b) => RaFilter::Eq(simplify_term(a, nn), simplify_term(b, nn)),
        RaFilter::And(a, b) => RaFilter::And(
            Box::new(simplify_filter_terms(a, nn)),
            Box::new(simplify_filter_terms(b, nn)),
        ),
        RaFilter::Not(a) => RaFilter::Not(Box::new(simplify_filter_terms(a, nn))),
    }
}

pub fn simplify_cond(f: &RaFilter, nn: &AttrSet) -> RaFilter {
    let facts = nn_facts(nn);
    let mut parts: Vec<RaFilter> = f
        .conjuncts()
        .into_iter()
        .map(|c| simplify_filter_terms(c, nn))
        .collect();
    if parts.iter().any(|c| c == &RaFilter::fals()) {
        return RaFilter::fals();
    }
    for _ in 0..8 {
        let mut changed = false;
        // prune disjuncts that cannot hold together with the rest
        for i in 0..parts.len() {
            let ds = parts[i].disjuncts();
            if ds.iter().any(trivially_true) {
                if parts[i] != RaFilter::True {
                    parts[i] = RaFilter::True;
                    changed = true;
                }
                continue;
            }
            if ds.len() < 2 {
                continue;
            }
            let rest: Vec<RaFilter> = parts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, c)| c.clone())
                .chain(facts.iter().cloned())
                .collect();
            let kept: Vec<RaFilter> = ds
                .iter()
                .filter(|d| {
                    let mut probe = rest.clone();
                    probe.push((*d).clone());
                    !never_true(&RaFilter::conj(probe))
                })
                .cloned()
                .collect();
            if kept.len() < ds.len() {
                parts[i] = RaFilter::disj(kept);
                changed = true;
            }
        }
        // drop conjuncts the others already imply
        let snapshot = parts.clone();
        let mut out: Vec<RaFilter> = Vec::new();
        for (i, c) in snapshot.iter().enumerate() {
            if c == &RaFilter::True {
                changed = true;
                continue;
            }
            if out.contains(c) {
                changed = true;
                continue;
            }
            if let RaFilter::Not(inner) = c {
                if let RaFilter::IsNull(ts) = inner.as_ref() {
                    if ts.len() == 1 {
                        let others: Vec<RaFilter> = snapshot
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != i)
                            .map(|(_, c)| c.clone())
                            .collect();
                        let t = &ts[0];
                        let forced = term_never_null(t)
                            || t.attrs().iter().all(|a| nn.contains(a)) && !t.attrs().is_empty()
                            || in_equality(t, &others);
                        if forced {
                            changed = true;
                            continue;
                        }
                    }
                }
            }
            let others_imply = snapshot
                .iter()
                .enumerate()
                .any(|(j, other)| j != i && implies_conjunct(other, c));
            if others_imply {
                changed = true;
                continue;
            }
            // a disjunct of c whose own conjuncts all appear at top level
            // makes c redundant
            let witnessed = c.disjuncts().len() > 1
                && c.disjuncts().iter().any(|d| {
                    d.conjuncts()
                        .iter()
                        .all(|dc| snapshot.iter().enumerate().any(|(j, o)| j != i && o == *dc))
                });
            if witnessed {
                changed = true;
                continue;
            }
            out.push(c.clone());
        }
        parts = out;
        if !changed {
            break;
        }
    }
    let mut probe: Vec<RaFilter> = parts.clone();
    probe.extend(facts);
    if never_true(&RaFilter::conj(probe)) {
        return RaFilter::fals();
    }
    RaFilter::conj(parts)
}

/// Simplifies conditional terms: prunes dead branches, collapses trivial
/// coalescing and propagates the nullness knowledge a branch guard gives.
pub fn simplify_term(t: &RaTerm, nn: &AttrSet) -> RaTerm {
    match t {
        RaTerm::If(f, a, b) => {
            let a = simplify_term(a, nn);
            let b = simplify_term(b, nn);
            let mut f = simplify_cond(f, nn);
            if f == RaFilter::fals() {
                return b;
            }
            // if the else branch is null and the guard only adds a
            // non-null check on the then branch, the check is vacuous
            if b == RaTerm::null() {
                if let RaTerm::Attr(v) = &a {
                    let guard = RaFilter::not(RaFilter::is_null(vec![RaTerm::attr(v.clone())]));
                    let kept: Vec<RaFilter> = f
                        .conjuncts()
                        .into_iter()
                        .filter(|c| **c != guard)
                        .cloned()
                        .collect();
                    f = RaFilter::conj(kept);
                }
            }
            if f == RaFilter::True {
                return a;
            }
            if a == b {
                return a;
            }
            // inside the else branch the guarded attribute is known null
            let b = match (f.conjuncts().as_slice(), &f) {
                (&[RaFilter::Not(inner)], _) => {
                    if let RaFilter::IsNull(ts) = inner.as_ref() {
                        if let [RaTerm::Attr(u)] = ts.as_slice() {
                            let sub: BTreeMap<Attr, RaTerm> =
                                [(u.clone(), RaTerm::null())].into_iter().collect();
                            simplify_term(&b.substitute(&sub), nn)
                        } else {
                            b
                        }
                    } else {
                        b
                    }
                }
                _ => b,
            };
            RaTerm::If(Box::new(f), Box::new(a), Box::new(b))
        }
        RaTerm::IriTpl(id, args) => RaTerm::IriTpl(
            id.clone(),
            args.iter().map(|a| simplify_term(a, nn)).collect(),
        ),
        _ => t.clone(),
    }
}

/// Filters that hold on every output tuple of the expression. Used to
/// strengthen outer conditions; in particular a conditional left join
/// leaves behind disjunctive shape facts relating its padded attributes.
pub fn tuple_invariants(e: &RaExpr, catalog: &SchemaCatalog) -> Vec<RaFilter> {
    let mut out: Vec<RaFilter> = Vec::new();
    let push = |out: &mut Vec<RaFilter>, f: RaFilter| {
        if f != RaFilter::True && !out.contains(&f) && out.len() < 48 {
            out.push(f);
        }
    };
    match e {
        RaExpr::Base(rel) => {
            if let Some(schema) = catalog.relations.get(rel) {
                for a in &schema.non_nullable {
                    push(
                        &mut out,
                        RaFilter::not(RaFilter::is_null(vec![RaTerm::attr(a.clone())])),
                    );
                }
            }
        }
        RaExpr::Select(x, f) => {
            out = tuple_invariants(x, catalog);
            for c in f.conjuncts() {
                push(&mut out, c.clone());
            }
        }
        RaExpr::Project(x, u) => {
            out = tuple_invariants(x, catalog)
                .into_iter()
                .filter(|c| c.attrs().is_subset(u))
                .collect();
        }
        RaExpr::ExtProject(x, assigns) => {
            let reverse: BTreeMap<Attr, Attr> = assigns
                .iter()
                .filter_map(|(o, t)| match t {
                    RaTerm::Attr(k) => Some((k.clone(), o.clone())),
                    _ => None,
                })
                .collect();
            for c in tuple_invariants(x, catalog) {
                if c.attrs().iter().all(|a| reverse.contains_key(a)) {
                    let sub: BTreeMap<Attr, RaTerm> = reverse
                        .iter()
                        .map(|(k, o)| (k.clone(), RaTerm::attr(o.clone())))
                        .collect();
                    push(&mut out, c.substitute(&sub));
                }
            }
            let p = derive_props(e, catalog);
            for a in &p.non_null {
                push(
                    &mut out,
                    RaFilter::not(RaFilter::is_null(vec![RaTerm::attr(a.clone())])),
                );
            }
        }
        RaExpr::NatJoin(a, b) | RaExpr::JoinF(a, b, _) => {
            out = tuple_invariants(a, catalog);
            for c in tuple_invariants(b, catalog) {
                push(&mut out, c);
            }
            let ua = expr_attrs(a, catalog);
            let ub = expr_attrs(b, catalog);
            for s in ua.intersection(&ub) {
                push(
                    &mut out,
                    RaFilter::not(RaFilter::is_null(vec![RaTerm::attr(s.clone())])),
                );
            }
            if let RaExpr::JoinF(_, _, f) = e {
                for c in f.conjuncts() {
                    push(&mut out, c.clone());
                }
            }
        }
        RaExpr::LeftJoinF(a, b, f) => {
            out = tuple_invariants(a, catalog);
            let ua = expr_attrs(a, catalog);
            let bonly: AttrSet = expr_attrs(b, catalog)
                .difference(&ua)
                .cloned()
                .collect();
            // a condition conjunct over a padded attribute holds on every
            // matched row; padded rows satisfy the null branch instead
            for c in f.conjuncts() {
                if let RaFilter::Eq(l, r) = c {
                    for (side, _other) in [(l, r), (r, l)] {
                        if let RaTerm::Attr(u) = side {
                            if bonly.contains(u) {
                                push(
                                    &mut out,
                                    RaFilter::or(
                                        RaFilter::is_null(vec![RaTerm::attr(u.clone())]),
                                        c.clone(),
                                    ),
                                );
                            }
                        }
                    }
                }
            }
            // padded attributes that are non-null on the right are null
            // together or non-null together
            let pb = derive_props(b, catalog);
            let ws: Vec<&Attr> = bonly.iter().filter(|u| pb.non_null.contains(*u)).take(4).collect();
            for (i, u) in ws.iter().enumerate() {
                for v in ws.iter().skip(i + 1) {
                    let nnu = RaFilter::not(RaFilter::is_null(vec![RaTerm::attr((*u).clone())]));
                    let nnv = RaFilter::not(RaFilter::is_null(vec![RaTerm::attr((*v).clone())]));
                    push(
                        &mut out,
                        RaFilter::or(
                            RaFilter::and(nnu.clone(), nnv.clone()),
                            RaFilter::and(
                                RaFilter::is_null(vec![RaTerm::attr((*u).clone())]),
                                RaFilter::is_null(vec![RaTerm::attr((*v).clone())]),
                            ),
                        ),
                    );
                }
            }
        }
        RaExpr::Union(a, b) => {
            let ib = tuple_invariants(b, catalog);
            out = tuple_invariants(a, catalog)
                .into_iter()
                .filter(|c| ib.contains(c))
                .collect();
        }
        RaExpr::OuterUnion(a, b) => {
            let ua = expr_attrs(a, catalog);
            let ub = expr_attrs(b, catalog);
            let shared: AttrSet = ua.intersection(&ub).cloned().collect();
            let ib = tuple_invariants(b, catalog);
            out = tuple_invariants(a, catalog)
                .into_iter()
                .filter(|c| ib.contains(c) && c.attrs().is_subset(&shared))
                .collect();
        }
        RaExpr::Pad(x, u) => {
            out = tuple_invariants(x, catalog);
            for a in u {
                push(&mut out, RaFilter::is_null(vec![RaTerm::attr(a.clone())]));
            }
        }
        RaExpr::Distinct(x) | RaExpr::Extend(x, _, _) => {
            out = tuple_invariants(x, catalog);
        }
        RaExpr::Diff(a, _) => {
            out = tuple_invariants(a, catalog);
        }
        RaExpr::Rename(x, from, to) => {
            let sub: BTreeMap<Attr, RaTerm> =
                [(from.clone(), RaTerm::attr(to.clone()))].into_iter().collect();
            out = tuple_invariants(x, catalog)
                .into_iter()
                .map(|c| c.substitute(&sub))
                .collect();
        }
    }
    out
}

/// One rule application: phase and rule identifiers, the path of child
/// indices from the root to the rewritten node, and a short description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteStep {
    pub phase: &'static str,
    pub rule: &'static str,
    pub path: Vec<usize>,
    pub note: String,
}

impl RewriteStep {
    pub fn line(&self) -> String {
        let path = if self.path.is_empty() {
            "root".to_string()
        } else {
            self.path
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(".")
        };
        format!("{}/{} @ {} : {}", self.phase, self.rule, path, self.note)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RewriteTrace {
    pub steps: Vec<RewriteStep>,
}

impl RewriteTrace {
    pub fn lines(&self) -> Vec<String> {
        self.steps.iter().map(RewriteStep::line).collect()
    }
}

#[derive(Debug)]
pub struct Optimized {
    pub expr: RaExpr,
    pub trace: RewriteTrace,
    pub round_limit_hit: bool,
}

struct Cx<'a> {
    catalog: &'a SchemaCatalog,
    wd: bool,
}

impl Cx<'_> {
    fn props(&self, e: &RaExpr) -> Props {
        derive_props(e, self.catalog)
    }

    fn attrs(&self, e: &RaExpr) -> AttrSet {
        expr_attrs(e, self.catalog)
    }
}

type Rule = fn(&RaExpr, &Cx, &AttrSet) -> Option<(RaExpr, &'static str, String)>;

struct PhaseDef {
    name: &'static str,
    rules: &'static [Rule],
    innermost: bool,
}

/// Attributes of the i-th child that ancestors can still observe. Union
/// and distinct operators block pruning entirely: padding and duplicate
/// collapse depend on the full schema.
fn child_needed(e: &RaExpr, i: usize, needed: &AttrSet, cx: &Cx) -> AttrSet {
    match e {
        RaExpr::Project(_, u) => u.clone(),
        RaExpr::ExtProject(_, assigns) => {
            let mut out = AttrSet::new();
            for (_, t) in assigns {
                out.extend(t.attrs());
            }
            out
        }
        RaExpr::Select(_, f) => {
            let mut out = needed.clone();
            out.extend(f.attrs());
            out
        }
        RaExpr::Rename(_, from, to) => {
            let mut out: AttrSet = needed.iter().filter(|a| *a != to).cloned().collect();
            if needed.contains(to) {
                out.insert(from.clone());
            }
            out
        }
        RaExpr::Extend(_, n, t) => {
            let mut out: AttrSet = needed.iter().filter(|a| *a != n).cloned().collect();
            out.extend(t.attrs());
            out
        }
        RaExpr::NatJoin(a, b) | RaExpr::JoinF(a, b, _) | RaExpr::LeftJoinF(a, b, _) => {
            let ua = cx.attrs(a);
            let ub = cx.attrs(b);
            let mut out = needed.clone();
            out.extend(ua.intersection(&ub).cloned());
            if let RaExpr::JoinF(_, _, f) | RaExpr::LeftJoinF(_, _, f) = e {
                out.extend(f.attrs());
            }
            let own = if i == 0 { ua } else { ub };
            out.intersection(&own).cloned().collect()
        }
        RaExpr::Union(a, b) | RaExpr::Diff(a, b) | RaExpr::OuterUnion(a, b) => {
            cx.attrs(if i == 0 { a } else { b })
        }
        RaExpr::Distinct(x) => cx.attrs(x),
        RaExpr::Pad(_, u) => needed.difference(u).cloned().collect(),
        RaExpr::Base(_) => AttrSet::new(),
    }
}

fn replace_child(e: &RaExpr, i: usize, c: RaExpr) -> RaExpr {
    let mut out = e.clone();
    match &mut out {
        RaExpr::Project(x, _)
        | RaExpr::ExtProject(x, _)
        | RaExpr::Select(x, _)
        | RaExpr::Rename(x, _, _)
        | RaExpr::Extend(x, _, _)
        | RaExpr::Distinct(x)
        | RaExpr::Pad(x, _) => **x = c,
        RaExpr::Union(a, b)
        | RaExpr::Diff(a, b)
        | RaExpr::NatJoin(a, b)
        | RaExpr::JoinF(a, b, _)
        | RaExpr::LeftJoinF(a, b, _)
        | RaExpr::OuterUnion(a, b) => {
            if i == 0 {
                **a = c;
            } else {
                **b = c;
            }
        }
        RaExpr::Base(_) => unreachable!("base relations have no children"),
    }
    out
}

/// Applies the first matching rule of the phase, reporting the rewritten
/// tree and the step taken. Outermost phases try the node before its
/// children, innermost phases after.
fn rewrite_once(
    e: &RaExpr,
    cx: &Cx,
    needed: &AttrSet,
    phase: &PhaseDef,
    path: &mut Vec<usize>,
) -> Option<(RaExpr, RewriteStep)> {
    let try_node = |path: &Vec<usize>| -> Option<(RaExpr, RewriteStep)> {
        for rule in phase.rules {
            if let Some((ne, id, note)) = rule(e, cx, needed) {
                return Some((
                    ne,
                    RewriteStep {
                        phase: phase.name,
                        rule: id,
                        path: path.clone(),
                        note,
                    },
                ));
            }
        }
        None
    };
    let try_children = |path: &mut Vec<usize>| -> Option<(RaExpr, RewriteStep)> {
        for (i, child) in e.children().into_iter().enumerate() {
            let cn = child_needed(e, i, needed, cx);
            path.push(i);
            let hit = rewrite_once(child, cx, &cn, phase, path);
            path.pop();
            if let Some((nc, step)) = hit {
                return Some((replace_child(e, i, nc), step));
            }
        }
        None
    };
    if phase.innermost {
        try_children(path).or_else(|| try_node(path))
    } else {
        try_node(path).or_else(|| try_children(path))
    }
}

const MAX_ROUNDS: usize = 10;
const MAX_STEPS_PER_PHASE: usize = 400;

fn run_phase(
    e: &mut RaExpr,
    cx: &Cx,
    needed: &AttrSet,
    phase: &PhaseDef,
    trace: &mut RewriteTrace,
    on_step: &mut dyn FnMut(&RaExpr, &RewriteStep),
) -> usize {
    let mut fired = 0;
    while fired < MAX_STEPS_PER_PHASE {
        let mut path = Vec::new();
        match rewrite_once(e, cx, needed, phase, &mut path) {
            Some((ne, step)) => {
                *e = ne;
                on_step(e, &step);
                trace.steps.push(step);
                fired += 1;
            }
            None => break,
        }
    }
    fired
}

fn phases() -> Vec<PhaseDef> {
    vec![
        PhaseDef {
            name: "pullup",
            rules: &[
                r_select_true,
                r_select_merge,
                r_lift_extproject,
                r_lift_project,
                r_lift_union,
                r_absorb_join,
                r_lj_left,
                r_lj_right,
                r_lift_distinct,
                r_merge_extproject,
                r_merge_project,
                r_identity_elim,
                r_rename_to_extproject,
                r_push_rename_join,
                r_prune,
            ],
            innermost: false,
        },
        PhaseDef {
            name: "simplify",
            rules: &[r_cond, r_dead],
            innermost: true,
        },
        PhaseDef {
            name: "coalesce",
            rules: &[r_coalesce_elim, r_push_isnull],
            innermost: true,
        },
        PhaseDef {
            name: "wd",
            rules: &[r_wd_coalesce, r_wd_drop],
            innermost: false,
        },
        PhaseDef {
            name: "equalities",
            rules: &[r_eq_to_shared, r_one_match_if, r_term_simplify],
            innermost: false,
        },
        PhaseDef {
            name: "tojoin",
            rules: &[r_lj_to_join, r_merge_scan, r_join_elim],
            innermost: false,
        },
        PhaseDef {
            name: "transfer",
            rules: &[r_join_transfer],
            innermost: false,
        },
        PhaseDef {
            name: "decompose",
            rules: &[r_drop_right, r_anti_null, r_split, r_reorder, r_strengthen],
            innermost: false,
        },
    ]
}

/// Runs the full phase schedule to a fixpoint, invoking the callback
/// after every rule application with the tree as rewritten so far.
pub fn optimize_observed(
    e: &RaExpr,
    catalog: &SchemaCatalog,
    pattern: Option<&GraphPattern>,
    mut on_step: impl FnMut(&RaExpr, &RewriteStep),
) -> Optimized {
    let cx = Cx {
        catalog,
        wd: pattern.map(is_well_designed).unwrap_or(false),
    };
    let needed = expr_attrs(e, catalog);
    let mut expr = e.clone();
    let mut trace = RewriteTrace::default();
    let phases = phases();
    let mut round_limit_hit = true;
    for _ in 0..MAX_ROUNDS {
        let mut fired = 0;
        for phase in &phases {
            fired += run_phase(&mut expr, &cx, &needed, phase, &mut trace, &mut on_step);
        }
        if fired == 0 {
            round_limit_hit = false;
            break;
        }
    }
    Optimized {
        expr,
        trace,
        round_limit_hit,
    }
}

pub fn optimize(e: &RaExpr, catalog: &SchemaCatalog, pattern: Option<&GraphPattern>) -> Optimized {
    optimize_observed(e, catalog, pattern, |_, _| {})
}

fn run_single(e: &RaExpr, catalog: &SchemaCatalog, wd: bool, name: &str) -> RaExpr {
    let cx = Cx { catalog, wd };
    let needed = expr_attrs(e, catalog);
    let mut expr = e.clone();
    let mut trace = RewriteTrace::default();
    for phase in phases() {
        if phase.name == name {
            run_phase(&mut expr, &cx, &needed, &phase, &mut trace, &mut |_, _| {});
        }
    }
    expr
}

pub fn rule_filter_pullup(e: &RaExpr, catalog: &SchemaCatalog) -> RaExpr {
    run_single(e, catalog, false, "pullup")
}

pub fn rule_cfr(e: &RaExpr, catalog: &SchemaCatalog) -> RaExpr {
    run_single(e, catalog, false, "simplify")
}

pub fn rule_coalesce_elim(e: &RaExpr, catalog: &SchemaCatalog) -> RaExpr {
    run_single(e, catalog, false, "coalesce")
}

pub fn rule_wd_simplify(p: &GraphPattern, e: &RaExpr, catalog: &SchemaCatalog) -> RaExpr {
    run_single(e, catalog, is_well_designed(p), "wd")
}

pub fn rule_ljn_equalities(e: &RaExpr, catalog: &SchemaCatalog) -> RaExpr {
    run_single(e, catalog, false, "equalities")
}

pub fn rule_ljn_if(e: &RaExpr, catalog: &SchemaCatalog) -> RaExpr {
    run_single(e, catalog, false, "equalities")
}

pub fn rule_nljr(e: &RaExpr, catalog: &SchemaCatalog) -> RaExpr {
    run_single(e, catalog, false, "tojoin")
}

pub fn rule_join_transfer(e: &RaExpr, catalog: &SchemaCatalog) -> RaExpr {
    run_single(e, catalog, false, "transfer")
}

pub fn rule_ljd(e: &RaExpr, catalog: &SchemaCatalog) -> RaExpr {
    run_single(e, catalog, false, "decompose")
}

fn nn_guard(a: &Attr) -> RaFilter {
    RaFilter::not(RaFilter::is_null(vec![RaTerm::attr(a.clone())]))
}

fn owned_conjuncts(f: &RaFilter) -> Vec<RaFilter> {
    f.conjuncts().into_iter().cloned().collect()
}

fn attr_term_subst(pairs: &BTreeMap<Attr, Attr>) -> BTreeMap<Attr, RaTerm> {
    pairs
        .iter()
        .map(|(k, v)| (k.clone(), RaTerm::attr(v.clone())))
        .collect()
}

/// Renames output attributes of an expression. Folds into an existing
/// generalised projection when there is one, otherwise wraps one.
fn rename_out(e: &RaExpr, map: &BTreeMap<Attr, Attr>, cx: &Cx) -> RaExpr {
    let ua = cx.attrs(e);
    let effective: BTreeMap<Attr, Attr> = map
        .iter()
        .filter(|(k, v)| ua.contains(*k) && k != v)
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if effective.is_empty() {
        return e.clone();
    }
    if let RaExpr::ExtProject(x, assigns) = e {
        let mut out: Vec<(Attr, RaTerm)> = assigns
            .iter()
            .map(|(o, t)| (effective.get(o).cloned().unwrap_or_else(|| o.clone()), t.clone()))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        return RaExpr::ExtProject(x.clone(), out);
    }
    let assigns: Vec<(Attr, RaTerm)> = ua
        .iter()
        .map(|u| {
            (
                effective.get(u).cloned().unwrap_or_else(|| u.clone()),
                RaTerm::attr(u.clone()),
            )
        })
        .collect();
    RaExpr::ext_project(e.clone(), assigns)
}

type Fired = Option<(RaExpr, &'static str, String)>;

fn r_select_true(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::Select(x, RaFilter::True) = e else {
        return None;
    };
    Some((
        (**x).clone(),
        "select-true",
        "dropped a vacuous filter".into(),
    ))
}

fn r_select_merge(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::Select(inner, f2) = e else {
        return None;
    };
    let RaExpr::Select(x, f1) = inner.as_ref() else {
        return None;
    };
    Some((
        RaExpr::select((**x).clone(), RaFilter::and(f1.clone(), f2.clone())),
        "select-merge",
        "merged adjacent filters".into(),
    ))
}

fn r_lift_extproject(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::ExtProject(inner, assigns) = e else {
        return None;
    };
    let RaExpr::Select(x, f) = inner.as_ref() else {
        return None;
    };
    let mut direct: BTreeMap<Attr, Attr> = BTreeMap::new();
    let mut unary: BTreeMap<Attr, Attr> = BTreeMap::new();
    for (o, t) in assigns {
        match t {
            RaTerm::Attr(k) => {
                direct.entry(k.clone()).or_insert_with(|| o.clone());
            }
            RaTerm::IriTpl(_, args) => {
                if let [RaTerm::Attr(k)] = args.as_slice() {
                    unary.entry(k.clone()).or_insert_with(|| o.clone());
                }
            }
            _ => {}
        }
    }
    let rename = attr_term_subst(&direct);
    let mut lifted = Vec::new();
    let mut residue = Vec::new();
    for c in f.conjuncts() {
        if c.attrs().iter().all(|a| direct.contains_key(a)) {
            lifted.push(c.substitute(&rename));
            continue;
        }
        // a unary template value is null exactly when its argument is
        let single_arg = |c: &RaFilter| -> Option<(bool, Attr)> {
            match c {
                RaFilter::IsNull(ts) => match ts.as_slice() {
                    [RaTerm::Attr(k)] => Some((false, k.clone())),
                    _ => None,
                },
                RaFilter::Not(inner) => match inner.as_ref() {
                    RaFilter::IsNull(ts) => match ts.as_slice() {
                        [RaTerm::Attr(k)] => Some((true, k.clone())),
                        _ => None,
                    },
                    _ => None,
                },
                _ => None,
            }
        };
        if let Some((positive, k)) = single_arg(c) {
            if let Some(o) = unary.get(&k) {
                let g = RaFilter::is_null(vec![RaTerm::attr(o.clone())]);
                lifted.push(if positive { RaFilter::not(g) } else { g });
                continue;
            }
        }
        residue.push(c.clone());
    }
    if lifted.is_empty() {
        return None;
    }
    let base = if residue.is_empty() {
        (**x).clone()
    } else {
        RaExpr::select((**x).clone(), RaFilter::conj(residue))
    };
    Some((
        RaExpr::select(
            RaExpr::ext_project(base, assigns.clone()),
            RaFilter::conj(lifted),
        ),
        "lift-filter",
        "moved filter conjuncts above a projection".into(),
    ))
}

fn r_lift_project(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::Project(inner, u) = e else {
        return None;
    };
    let RaExpr::Select(x, f) = inner.as_ref() else {
        return None;
    };
    if !f.attrs().is_subset(u) {
        return None;
    }
    Some((
        RaExpr::select(RaExpr::project((**x).clone(), u.clone()), f.clone()),
        "lift-filter",
        "moved a filter above a projection".into(),
    ))
}

fn r_lift_union(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    let (a, b, outer) = match e {
        RaExpr::Union(a, b) => (a, b, false),
        RaExpr::OuterUnion(a, b) => (a, b, true),
        _ => return None,
    };
    let (RaExpr::Select(x, f), RaExpr::Select(y, g)) = (a.as_ref(), b.as_ref()) else {
        return None;
    };
    let gc = owned_conjuncts(g);
    let mut common = Vec::new();
    let mut fr = Vec::new();
    for c in f.conjuncts() {
        if gc.contains(c) && !common.contains(c) {
            common.push(c.clone());
        } else {
            fr.push(c.clone());
        }
    }
    if common.is_empty() {
        return None;
    }
    let gr: Vec<RaFilter> = gc.into_iter().filter(|c| !common.contains(c)).collect();
    let la = RaExpr::select((**x).clone(), RaFilter::conj(fr));
    let lb = RaExpr::select((**y).clone(), RaFilter::conj(gr));
    let joined = if outer {
        RaExpr::outer_union(la, lb)
    } else {
        RaExpr::Union(Box::new(la), Box::new(lb))
    };
    Some((
        RaExpr::select(joined, RaFilter::conj(common)),
        "lift-filter",
        "hoisted filter conjuncts shared by both union branches".into(),
    ))
}

fn r_absorb_join(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    let (a, b, f) = match e {
        RaExpr::NatJoin(a, b) => (a, b, RaFilter::True),
        RaExpr::JoinF(a, b, f) => (a, b, f.clone()),
        _ => return None,
    };
    if let RaExpr::Select(x, f1) = a.as_ref() {
        return Some((
            RaExpr::join_f((**x).clone(), (**b).clone(), RaFilter::and(f, f1.clone())),
            "absorb-filter",
            "absorbed a filtered operand into the join condition".into(),
        ));
    }
    if let RaExpr::Select(y, f2) = b.as_ref() {
        return Some((
            RaExpr::join_f((**a).clone(), (**y).clone(), RaFilter::and(f, f2.clone())),
            "absorb-filter",
            "absorbed a filtered operand into the join condition".into(),
        ));
    }
    None
}

fn r_lj_left(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::LeftJoinF(a, b, f) = e else {
        return None;
    };
    let RaExpr::Select(x, f1) = a.as_ref() else {
        return None;
    };
    Some((
        RaExpr::select(
            RaExpr::left_join_f(
                (**x).clone(),
                (**b).clone(),
                RaFilter::and(f.clone(), f1.clone()),
            ),
            f1.clone(),
        ),
        "lift-filter",
        "pulled a left operand filter above the left join".into(),
    ))
}

fn r_lj_right(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::LeftJoinF(a, b, f) = e else {
        return None;
    };
    let RaExpr::Select(y, f2) = b.as_ref() else {
        return None;
    };
    Some((
        RaExpr::left_join_f(
            (**a).clone(),
            (**y).clone(),
            RaFilter::and(f.clone(), f2.clone()),
        ),
        "absorb-filter",
        "absorbed a right operand filter into the left join condition".into(),
    ))
}

fn r_lift_distinct(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::Distinct(inner) = e else {
        return None;
    };
    let RaExpr::Select(x, f) = inner.as_ref() else {
        return None;
    };
    Some((
        RaExpr::select(RaExpr::Distinct(x.clone()), f.clone()),
        "lift-filter",
        "moved a filter above duplicate elimination".into(),
    ))
}

fn r_merge_extproject(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::ExtProject(inner, a) = e else {
        return None;
    };
    let RaExpr::ExtProject(x, b) = inner.as_ref() else {
        return None;
    };
    let bmap: BTreeMap<Attr, RaTerm> = b.iter().cloned().collect();
    let merged: Vec<(Attr, RaTerm)> = a
        .iter()
        .map(|(o, t)| (o.clone(), t.substitute(&bmap)))
        .collect();
    Some((
        RaExpr::ExtProject(x.clone(), merged),
        "merge-projections",
        "composed two stacked projections".into(),
    ))
}

fn r_merge_project(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    match e {
        RaExpr::Project(inner, u) => match inner.as_ref() {
            RaExpr::Project(x, _) => Some((
                RaExpr::project((**x).clone(), u.clone()),
                "merge-projections",
                "composed two stacked projections".into(),
            )),
            RaExpr::ExtProject(x, a) => Some((
                RaExpr::ExtProject(
                    x.clone(),
                    a.iter().filter(|(o, _)| u.contains(o)).cloned().collect(),
                ),
                "merge-projections",
                "composed two stacked projections".into(),
            )),
            _ => None,
        },
        RaExpr::ExtProject(inner, a) => match inner.as_ref() {
            RaExpr::Project(x, _) => Some((
                RaExpr::ExtProject(x.clone(), a.clone()),
                "merge-projections",
                "composed two stacked projections".into(),
            )),
            _ => None,
        },
        _ => None,
    }
}

fn r_identity_elim(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    match e {
        RaExpr::ExtProject(x, a) => {
            let ua = cx.attrs(x);
            let identity = a.len() == ua.len()
                && a.iter().all(|(o, t)| matches!(t, RaTerm::Attr(k) if k == o))
                && a.iter().all(|(o, _)| ua.contains(o));
            identity.then(|| {
                (
                    (**x).clone(),
                    "drop-identity",
                    "removed an identity projection".into(),
                )
            })
        }
        RaExpr::Project(x, u) => (cx.attrs(x) == *u).then(|| {
            (
                (**x).clone(),
                "drop-identity",
                "removed an identity projection".into(),
            )
        }),
        _ => None,
    }
}

fn r_rename_to_extproject(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::Rename(x, from, to) = e else {
        return None;
    };
    let mut assigns: Vec<(Attr, RaTerm)> = cx
        .attrs(x)
        .iter()
        .map(|u| {
            let o = if u == from { to.clone() } else { u.clone() };
            (o, RaTerm::attr(u.clone()))
        })
        .collect();
    assigns.sort_by(|a, b| a.0.cmp(&b.0));
    Some((
        RaExpr::ExtProject(x.clone(), assigns),
        "rename-as-projection",
        "expressed a rename as a projection".into(),
    ))
}

fn r_push_rename_join(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::ExtProject(inner, assigns) = e else {
        return None;
    };
    if !matches!(
        inner.as_ref(),
        RaExpr::NatJoin(..) | RaExpr::JoinF(..) | RaExpr::LeftJoinF(..)
    ) {
        return None;
    }
    let uj = cx.attrs(inner);
    let mut map: BTreeMap<Attr, Attr> = BTreeMap::new();
    for (o, t) in assigns {
        let RaTerm::Attr(k) = t else { return None };
        if map.insert(k.clone(), o.clone()).is_some() {
            return None;
        }
    }
    if map.len() != uj.len() || !map.keys().all(|k| uj.contains(k)) {
        return None;
    }
    if map.iter().all(|(k, v)| k == v) {
        return None;
    }
    // renamed targets must not collide with surviving join attributes
    if map.iter().any(|(k, v)| k != v && uj.contains(v)) {
        return None;
    }
    let subst = attr_term_subst(&map);
    let rebuilt = match inner.as_ref() {
        RaExpr::NatJoin(a, b) => {
            RaExpr::nat_join(rename_out(a, &map, cx), rename_out(b, &map, cx))
        }
        RaExpr::JoinF(a, b, f) => RaExpr::join_f(
            rename_out(a, &map, cx),
            rename_out(b, &map, cx),
            f.substitute(&subst),
        ),
        RaExpr::LeftJoinF(a, b, f) => RaExpr::left_join_f(
            rename_out(a, &map, cx),
            rename_out(b, &map, cx),
            f.substitute(&subst),
        ),
        _ => unreachable!(),
    };
    Some((
        rebuilt,
        "push-rename",
        "pushed a pure renaming below a join".into(),
    ))
}

fn r_prune(e: &RaExpr, _cx: &Cx, needed: &AttrSet) -> Fired {
    match e {
        RaExpr::ExtProject(x, a) => {
            let kept: Vec<(Attr, RaTerm)> = a
                .iter()
                .filter(|(o, _)| needed.contains(o))
                .cloned()
                .collect();
            (kept.len() < a.len()).then(|| {
                (
                    RaExpr::ExtProject(x.clone(), kept),
                    "prune",
                    "dropped projection outputs no ancestor reads".into(),
                )
            })
        }
        RaExpr::Project(x, u) => {
            let kept: AttrSet = u.intersection(needed).cloned().collect();
            (kept.len() < u.len()).then(|| {
                (
                    RaExpr::project((**x).clone(), kept),
                    "prune",
                    "dropped projection outputs no ancestor reads".into(),
                )
            })
        }
        _ => None,
    }
}

/// Non-null attributes visible to a join condition: both inputs plus the
/// shared attributes, which a natural match forces non-null.
fn join_nn(a: &RaExpr, b: &RaExpr, cx: &Cx) -> AttrSet {
    let pa = cx.props(a);
    let pb = cx.props(b);
    let mut out: AttrSet = pa.non_null.union(&pb.non_null).cloned().collect();
    out.extend(pa.attrs.intersection(&pb.attrs).cloned());
    out
}

fn r_cond(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    match e {
        RaExpr::Select(x, f) => {
            let f2 = simplify_cond(f, &cx.props(x).non_null);
            if &f2 == f {
                return None;
            }
            if f2 == RaFilter::True {
                return Some((
                    (**x).clone(),
                    "cond",
                    "filter simplified away".into(),
                ));
            }
            Some((
                RaExpr::select((**x).clone(), f2),
                "cond",
                "simplified a filter".into(),
            ))
        }
        RaExpr::JoinF(a, b, f) => {
            let f2 = simplify_cond(f, &join_nn(a, b, cx));
            if &f2 == f {
                return None;
            }
            if f2 == RaFilter::True {
                return Some((
                    RaExpr::nat_join((**a).clone(), (**b).clone()),
                    "cond",
                    "join condition simplified to a natural join".into(),
                ));
            }
            Some((
                RaExpr::join_f((**a).clone(), (**b).clone(), f2),
                "cond",
                "simplified a join condition".into(),
            ))
        }
        RaExpr::LeftJoinF(a, b, f) => {
            if f == &RaFilter::True {
                return None;
            }
            let f2 = simplify_cond(f, &join_nn(a, b, cx));
            (&f2 != f).then(|| {
                (
                    RaExpr::left_join_f((**a).clone(), (**b).clone(), f2),
                    "cond",
                    "simplified a left join condition".into(),
                )
            })
        }
        _ => None,
    }
}

/// The canonical empty plan over a given attribute set: a refuted
/// filter over the unit relation padded with nulls to the right schema.
/// The filter sits on top so pullup leaves the shape alone.
fn empty_of(attrs: &AttrSet) -> RaExpr {
    RaExpr::select(
        RaExpr::ext_project(
            RaExpr::Base(UNIT_REL.to_string()),
            attrs
                .iter()
                .map(|a| (a.clone(), RaTerm::null()))
                .collect(),
        ),
        RaFilter::fals(),
    )
}

/// Recognises the body of [`empty_of`], so the collapse does not refire
/// on its own output.
fn null_padded_unit(e: &RaExpr) -> bool {
    match e {
        RaExpr::Base(r) => r == UNIT_REL,
        RaExpr::ExtProject(x, assigns) => {
            matches!(&**x, RaExpr::Base(r) if r == UNIT_REL)
                && assigns
                    .iter()
                    .all(|(_, t)| matches!(t, RaTerm::Const(DbValue::Null)))
        }
        _ => false,
    }
}

/// Collapses operators whose condition is refuted: a filter or inner
/// join on an unsatisfiable condition yields nothing, and a left join on
/// one degenerates into null padding of its left operand.
fn r_dead(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    match e {
        RaExpr::Select(x, f) => {
            if !never_true(f) || null_padded_unit(x) {
                return None;
            }
            Some((
                empty_of(&cx.attrs(x)),
                "dead-branch",
                "refuted filter: the subtree yields nothing".into(),
            ))
        }
        RaExpr::JoinF(a, b, f) => {
            if !never_true(f) {
                return None;
            }
            let attrs: AttrSet = cx.attrs(a).union(&cx.attrs(b)).cloned().collect();
            Some((
                empty_of(&attrs),
                "dead-branch",
                "refuted join condition: the subtree yields nothing".into(),
            ))
        }
        RaExpr::LeftJoinF(a, b, f) => {
            if f == &RaFilter::True || !never_true(f) {
                return None;
            }
            let ua = cx.attrs(a);
            let mut assigns: Vec<(Attr, RaTerm)> = ua
                .iter()
                .map(|x| (x.clone(), RaTerm::attr(x.clone())))
                .collect();
            for x in cx.attrs(b).difference(&ua) {
                assigns.push((x.clone(), RaTerm::null()));
            }
            assigns.sort_by(|(x, _), (y, _)| x.cmp(y));
            Some((
                RaExpr::ext_project((**a).clone(), assigns),
                "dead-branch",
                "refuted left join condition: only null padding remains".into(),
            ))
        }
        _ => None,
    }
}

fn r_coalesce_elim(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::ExtProject(x, assigns) = e else {
        return None;
    };
    let nn = cx.props(x).non_null;
    let mut out = assigns.clone();
    let mut hit = false;
    for (_, t) in &mut out {
        if let Some((v, _)) = t.as_coalesce() {
            if term_forced_nonnull(v, &nn) {
                *t = v.clone();
                hit = true;
            }
        }
    }
    hit.then(|| {
        (
            RaExpr::ExtProject(x.clone(), out),
            "coalesce-elim",
            "first coalesce operand can never be null".into(),
        )
    })
}

fn r_push_isnull(e: &RaExpr, _cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::Select(inner, f) = e else {
        return None;
    };
    let RaExpr::ExtProject(x, assigns) = inner.as_ref() else {
        return None;
    };
    let coalesced: BTreeMap<Attr, (Attr, Attr)> = assigns
        .iter()
        .filter_map(|(o, t)| {
            let (v, w) = t.as_coalesce()?;
            match (v, w) {
                (RaTerm::Attr(v), RaTerm::Attr(w)) => Some((o.clone(), (v.clone(), w.clone()))),
                _ => None,
            }
        })
        .collect();
    if coalesced.is_empty() {
        return None;
    }
    let mut pushed = Vec::new();
    let mut kept = Vec::new();
    for c in f.conjuncts() {
        let translated = match c {
            RaFilter::IsNull(ts) => match ts.as_slice() {
                [RaTerm::Attr(u)] => coalesced.get(u).map(|(v, w)| {
                    RaFilter::is_null(vec![RaTerm::attr(v.clone()), RaTerm::attr(w.clone())])
                }),
                _ => None,
            },
            RaFilter::Not(g) => match g.as_ref() {
                RaFilter::IsNull(ts) => match ts.as_slice() {
                    [RaTerm::Attr(u)] => coalesced.get(u).map(|(v, w)| {
                        RaFilter::or(nn_guard(v), nn_guard(w))
                    }),
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        };
        match translated {
            Some(t) => pushed.push(t),
            None => kept.push(c.clone()),
        }
    }
    if pushed.is_empty() {
        return None;
    }
    let core = RaExpr::ext_project(
        RaExpr::select((**x).clone(), RaFilter::conj(pushed)),
        assigns.clone(),
    );
    let out = if kept.is_empty() {
        core
    } else {
        RaExpr::select(core, RaFilter::conj(kept))
    };
    Some((
        out,
        "push-null-test",
        "tested coalesce arguments below the projection".into(),
    ))
}

/// Recognises the tolerant comparison produced for shared variables of an
/// optional match: equal, or one side missing.
fn comp_shape(c: &RaFilter, u1: &Attr, u2: &Attr) -> bool {
    let eq1 = RaFilter::eq(RaTerm::attr(u1.clone()), RaTerm::attr(u2.clone()));
    let eq2 = RaFilter::eq(RaTerm::attr(u2.clone()), RaTerm::attr(u1.clone()));
    let allowed = [
        eq1.clone(),
        eq2.clone(),
        RaFilter::is_null(vec![RaTerm::attr(u1.clone())]),
        RaFilter::is_null(vec![RaTerm::attr(u2.clone())]),
        RaFilter::is_null(vec![RaTerm::attr(u1.clone()), RaTerm::attr(u2.clone())]),
    ];
    let ds = c.disjuncts();
    ds.iter().all(|d| allowed.contains(d)) && ds.iter().any(|d| d == &eq1 || d == &eq2)
}

fn r_wd_coalesce(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    if !cx.wd {
        return None;
    }
    let RaExpr::ExtProject(inner, assigns) = e else {
        return None;
    };
    let mut selects: Vec<RaFilter> = Vec::new();
    let mut cur: &RaExpr = inner;
    while let RaExpr::Select(x, f) = cur {
        selects.push(f.clone());
        cur = x;
    }
    let (a, b, jf, is_left) = match cur {
        RaExpr::JoinF(a, b, f) => (a, b, f.clone(), false),
        RaExpr::LeftJoinF(a, b, f) => (a, b, f.clone(), true),
        _ => return None,
    };
    let ua = cx.attrs(a);
    let ub = cx.attrs(b);
    let uj: AttrSet = ua.union(&ub).cloned().collect();
    for (u, t) in assigns {
        let Some((RaTerm::Attr(u1), RaTerm::Attr(u2))) = t.as_coalesce() else {
            continue;
        };
        if !(ua.contains(u1) && !ub.contains(u1) && ub.contains(u2) && !ua.contains(u2)) {
            continue;
        }
        if uj.contains(u) && u != u1 && u != u2 {
            continue;
        }
        let conjs = owned_conjuncts(&jf);
        let Some(pos) = conjs.iter().position(|c| comp_shape(c, u1, u2)) else {
            continue;
        };
        // only the coalesced output may depend on the right copy
        let elsewhere = selects.iter().any(|f| f.attrs().contains(u2))
            || assigns
                .iter()
                .any(|(o, ot)| o != u && ot.attrs().contains(u2));
        if elsewhere {
            continue;
        }
        let both: BTreeMap<Attr, RaTerm> = [
            (u1.clone(), RaTerm::attr(u.clone())),
            (u2.clone(), RaTerm::attr(u.clone())),
        ]
        .into_iter()
        .collect();
        let a2 = rename_out(a, &[(u1.clone(), u.clone())].into_iter().collect(), cx);
        let b2 = rename_out(b, &[(u2.clone(), u.clone())].into_iter().collect(), cx);
        let rest: Vec<RaFilter> = conjs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, c)| c.substitute(&both))
            .collect();
        let jf2 = RaFilter::conj(rest);
        let join = if is_left {
            RaExpr::left_join_f(a2, b2, jf2)
        } else if jf2 == RaFilter::True {
            RaExpr::nat_join(a2, b2)
        } else {
            RaExpr::join_f(a2, b2, jf2)
        };
        let mut rebuilt = join;
        for f in selects.iter().rev() {
            rebuilt = RaExpr::select(rebuilt, f.substitute(&both));
        }
        let assigns2: Vec<(Attr, RaTerm)> = assigns
            .iter()
            .map(|(o, ot)| {
                if o == u {
                    (o.clone(), RaTerm::attr(u.clone()))
                } else {
                    (o.clone(), ot.substitute(&both))
                }
            })
            .collect();
        return Some((
            RaExpr::ExtProject(Box::new(rebuilt), assigns2),
            "wd-join",
            "replaced a tolerant comparison and coalesce by a shared attribute".into(),
        ));
    }
    None
}

fn r_wd_drop(e: &RaExpr, cx: &Cx, needed: &AttrSet) -> Fired {
    if !cx.wd {
        return None;
    }
    let (a, b, f, is_left) = match e {
        RaExpr::JoinF(a, b, f) => (a, b, f, false),
        RaExpr::LeftJoinF(a, b, f) => (a, b, f, true),
        _ => return None,
    };
    let ua = cx.attrs(a);
    let ub = cx.attrs(b);
    let conjs = owned_conjuncts(f);
    for (i, c) in conjs.iter().enumerate() {
        let pair = c.disjuncts().iter().find_map(|d| match d {
            RaFilter::Eq(RaTerm::Attr(x), RaTerm::Attr(y)) => {
                if ua.contains(x) && !ub.contains(x) && ub.contains(y) && !ua.contains(y) {
                    Some((x.clone(), y.clone()))
                } else if ua.contains(y) && !ub.contains(y) && ub.contains(x) && !ua.contains(x) {
                    Some((y.clone(), x.clone()))
                } else {
                    None
                }
            }
            _ => None,
        });
        let Some((u1, u2)) = pair else { continue };
        if !comp_shape(c, &u1, &u2) || needed.contains(&u2) {
            continue;
        }
        let rest: Vec<RaFilter> = conjs
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, c)| c.clone())
            .collect();
        if RaFilter::conj(rest.clone()).attrs().contains(&u2) {
            continue;
        }
        let b2 = rename_out(b, &[(u2.clone(), u1.clone())].into_iter().collect(), cx);
        let f2 = RaFilter::conj(rest);
        let out = if is_left {
            RaExpr::left_join_f((**a).clone(), b2, f2)
        } else if f2 == RaFilter::True {
            RaExpr::nat_join((**a).clone(), b2)
        } else {
            RaExpr::join_f((**a).clone(), b2, f2)
        };
        return Some((
            out,
            "wd-join",
            "replaced a tolerant comparison by a shared attribute".into(),
        ));
    }
    None
}

fn r_eq_to_shared(e: &RaExpr, cx: &Cx, needed: &AttrSet) -> Fired {
    let (a, b, f, is_left) = match e {
        RaExpr::JoinF(a, b, f) => (a, b, f, false),
        RaExpr::LeftJoinF(a, b, f) => (a, b, f, true),
        _ => return None,
    };
    let ua = cx.attrs(a);
    let ub = cx.attrs(b);
    let conjs = owned_conjuncts(f);
    for (i, c) in conjs.iter().enumerate() {
        let RaFilter::Eq(RaTerm::Attr(p), RaTerm::Attr(q)) = c else {
            continue;
        };
        let (x, y) = if ua.contains(p) && !ub.contains(p) && ub.contains(q) && !ua.contains(q) {
            (p.clone(), q.clone())
        } else if ua.contains(q) && !ub.contains(q) && ub.contains(p) && !ua.contains(p) {
            (q.clone(), p.clone())
        } else {
            continue;
        };
        let rest: Vec<RaFilter> = conjs
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, c)| c.clone())
            .collect();
        let rest_attrs = RaFilter::conj(rest.clone()).attrs();
        // padded rows keep left values, so a left join may only retire
        // the right copy
        let drop_right = !needed.contains(&y) && !rest_attrs.contains(&y);
        let drop_left = !is_left && !needed.contains(&x) && !rest_attrs.contains(&x);
        let (a2, b2) = if drop_right {
            (
                (**a).clone(),
                rename_out(b, &[(y.clone(), x.clone())].into_iter().collect(), cx),
            )
        } else if drop_left {
            (
                rename_out(a, &[(x.clone(), y.clone())].into_iter().collect(), cx),
                (**b).clone(),
            )
        } else {
            continue;
        };
        let f2 = RaFilter::conj(rest);
        let out = if is_left {
            RaExpr::left_join_f(a2, b2, f2)
        } else if f2 == RaFilter::True {
            RaExpr::nat_join(a2, b2)
        } else {
            RaExpr::join_f(a2, b2, f2)
        };
        return Some((
            out,
            "eq-to-shared",
            "turned a cross equality into a shared join attribute".into(),
        ));
    }
    None
}

fn r_one_match_if(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::LeftJoinF(a, b, f) = e else {
        return None;
    };
    if f == &RaFilter::True {
        return None;
    }
    let ua = cx.attrs(a);
    let ub = cx.attrs(b);
    let shared: AttrSet = ua.intersection(&ub).cloned().collect();
    if !covers_key(&cx.props(b), &shared) {
        return None;
    }
    let mut assigns: Vec<(Attr, RaTerm)> = Vec::new();
    for u in ua.union(&ub) {
        let t = if ub.contains(u) && !ua.contains(u) {
            RaTerm::If(
                Box::new(f.clone()),
                Box::new(RaTerm::attr(u.clone())),
                Box::new(RaTerm::null()),
            )
        } else {
            RaTerm::attr(u.clone())
        };
        assigns.push((u.clone(), t));
    }
    Some((
        RaExpr::ext_project(
            RaExpr::left_join_f((**a).clone(), (**b).clone(), RaFilter::True),
            assigns,
        ),
        "one-match-if",
        "at most one match: moved the left join condition into the output terms".into(),
    ))
}

fn r_term_simplify(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    match e {
        RaExpr::ExtProject(x, assigns) => {
            let nn = cx.props(x).non_null;
            let out: Vec<(Attr, RaTerm)> = assigns
                .iter()
                .map(|(o, t)| (o.clone(), simplify_term(t, &nn)))
                .collect();
            (&out != assigns).then(|| {
                (
                    RaExpr::ExtProject(x.clone(), out),
                    "term-simplify",
                    "simplified projection terms".into(),
                )
            })
        }
        RaExpr::Extend(x, n, t) => {
            let nn = cx.props(x).non_null;
            let t2 = simplify_term(t, &nn);
            (&t2 != t).then(|| {
                (
                    RaExpr::Extend(x.clone(), n.clone(), t2),
                    "term-simplify",
                    "simplified an extension term".into(),
                )
            })
        }
        _ => None,
    }
}

fn r_lj_to_join(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::LeftJoinF(a, b, RaFilter::True) = e else {
        return None;
    };
    let pa = cx.props(a);
    let pb = cx.props(b);
    let shared: AttrSet = pa.attrs.intersection(&pb.attrs).cloned().collect();
    if !shared.is_subset(&pa.non_null) {
        return None;
    }
    let links: Vec<(Attr, Attr)> = shared.iter().map(|s| (s.clone(), s.clone())).collect();
    if !inclusion(&pa, &pb, &links, cx.catalog) {
        return None;
    }
    Some((
        RaExpr::nat_join((**a).clone(), (**b).clone()),
        "compulsory-match",
        "every left tuple has a match: left join became an inner join".into(),
    ))
}

fn scan_of(prov: &Prov) -> RaExpr {
    let base = RaExpr::Base(prov.base.clone());
    let filtered = if prov.conj.is_empty() {
        base
    } else {
        RaExpr::select(base, RaFilter::conj(prov.conj.clone()))
    };
    let assigns: Vec<(Attr, RaTerm)> = prov
        .lineage
        .iter()
        .map(|(o, t)| (o.clone(), t.clone()))
        .collect();
    RaExpr::ext_project(filtered, assigns)
}

fn r_merge_scan(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let (a, b, f) = match e {
        RaExpr::NatJoin(a, b) => (a, b, RaFilter::True),
        RaExpr::JoinF(a, b, f) => (a, b, f.clone()),
        _ => return None,
    };
    let pa = cx.props(a);
    let pb = cx.props(b);
    let links = join_links(&pa.attrs, &pb.attrs, &f);
    let residual: Vec<RaFilter> = f
        .conjuncts()
        .into_iter()
        .filter(|c| match c {
            RaFilter::Eq(RaTerm::Attr(x), RaTerm::Attr(y)) => !links
                .iter()
                .any(|(lx, ly)| (lx == x && ly == y) || (lx == y && ly == x)),
            _ => true,
        })
        .cloned()
        .collect();
    let merged = try_scan_merge(&pa, &pb, &links, &RaFilter::conj(residual), cx.catalog)?;
    Some((
        scan_of(&merged),
        "merge-scans",
        "collapsed a key-aligned self join into one scan".into(),
    ))
}

fn r_join_elim(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let (a, b, f) = match e {
        RaExpr::NatJoin(a, b) => (a, b, RaFilter::True),
        RaExpr::JoinF(a, b, f) => (a, b, f.clone()),
        _ => return None,
    };
    for (keep, drop) in [(a, b), (b, a)] {
        let pk = cx.props(keep);
        let pd = cx.props(drop);
        if !pd.attrs.is_subset(&pk.attrs) || !pd.attrs.is_subset(&pk.non_null) {
            continue;
        }
        if !covers_key(&pd, &pd.attrs) {
            continue;
        }
        let links: Vec<(Attr, Attr)> = pd.attrs.iter().map(|s| (s.clone(), s.clone())).collect();
        if !inclusion(&pk, &pd, &links, cx.catalog) {
            continue;
        }
        let out = if f == RaFilter::True {
            (**keep).clone()
        } else {
            RaExpr::select((**keep).clone(), f.clone())
        };
        return Some((
            out,
            "redundant-join-elim",
            "the joined operand matches exactly once and adds nothing".into(),
        ));
    }
    None
}

fn r_join_transfer(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::LeftJoinF(r1, rhs, f) = e else {
        return None;
    };
    let (l, r, g) = match rhs.as_ref() {
        RaExpr::NatJoin(l, r) => (l, r, RaFilter::True),
        RaExpr::JoinF(l, r, g) => (l, r, g.clone()),
        _ => return None,
    };
    for (r2, r3) in [(l, r), (r, l)] {
        let u1 = cx.attrs(r1);
        let u2 = cx.attrs(r2);
        let u3 = cx.attrs(r3);
        let p3 = cx.props(r3);
        let guards: Vec<RaFilter> = f
            .conjuncts()
            .into_iter()
            .chain(g.conjuncts())
            .cloned()
            .collect();
        let w = u3
            .iter()
            .find(|w| {
                !u1.contains(*w)
                    && !u2.contains(*w)
                    && (p3.non_null.contains(*w) || guards.contains(&nn_guard(w)))
            })
            .cloned();
        let Some(w) = w else { continue };
        let p1 = cx.props(r1);
        let p2 = cx.props(r2);
        let shared12: AttrSet = u1.intersection(&u2).cloned().collect();
        let links: Vec<(Attr, Attr)> = shared12.iter().map(|s| (s.clone(), s.clone())).collect();
        if !covers_key(&p2, &shared12) || !inclusion(&p1, &p2, &links, cx.catalog) {
            continue;
        }
        // the transferred operand matches exactly once, so it can join
        // below; its attributes are blanked again when the remainder of
        // the optional part found no match
        let inner = RaExpr::left_join_f(
            RaExpr::nat_join((**r1).clone(), (**r2).clone()),
            (**r3).clone(),
            RaFilter::and(f.clone(), g.clone()),
        );
        let all: AttrSet = u1.union(&u2).cloned().collect();
        let all: AttrSet = all.union(&u3).cloned().collect();
        let assigns: Vec<(Attr, RaTerm)> = all
            .iter()
            .map(|u| {
                let t = if u2.contains(u) && !u1.contains(u) {
                    RaTerm::If(
                        Box::new(nn_guard(&w)),
                        Box::new(RaTerm::attr(u.clone())),
                        Box::new(RaTerm::null()),
                    )
                } else {
                    RaTerm::attr(u.clone())
                };
                (u.clone(), t)
            })
            .collect();
        return Some((
            RaExpr::ext_project(inner, assigns),
            "join-transfer",
            "moved a compulsory join partner out of the optional part".into(),
        ));
    }
    None
}

fn r_drop_right(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let (lj, wanted) = match e {
        RaExpr::Project(inner, u) => (inner, u.clone()),
        RaExpr::ExtProject(inner, assigns) => {
            let mut used = AttrSet::new();
            for (_, t) in assigns {
                used.extend(t.attrs());
            }
            (inner, used)
        }
        _ => return None,
    };
    let RaExpr::LeftJoinF(a, b, _) = lj.as_ref() else {
        return None;
    };
    let ua = cx.attrs(a);
    let ub = cx.attrs(b);
    if wanted.iter().any(|u| ub.contains(u) && !ua.contains(u)) {
        return None;
    }
    let shared: AttrSet = ua.intersection(&ub).cloned().collect();
    if !covers_key(&cx.props(b), &shared) {
        return None;
    }
    let out = match e {
        RaExpr::Project(_, u) => RaExpr::project((**a).clone(), u.clone()),
        RaExpr::ExtProject(_, assigns) => RaExpr::ext_project((**a).clone(), assigns.clone()),
        _ => unreachable!(),
    };
    Some((
        out,
        "drop-optional",
        "no padded attribute survives the projection and matches are unique".into(),
    ))
}

fn r_anti_null(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::Select(inner, g) = e else {
        return None;
    };
    let RaExpr::LeftJoinF(a, b, f) = inner.as_ref() else {
        return None;
    };
    let pa = cx.props(a);
    let pb = cx.props(b);
    let bonly: AttrSet = pb.attrs.difference(&pa.attrs).cloned().collect();
    let ws: Vec<&Attr> = bonly.iter().filter(|u| pb.non_null.contains(*u)).collect();
    let Some(w) = ws.first() else { return None };
    let env = join_nn(a, b, cx);
    let mut probe = vec![f.clone(), g.clone()];
    probe.extend(nn_facts(&env));
    if !never_true(&RaFilter::conj(probe)) {
        return None;
    }
    let g2 = simplify_cond(
        &RaFilter::and(
            RaFilter::is_null(vec![RaTerm::attr((*w).clone())]),
            g.nullify(&bonly),
        ),
        &pa.non_null,
    );
    (&g2 != g).then(|| {
        (
            RaExpr::select((**inner).clone(), g2),
            "anti-join",
            "the filter only accepts rows the optional part left unmatched".into(),
        )
    })
}

fn r_split(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::Select(inner, g) = e else {
        return None;
    };
    let RaExpr::LeftJoinF(a, b, f) = inner.as_ref() else {
        return None;
    };
    let pa = cx.props(a);
    let pb = cx.props(b);
    let bonly: AttrSet = pb.attrs.difference(&pa.attrs).cloned().collect();
    if g.attrs().intersection(&bonly).next().is_none() {
        return None;
    }
    let gn = simplify_cond(&g.nullify(&bonly), &pa.non_null);
    let joined = RaExpr::join_f(
        (**a).clone(),
        (**b).clone(),
        RaFilter::and(f.clone(), g.clone()),
    );
    if gn == RaFilter::fals() {
        // padded rows can never pass, so only the matched rows remain
        return Some((
            joined,
            "split-optional",
            "the filter rejects all unmatched rows".into(),
        ));
    }
    let env = join_nn(a, b, cx);
    let mut probe = vec![f.clone(), gn.clone()];
    probe.extend(nn_facts(&env));
    if !never_true(&RaFilter::conj(probe)) {
        return None;
    }
    Some((
        RaExpr::outer_union(RaExpr::select((**a).clone(), gn), joined),
        "split-optional",
        "split the filtered optional into an unmatched branch and a join branch".into(),
    ))
}

fn r_reorder(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let (p, q, fj) = match e {
        RaExpr::NatJoin(p, q) => (p, q, RaFilter::True),
        RaExpr::JoinF(p, q, f) => (p, q, f.clone()),
        _ => return None,
    };
    for (side, z) in [(p, q), (q, p)] {
        let RaExpr::LeftJoinF(x, y, f) = side.as_ref() else {
            continue;
        };
        let ux = cx.attrs(x);
        let uy = cx.attrs(y);
        let uz = cx.attrs(z);
        if !uy.intersection(&uz).all(|s| ux.contains(s)) {
            continue;
        }
        let xz: AttrSet = ux.union(&uz).cloned().collect();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for c in fj.conjuncts() {
            if c.attrs().is_subset(&xz) {
                lower.push(c.clone());
            } else {
                upper.push(c.clone());
            }
        }
        let lower = RaFilter::conj(lower);
        let mid = if lower == RaFilter::True {
            RaExpr::nat_join((**x).clone(), (**z).clone())
        } else {
            RaExpr::join_f((**x).clone(), (**z).clone(), lower)
        };
        let lifted = RaExpr::left_join_f(mid, (**y).clone(), f.clone());
        let out = if upper.is_empty() {
            lifted
        } else {
            RaExpr::select(lifted, RaFilter::conj(upper))
        };
        return Some((
            out,
            "hoist-optional",
            "joined the independent operand below the left join".into(),
        ));
    }
    None
}

fn r_strengthen(e: &RaExpr, cx: &Cx, _needed: &AttrSet) -> Fired {
    let RaExpr::LeftJoinF(a, b, f) = e else {
        return None;
    };
    if f == &RaFilter::True || f.conjuncts().contains(&&RaFilter::fals()) {
        return None;
    }
    let fc = owned_conjuncts(f);
    let f_attrs = f.attrs();
    let env = join_nn(a, b, cx);
    let mut additions = Vec::new();
    for w in tuple_invariants(a, cx.catalog) {
        let ds = w.disjuncts();
        if ds.len() < 2 || w.attrs().intersection(&f_attrs).next().is_none() {
            continue;
        }
        if fc.iter().any(|c| implies_conjunct(c, &w)) {
            continue;
        }
        if ds
            .iter()
            .any(|d| d.conjuncts().iter().all(|dc| fc.contains(dc)))
        {
            continue;
        }
        // useless when one disjunct already holds on every candidate row
        let trivially_true = ds.iter().any(|d| {
            let RaFilter::Not(inner) = d else { return false };
            let RaFilter::IsNull(ts) = inner.as_ref() else {
                return false;
            };
            ts.len() == 1
                && (term_never_null(&ts[0])
                    || !ts[0].attrs().is_empty() && ts[0].attrs().iter().all(|a| env.contains(a))
                    || in_equality(&ts[0], &fc))
        });
        if trivially_true || additions.contains(&w) {
            continue;
        }
        additions.push(w);
    }
    if additions.is_empty() {
        return None;
    }
    let mut all = fc;
    all.extend(additions);
    Some((
        RaExpr::left_join_f((**a).clone(), (**b).clone(), RaFilter::conj(all)),
        "strengthen",
        "added facts the left operand guarantees to the join condition".into(),
    ))
}

#[cfg(test)]
mod tests;
