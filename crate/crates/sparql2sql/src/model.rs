//! RDF terms, triples, graphs, and bags of solution mappings.
//!
//! Terms compare syntactically: two literals are equal iff their lexical
//! forms and datatype/language tags are byte-equal. Blank nodes are plain
//! labelled constants; there is no scoping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// A variable name, stored without the leading `?`.
pub type Variable = String;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RdfTerm {
    Iri(String),
    /// Lexical form plus optional datatype IRI or `@lang` tag.
    Literal(String, Option<String>),
    Blank(String),
}

impl RdfTerm {
    pub fn iri(s: impl Into<String>) -> Self {
        let s = s.into();
        debug_assert!(!s.is_empty());
        RdfTerm::Iri(s)
    }

    pub fn lit(s: impl Into<String>) -> Self {
        RdfTerm::Literal(s.into(), None)
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, RdfTerm::Iri(_))
    }
}

impl fmt::Display for RdfTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RdfTerm::Iri(s) => write!(f, "<{s}>"),
            RdfTerm::Literal(lex, None) => write!(f, "\"{}\"", escape_lex(lex)),
            RdfTerm::Literal(lex, Some(tag)) => {
                if let Some(lang) = tag.strip_prefix('@') {
                    write!(f, "\"{}\"@{lang}", escape_lex(lex))
                } else {
                    write!(f, "\"{}\"^^<{tag}>", escape_lex(lex))
                }
            }
            RdfTerm::Blank(l) => write!(f, "_:{l}"),
        }
    }
}

fn escape_lex(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub sub: RdfTerm,
    pub pred: RdfTerm,
    pub obj: RdfTerm,
}

impl Triple {
    /// `pred` must be an IRI: triples live in C × I × C.
    pub fn new(sub: RdfTerm, pred: RdfTerm, obj: RdfTerm) -> Result<Self, ModelError> {
        if !pred.is_iri() {
            return Err(ModelError::PredicateNotIri(pred.to_string()));
        }
        Ok(Triple { sub, pred, obj })
    }
}

/// A finite set of triples. Duplicates collapse on insertion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RdfGraph {
    pub triples: BTreeSet<Triple>,
}

impl RdfGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, t: Triple) {
        self.triples.insert(t);
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

/// A partial map from variables to terms. Unbound means absent; there is
/// no null sentinel at this level.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SolutionMapping {
    pub bindings: BTreeMap<Variable, RdfTerm>,
}

impl SolutionMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(mut self, v: impl Into<Variable>, t: RdfTerm) -> Self {
        self.bindings.insert(v.into(), t);
        self
    }

    pub fn get(&self, v: &str) -> Option<&RdfTerm> {
        self.bindings.get(v)
    }

    pub fn dom(&self) -> BTreeSet<Variable> {
        self.bindings.keys().cloned().collect()
    }

    /// s1 ~ s2: agreement on the shared domain.
    pub fn compatible(&self, other: &SolutionMapping) -> bool {
        self.bindings
            .iter()
            .all(|(v, t)| other.bindings.get(v).map_or(true, |t2| t == t2))
    }

    /// s1 ⊕ s2; the caller must have checked compatibility.
    pub fn merge(&self, other: &SolutionMapping) -> SolutionMapping {
        debug_assert!(self.compatible(other));
        let mut bindings = self.bindings.clone();
        for (v, t) in &other.bindings {
            bindings.entry(v.clone()).or_insert_with(|| t.clone());
        }
        SolutionMapping { bindings }
    }

    /// s|L.
    pub fn restrict(&self, vars: &BTreeSet<Variable>) -> SolutionMapping {
        SolutionMapping {
            bindings: self
                .bindings
                .iter()
                .filter(|(v, _)| vars.contains(*v))
                .map(|(v, t)| (v.clone(), t.clone()))
                .collect(),
        }
    }
}

pub type Multiplicity = i64;

/// A bag of solution mappings. Stored multiplicities are always >= 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolutionBag {
    pub entries: BTreeMap<SolutionMapping, Multiplicity>,
}

impl SolutionBag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, s: SolutionMapping, n: Multiplicity) {
        if n <= 0 {
            return;
        }
        let slot = self.entries.entry(s).or_insert(0);
        *slot = slot.checked_add(n).expect("multiplicity overflow");
    }

    pub fn multiplicity(&self, s: &SolutionMapping) -> Multiplicity {
        self.entries.get(s).copied().unwrap_or(0)
    }

    pub fn total(&self) -> Multiplicity {
        self.entries.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SolutionMapping, Multiplicity)> {
        self.entries.iter().map(|(s, n)| (s, *n))
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("predicate must be an IRI, got {0}")]
    PredicateNotIri(String),
    #[error("line {line}: {msg}")]
    GraphSyntax { line: usize, msg: String },
}

/// Parses the one-triple-per-line graph format: whitespace-separated
/// `<iri>`, `"lex"`, `"lex"^^<dt>`, `"lex"@lang`, `_:label`, line ending
/// in ` .`.
pub fn parse_graph(text: &str) -> Result<RdfGraph, ModelError> {
    let mut g = RdfGraph::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let body = line.strip_suffix('.').map(str::trim_end).ok_or_else(|| {
            ModelError::GraphSyntax {
                line: line_no,
                msg: "missing terminating ' .'".into(),
            }
        })?;
        let mut toks = TermLexer::new(body);
        let sub = toks.next_term().map_err(|msg| ModelError::GraphSyntax { line: line_no, msg })?;
        let pred = toks.next_term().map_err(|msg| ModelError::GraphSyntax { line: line_no, msg })?;
        let obj = toks.next_term().map_err(|msg| ModelError::GraphSyntax { line: line_no, msg })?;
        if !toks.rest().trim().is_empty() {
            return Err(ModelError::GraphSyntax {
                line: line_no,
                msg: format!("trailing input: {}", toks.rest().trim()),
            });
        }
        let t = Triple::new(sub, pred, obj).map_err(|e| ModelError::GraphSyntax {
            line: line_no,
            msg: e.to_string(),
        })?;
        g.insert(t);
    }
    Ok(g)
}

struct TermLexer<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> TermLexer<'a> {
    fn new(input: &'a str) -> Self {
        TermLexer { input, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.input[self.pos..]
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with(|c: char| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn next_term(&mut self) -> Result<RdfTerm, String> {
        self.skip_ws();
        let rest = self.rest();
        if let Some(r) = rest.strip_prefix('<') {
            let end = r.find('>').ok_or("unterminated IRI")?;
            let iri = &r[..end];
            if iri.is_empty() {
                return Err("empty IRI".into());
            }
            self.pos += end + 2;
            return Ok(RdfTerm::Iri(iri.to_string()));
        }
        if let Some(r) = rest.strip_prefix("_:") {
            let end = r
                .find(|c: char| c.is_whitespace())
                .unwrap_or(r.len());
            if end == 0 {
                return Err("empty blank-node label".into());
            }
            self.pos += 2 + end;
            return Ok(RdfTerm::Blank(r[..end].to_string()));
        }
        if rest.starts_with('"') {
            let mut lex = String::new();
            let bytes = rest.as_bytes();
            let mut i = 1;
            loop {
                if i >= bytes.len() {
                    return Err("unterminated literal".into());
                }
                match bytes[i] {
                    b'\\' => {
                        match bytes.get(i + 1) {
                            Some(b'"') => lex.push('"'),
                            Some(b'\\') => lex.push('\\'),
                            _ => return Err("bad escape in literal".into()),
                        }
                        i += 2;
                    }
                    b'"' => break,
                    _ => {
                        let c = rest[i..].chars().next().unwrap();
                        lex.push(c);
                        i += c.len_utf8();
                    }
                }
            }
            let after = &rest[i + 1..];
            if let Some(r) = after.strip_prefix("^^<") {
                let end = r.find('>').ok_or("unterminated datatype IRI")?;
                self.pos += i + 1 + 3 + end + 1;
                return Ok(RdfTerm::Literal(lex, Some(r[..end].to_string())));
            }
            if let Some(r) = after.strip_prefix('@') {
                let end = r
                    .find(|c: char| c.is_whitespace())
                    .unwrap_or(r.len());
                if end == 0 {
                    return Err("empty language tag".into());
                }
                self.pos += i + 1 + 1 + end;
                return Ok(RdfTerm::Literal(lex, Some(format!("@{}", &r[..end]))));
            }
            self.pos += i + 1;
            return Ok(RdfTerm::Literal(lex, None));
        }
        Err(format!("unrecognised term at: {}", rest.chars().take(20).collect::<String>()))
    }
}
