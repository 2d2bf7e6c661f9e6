//! Parser for the concrete SPARQL subset: SELECT [DISTINCT] over a group
//! of `.`-joined triple blocks, OPTIONAL, UNION, MINUS,
//! FILTER(bound / = / ! / && / ||), and BIND(constant AS ?v).
//! Adjacent OPTIONALs associate to the left. Anything outside the subset
//! is reported as an unsupported feature.

use std::collections::BTreeSet;

use crate::model::RdfTerm;
use crate::sparql::{
    validate, GraphPattern, SparqlError, SparqlFilter, TermOrVar, TriplePattern,
};

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Kw(String),    // upper-cased keyword
    Sym(char),     // { } ( ) . , =
    AndAnd,
    OrOr,
    Bang,
    Var(String),
    Term(RdfTerm),
    Star,
    A, // the `a` shorthand for rdf:type
}

fn err(pos: usize, msg: impl Into<String>) -> SparqlError {
    SparqlError::Syntax { pos, msg: msg.into() }
}

const KEYWORDS: &[&str] = &[
    "SELECT", "DISTINCT", "WHERE", "OPTIONAL", "UNION", "MINUS", "FILTER", "BIND", "AS", "BOUND",
];

fn tokenize(input: &str) -> Result<Vec<(Tok, usize)>, SparqlError> {
    let mut out = Vec::new();
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let pos = i;
        match c {
            '{' | '}' | '(' | ')' | '.' | ',' | '=' => {
                out.push((Tok::Sym(c), pos));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, pos));
                i += 1;
            }
            '&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    out.push((Tok::AndAnd, pos));
                    i += 2;
                } else {
                    return Err(err(pos, "expected &&"));
                }
            }
            '|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    out.push((Tok::OrOr, pos));
                    i += 2;
                } else {
                    return Err(err(pos, "expected ||"));
                }
            }
            '!' => {
                out.push((Tok::Bang, pos));
                i += 1;
            }
            '?' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len()
                    && ((bytes[j] as char).is_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                if j == start {
                    return Err(err(pos, "empty variable name"));
                }
                out.push((Tok::Var(input[start..j].to_string()), pos));
                i = j;
            }
            '<' => {
                let end = input[i..]
                    .find('>')
                    .ok_or_else(|| err(pos, "unterminated IRI"))?;
                let body = &input[i + 1..i + end];
                if body.is_empty() {
                    return Err(err(pos, "empty IRI"));
                }
                out.push((Tok::Term(RdfTerm::Iri(body.to_string())), pos));
                i += end + 1;
            }
            '"' => {
                let mut j = i + 1;
                let mut lex = String::new();
                loop {
                    if j >= bytes.len() {
                        return Err(err(pos, "unterminated literal"));
                    }
                    match bytes[j] {
                        b'\\' => {
                            match bytes.get(j + 1) {
                                Some(b'"') => lex.push('"'),
                                Some(b'\\') => lex.push('\\'),
                                _ => return Err(err(j, "bad escape")),
                            }
                            j += 2;
                        }
                        b'"' => break,
                        _ => {
                            let ch = input[j..].chars().next().unwrap();
                            lex.push(ch);
                            j += ch.len_utf8();
                        }
                    }
                }
                j += 1;
                let tag = if input[j..].starts_with("^^<") {
                    let end = input[j..]
                        .find('>')
                        .ok_or_else(|| err(j, "unterminated datatype"))?;
                    let dt = input[j + 3..j + end].to_string();
                    j += end + 1;
                    Some(dt)
                } else if input[j..].starts_with('@') {
                    let start = j + 1;
                    let mut k = start;
                    while k < bytes.len()
                        && ((bytes[k] as char).is_alphanumeric() || bytes[k] == b'-')
                    {
                        k += 1;
                    }
                    let lang = format!("@{}", &input[start..k]);
                    j = k;
                    Some(lang)
                } else {
                    None
                };
                out.push((Tok::Term(RdfTerm::Literal(lex, tag)), pos));
                i = j;
            }
            '_' if bytes.get(i + 1) == Some(&b':') => {
                let start = i + 2;
                let mut j = start;
                while j < bytes.len()
                    && ((bytes[j] as char).is_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                out.push((Tok::Term(RdfTerm::Blank(input[start..j].to_string())), pos));
                i = j;
            }
            _ if c.is_alphabetic() => {
                let start = i;
                let mut j = i;
                while j < bytes.len()
                    && ((bytes[j] as char).is_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                let word = &input[start..j];
                i = j;
                if word == "a" {
                    out.push((Tok::A, pos));
                } else {
                    let upper = word.to_ascii_uppercase();
                    if KEYWORDS.contains(&upper.as_str()) {
                        out.push((Tok::Kw(upper), pos));
                    } else {
                        return Err(SparqlError::Unsupported(word.to_string()));
                    }
                }
            }
            _ => return Err(err(pos, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks
            .get(self.idx)
            .map(|(_, p)| *p)
            .unwrap_or(usize::MAX)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(t, _)| t.clone());
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn expect_sym(&mut self, c: char) -> Result<(), SparqlError> {
        let pos = self.pos();
        match self.next() {
            Some(Tok::Sym(s)) if s == c => Ok(()),
            other => Err(err(pos, format!("expected `{c}`, got {other:?}"))),
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SparqlError> {
        let pos = self.pos();
        match self.next() {
            Some(Tok::Kw(k)) if k == kw => Ok(()),
            other => Err(err(pos, format!("expected {kw}, got {other:?}"))),
        }
    }

    fn term_or_var(&mut self) -> Result<TermOrVar, SparqlError> {
        let pos = self.pos();
        match self.next() {
            Some(Tok::Var(v)) => Ok(TermOrVar::Var(v)),
            Some(Tok::Term(t)) => Ok(TermOrVar::Term(t)),
            Some(Tok::A) => Ok(TermOrVar::Term(RdfTerm::Iri(RDF_TYPE.to_string()))),
            other => Err(err(pos, format!("expected a term, got {other:?}"))),
        }
    }

    fn filter_atom(&mut self) -> Result<SparqlFilter, SparqlError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Bang) => {
                self.next();
                Ok(SparqlFilter::not(self.filter_atom()?))
            }
            Some(Tok::Sym('(')) => {
                self.next();
                let f = self.filter_expr()?;
                self.expect_sym(')')?;
                Ok(f)
            }
            Some(Tok::Kw(k)) if k == "BOUND" => {
                self.next();
                self.expect_sym('(')?;
                let pos_v = self.pos();
                let v = match self.next() {
                    Some(Tok::Var(v)) => v,
                    other => return Err(err(pos_v, format!("BOUND takes a variable, got {other:?}"))),
                };
                self.expect_sym(')')?;
                Ok(SparqlFilter::Bound(v))
            }
            _ => {
                let lhs = self.term_or_var()?;
                self.expect_sym('=')?;
                let rhs = self.term_or_var()?;
                Ok(match (lhs, rhs) {
                    (TermOrVar::Var(v), TermOrVar::Var(w)) => SparqlFilter::EqVV(v, w),
                    (TermOrVar::Var(v), TermOrVar::Term(c))
                    | (TermOrVar::Term(c), TermOrVar::Var(v)) => SparqlFilter::EqVC(v, c),
                    (TermOrVar::Term(c1), TermOrVar::Term(c2)) => {
                        if c1 == c2 {
                            SparqlFilter::True
                        } else {
                            return Err(err(pos, "constant inequality filter"));
                        }
                    }
                })
            }
        }
    }

    fn filter_and(&mut self) -> Result<SparqlFilter, SparqlError> {
        let mut f = self.filter_atom()?;
        while self.peek() == Some(&Tok::AndAnd) {
            self.next();
            f = SparqlFilter::and(f, self.filter_atom()?);
        }
        Ok(f)
    }

    fn filter_expr(&mut self) -> Result<SparqlFilter, SparqlError> {
        let mut f = self.filter_and()?;
        while self.peek() == Some(&Tok::OrOr) {
            self.next();
            f = SparqlFilter::or(f, self.filter_and()?);
        }
        Ok(f)
    }

    fn braced_group(&mut self) -> Result<GraphPattern, SparqlError> {
        self.expect_sym('{')?;
        let g = self.group()?;
        self.expect_sym('}')?;
        Ok(g)
    }

    /// A group body; `}` or end of input terminates it.
    fn group(&mut self) -> Result<GraphPattern, SparqlError> {
        let mut current: Option<GraphPattern> = None;
        let mut filters: Vec<SparqlFilter> = Vec::new();
        loop {
            match self.peek() {
                None | Some(Tok::Sym('}')) => break,
                Some(Tok::Sym('.')) => {
                    self.next();
                }
                Some(Tok::Kw(k)) if k == "OPTIONAL" => {
                    self.next();
                    let rhs = self.braced_group()?;
                    let lhs = current.take().unwrap_or(GraphPattern::Bgp(vec![]));
                    current = Some(GraphPattern::Opt(
                        Box::new(lhs),
                        Box::new(rhs),
                        SparqlFilter::True,
                    ));
                }
                Some(Tok::Kw(k)) if k == "MINUS" => {
                    self.next();
                    let rhs = self.braced_group()?;
                    let lhs = current.take().unwrap_or(GraphPattern::Bgp(vec![]));
                    current = Some(GraphPattern::Minus(Box::new(lhs), Box::new(rhs)));
                }
                Some(Tok::Kw(k)) if k == "FILTER" => {
                    self.next();
                    self.expect_sym('(')?;
                    filters.push(self.filter_expr()?);
                    self.expect_sym(')')?;
                }
                Some(Tok::Kw(k)) if k == "BIND" => {
                    self.next();
                    self.expect_sym('(')?;
                    let pos_c = self.pos();
                    let TermOrVar::Term(c) = self.term_or_var()? else {
                        return Err(err(pos_c, "BIND source must be a constant"));
                    };
                    self.expect_kw("AS")?;
                    let pos_v = self.pos();
                    let v = match self.next() {
                        Some(Tok::Var(v)) => v,
                        other => {
                            return Err(err(pos_v, format!("BIND target must be a variable, got {other:?}")))
                        }
                    };
                    self.expect_sym(')')?;
                    let lhs = current.take().unwrap_or(GraphPattern::Bgp(vec![]));
                    current = Some(GraphPattern::Bind(Box::new(lhs), v, c));
                }
                Some(Tok::Sym('{')) => {
                    let first = self.braced_group()?;
                    let elem = if matches!(self.peek(), Some(Tok::Kw(k)) if k == "UNION") {
                        self.next();
                        let second = self.braced_group()?;
                        let mut u = GraphPattern::Union(Box::new(first), Box::new(second));
                        while matches!(self.peek(), Some(Tok::Kw(k)) if k == "UNION") {
                            self.next();
                            let more = self.braced_group()?;
                            u = GraphPattern::Union(Box::new(u), Box::new(more));
                        }
                        u
                    } else {
                        first
                    };
                    current = Some(match current.take() {
                        None => elem,
                        Some(lhs) => GraphPattern::Join(Box::new(lhs), Box::new(elem)),
                    });
                }
                Some(Tok::Kw(k)) => return Err(SparqlError::Unsupported(k.clone())),
                _ => {
                    let bgp = self.triples_block()?;
                    current = Some(match current.take() {
                        None => bgp,
                        // merge adjacent triple blocks into one BGP
                        Some(GraphPattern::Bgp(mut tps)) => {
                            let GraphPattern::Bgp(more) = bgp else { unreachable!() };
                            tps.extend(more);
                            GraphPattern::Bgp(tps)
                        }
                        Some(lhs) => GraphPattern::Join(Box::new(lhs), Box::new(bgp)),
                    });
                }
            }
        }
        let mut p = current.unwrap_or(GraphPattern::Bgp(vec![]));
        for f in filters {
            p = GraphPattern::Filter(Box::new(p), f);
        }
        Ok(p)
    }

    fn triples_block(&mut self) -> Result<GraphPattern, SparqlError> {
        let mut tps = Vec::new();
        loop {
            let sub = self.term_or_var()?;
            let pred = self.term_or_var()?;
            let obj = self.term_or_var()?;
            tps.push(TriplePattern::new(sub, pred, obj)?);
            if self.peek() == Some(&Tok::Sym('.')) {
                self.next();
                // `.` may close the block or continue it
                match self.peek() {
                    Some(Tok::Var(_)) | Some(Tok::Term(_)) | Some(Tok::A) => continue,
                    _ => break,
                }
            }
            break;
        }
        Ok(GraphPattern::Bgp(tps))
    }
}

pub fn parse_sparql(input: &str) -> Result<GraphPattern, SparqlError> {
    let toks = tokenize(input)?;
    let mut p = Parser { toks, idx: 0 };
    p.expect_kw("SELECT")?;
    let distinct = if matches!(p.peek(), Some(Tok::Kw(k)) if k == "DISTINCT") {
        p.next();
        true
    } else {
        false
    };
    let mut proj: Option<BTreeSet<String>> = None;
    if p.peek() == Some(&Tok::Star) {
        p.next();
    } else {
        let mut vars = BTreeSet::new();
        while let Some(Tok::Var(_)) = p.peek() {
            let Some(Tok::Var(v)) = p.next() else { unreachable!() };
            vars.insert(v);
        }
        if vars.is_empty() {
            return Err(err(p.pos(), "SELECT needs variables or *"));
        }
        proj = Some(vars);
    }
    p.expect_kw("WHERE")?;
    let mut pattern = p.braced_group()?;
    if let Some(tok) = p.peek() {
        if let Tok::Kw(k) = tok {
            return Err(SparqlError::Unsupported(k.clone()));
        }
        return Err(err(p.pos(), format!("trailing input: {tok:?}")));
    }
    if let Some(vars) = proj {
        pattern = GraphPattern::Proj(Box::new(pattern), vars);
    }
    if distinct {
        pattern = GraphPattern::Dist(Box::new(pattern));
    }
    validate(&pattern)?;
    Ok(pattern)
}
