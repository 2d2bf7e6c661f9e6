//! Parser for the canonical s-expression pattern syntax, the source of
//! truth for tests:
//! `(bgp t...)`, `(filter P F)`, `(bind P ?v const)`, `(union P P)`,
//! `(join P P)`, `(opt P P F)`, `(minus P P)`, `(proj P (?v...))`,
//! `(dist P)`; filters `true`, `(bound ?v)`, `(= a b)`, `(and F F)`,
//! `(not F)`, `(or F F)`.

use crate::model::RdfTerm;
use crate::sparql::{
    validate, GraphPattern, SparqlError, SparqlFilter, TermOrVar, TriplePattern,
};

#[derive(Debug)]
enum SExpr {
    Atom(String, usize),
    List(Vec<SExpr>, usize),
}

impl SExpr {
    fn pos(&self) -> usize {
        match self {
            SExpr::Atom(_, p) | SExpr::List(_, p) => *p,
        }
    }
}

fn err(pos: usize, msg: impl Into<String>) -> SparqlError {
    SparqlError::Syntax { pos, msg: msg.into() }
}

struct Tokens {
    toks: Vec<(String, usize)>,
    idx: usize,
}

fn tokenize(input: &str) -> Result<Tokens, SparqlError> {
    let mut toks = Vec::new();
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' || c == ')' {
            toks.push((c.to_string(), i));
            i += 1;
        } else if c == '<' {
            let start = i;
            let end = input[i..]
                .find('>')
                .ok_or_else(|| err(i, "unterminated IRI"))?;
            toks.push((input[start..i + end + 1].to_string(), start));
            i += end + 1;
        } else if c == '"' {
            let start = i;
            let mut j = i + 1;
            while j < bytes.len() {
                match bytes[j] {
                    b'\\' => j += 2,
                    b'"' => break,
                    _ => j += 1,
                }
            }
            if j >= bytes.len() {
                return Err(err(start, "unterminated literal"));
            }
            j += 1;
            // optional ^^<dt> or @lang suffix
            if input[j..].starts_with("^^<") {
                let end = input[j..]
                    .find('>')
                    .ok_or_else(|| err(j, "unterminated datatype"))?;
                j += end + 1;
            } else if input[j..].starts_with('@') {
                while j < bytes.len() && !(bytes[j] as char).is_whitespace() && bytes[j] != b')' {
                    j += 1;
                }
            }
            toks.push((input[start..j].to_string(), start));
            i = j;
        } else {
            let start = i;
            while i < bytes.len() {
                let c = bytes[i] as char;
                if c.is_whitespace() || c == '(' || c == ')' {
                    break;
                }
                i += 1;
            }
            toks.push((input[start..i].to_string(), start));
        }
    }
    Ok(Tokens { toks, idx: 0 })
}

fn read_sexpr(t: &mut Tokens) -> Result<SExpr, SparqlError> {
    let Some((tok, pos)) = t.toks.get(t.idx).cloned() else {
        return Err(err(usize::MAX, "unexpected end of input"));
    };
    t.idx += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match t.toks.get(t.idx) {
                    Some((close, _)) if close == ")" => {
                        t.idx += 1;
                        return Ok(SExpr::List(items, pos));
                    }
                    Some(_) => items.push(read_sexpr(t)?),
                    None => return Err(err(pos, "unclosed '('")),
                }
            }
        }
        ")" => Err(err(pos, "unexpected ')'")),
        _ => Ok(SExpr::Atom(tok, pos)),
    }
}

fn parse_term_atom(atom: &str, pos: usize) -> Result<RdfTerm, SparqlError> {
    if let Some(body) = atom.strip_prefix('<').and_then(|s| s.strip_suffix('>')) {
        if body.is_empty() {
            return Err(err(pos, "empty IRI"));
        }
        return Ok(RdfTerm::Iri(body.to_string()));
    }
    if let Some(label) = atom.strip_prefix("_:") {
        return Ok(RdfTerm::Blank(label.to_string()));
    }
    if atom.starts_with('"') {
        let close = atom
            .char_indices()
            .skip(1)
            .scan(false, |esc, (i, c)| {
                if *esc {
                    *esc = false;
                    Some(None)
                } else if c == '\\' {
                    *esc = true;
                    Some(None)
                } else if c == '"' {
                    Some(Some(i))
                } else {
                    Some(None)
                }
            })
            .flatten()
            .next()
            .ok_or_else(|| err(pos, "unterminated literal"))?;
        let lex = atom[1..close].replace("\\\"", "\"").replace("\\\\", "\\");
        let suffix = &atom[close + 1..];
        if suffix.is_empty() {
            return Ok(RdfTerm::Literal(lex, None));
        }
        if let Some(dt) = suffix.strip_prefix("^^<").and_then(|s| s.strip_suffix('>')) {
            return Ok(RdfTerm::Literal(lex, Some(dt.to_string())));
        }
        if let Some(lang) = suffix.strip_prefix('@') {
            return Ok(RdfTerm::Literal(lex, Some(format!("@{lang}"))));
        }
        return Err(err(pos, format!("bad literal suffix: {suffix}")));
    }
    Err(err(pos, format!("expected a term, got `{atom}`")))
}

fn parse_term_or_var(e: &SExpr) -> Result<TermOrVar, SparqlError> {
    match e {
        SExpr::Atom(a, pos) => {
            if let Some(v) = a.strip_prefix('?') {
                if v.is_empty() {
                    return Err(err(*pos, "empty variable name"));
                }
                Ok(TermOrVar::Var(v.to_string()))
            } else {
                Ok(TermOrVar::Term(parse_term_atom(a, *pos)?))
            }
        }
        SExpr::List(_, pos) => Err(err(*pos, "expected a term or variable")),
    }
}

fn parse_filter(e: &SExpr) -> Result<SparqlFilter, SparqlError> {
    match e {
        SExpr::Atom(a, pos) => match a.as_str() {
            "true" => Ok(SparqlFilter::True),
            _ => Err(err(*pos, format!("unknown filter `{a}`"))),
        },
        SExpr::List(items, pos) => {
            let head = match items.first() {
                Some(SExpr::Atom(h, _)) => h.as_str(),
                _ => return Err(err(*pos, "empty filter form")),
            };
            match (head, items.len()) {
                ("bound", 2) => match parse_term_or_var(&items[1])? {
                    TermOrVar::Var(v) => Ok(SparqlFilter::Bound(v)),
                    _ => Err(err(items[1].pos(), "bound takes a variable")),
                },
                ("=", 3) => {
                    let a = parse_term_or_var(&items[1])?;
                    let b = parse_term_or_var(&items[2])?;
                    Ok(match (a, b) {
                        (TermOrVar::Var(v), TermOrVar::Var(w)) => SparqlFilter::EqVV(v, w),
                        (TermOrVar::Var(v), TermOrVar::Term(c))
                        | (TermOrVar::Term(c), TermOrVar::Var(v)) => SparqlFilter::EqVC(v, c),
                        (TermOrVar::Term(c1), TermOrVar::Term(c2)) => {
                            if c1 == c2 {
                                SparqlFilter::True
                            } else {
                                SparqlFilter::not(SparqlFilter::True)
                            }
                        }
                    })
                }
                ("and", 3) => Ok(SparqlFilter::and(
                    parse_filter(&items[1])?,
                    parse_filter(&items[2])?,
                )),
                ("or", 3) => Ok(SparqlFilter::or(
                    parse_filter(&items[1])?,
                    parse_filter(&items[2])?,
                )),
                ("not", 2) => Ok(SparqlFilter::not(parse_filter(&items[1])?)),
                _ => Err(err(*pos, format!("bad filter form `{head}`"))),
            }
        }
    }
}

fn parse_pattern(e: &SExpr) -> Result<GraphPattern, SparqlError> {
    let SExpr::List(items, pos) = e else {
        return Err(err(e.pos(), "expected a pattern form"));
    };
    let head = match items.first() {
        Some(SExpr::Atom(h, _)) => h.as_str(),
        _ => return Err(err(*pos, "empty pattern form")),
    };
    match (head, items.len()) {
        ("bgp", _) => {
            let mut tps = Vec::new();
            for item in &items[1..] {
                let SExpr::List(slots, tpos) = item else {
                    return Err(err(item.pos(), "triple pattern must be a list"));
                };
                if slots.len() != 3 {
                    return Err(err(*tpos, "triple pattern needs 3 slots"));
                }
                tps.push(TriplePattern::new(
                    parse_term_or_var(&slots[0])?,
                    parse_term_or_var(&slots[1])?,
                    parse_term_or_var(&slots[2])?,
                )?);
            }
            Ok(GraphPattern::Bgp(tps))
        }
        ("filter", 3) => Ok(GraphPattern::Filter(
            Box::new(parse_pattern(&items[1])?),
            parse_filter(&items[2])?,
        )),
        ("bind", 4) => {
            let p = parse_pattern(&items[1])?;
            let TermOrVar::Var(v) = parse_term_or_var(&items[2])? else {
                return Err(err(items[2].pos(), "bind target must be a variable"));
            };
            let TermOrVar::Term(c) = parse_term_or_var(&items[3])? else {
                return Err(err(items[3].pos(), "bind source must be a constant"));
            };
            Ok(GraphPattern::Bind(Box::new(p), v, c))
        }
        ("union", 3) => Ok(GraphPattern::Union(
            Box::new(parse_pattern(&items[1])?),
            Box::new(parse_pattern(&items[2])?),
        )),
        ("join", 3) => Ok(GraphPattern::Join(
            Box::new(parse_pattern(&items[1])?),
            Box::new(parse_pattern(&items[2])?),
        )),
        ("opt", 4) => Ok(GraphPattern::Opt(
            Box::new(parse_pattern(&items[1])?),
            Box::new(parse_pattern(&items[2])?),
            parse_filter(&items[3])?,
        )),
        ("minus", 3) => Ok(GraphPattern::Minus(
            Box::new(parse_pattern(&items[1])?),
            Box::new(parse_pattern(&items[2])?),
        )),
        ("proj", 3) => {
            let p = parse_pattern(&items[1])?;
            let SExpr::List(vars, _) = &items[2] else {
                return Err(err(items[2].pos(), "proj takes a variable list"));
            };
            let mut l = std::collections::BTreeSet::new();
            for v in vars {
                match parse_term_or_var(v)? {
                    TermOrVar::Var(name) => {
                        l.insert(name);
                    }
                    _ => return Err(err(v.pos(), "proj list holds variables only")),
                }
            }
            Ok(GraphPattern::Proj(Box::new(p), l))
        }
        ("dist", 2) => Ok(GraphPattern::Dist(Box::new(parse_pattern(&items[1])?))),
        _ => Err(err(*pos, format!("unknown pattern form `{head}`"))),
    }
}

pub fn parse_algebra(input: &str) -> Result<GraphPattern, SparqlError> {
    let mut toks = tokenize(input)?;
    let e = read_sexpr(&mut toks)?;
    if toks.idx != toks.toks.len() {
        return Err(err(
            toks.toks[toks.idx].1,
            "trailing input after pattern",
        ));
    }
    let p = parse_pattern(&e)?;
    validate(&p)?;
    Ok(p)
}
