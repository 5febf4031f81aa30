//! Message terms, their text syntax, and one-sided pattern matching.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::strand::{MatchModulo, Renaming};

/// A crypto-level message. Sequences are kept flat: no item of a `Seq` or
/// of an encryption body is itself a `Seq`, and a `Seq` has at least two
/// items. Use [`Term::seq`] and [`Term::enc`] to build canonical terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Value(String),
    Nonce(String),
    SymKey(String),
    PubKey(Box<Term>),
    PrivKey(Box<Term>),
    Principal(String),
    Tag(String),
    Seq(Vec<Term>),
    Enc(Vec<Term>, Box<Term>),
    Var(String),
}

/// Variable bindings produced by matching.
pub type Bindings = BTreeMap<String, Term>;

impl Term {
    pub fn value(s: &str) -> Term {
        Term::Value(s.into())
    }
    pub fn nonce(s: &str) -> Term {
        Term::Nonce(s.into())
    }
    pub fn key(s: &str) -> Term {
        Term::SymKey(s.into())
    }
    pub fn principal(s: &str) -> Term {
        Term::Principal(s.into())
    }
    pub fn tag(s: &str) -> Term {
        Term::Tag(s.into())
    }
    pub fn var(s: &str) -> Term {
        Term::Var(s.into())
    }
    pub fn pk(of: &str) -> Term {
        Term::PubKey(Box::new(Term::principal(of)))
    }
    pub fn sk(of: &str) -> Term {
        Term::PrivKey(Box::new(Term::principal(of)))
    }

    /// Concatenation, flattened. A single item is returned as is.
    pub fn seq(items: impl IntoIterator<Item = Term>) -> Term {
        let mut flat = Vec::new();
        for t in items {
            t.push_flat(&mut flat);
        }
        if flat.len() == 1 {
            flat.pop().expect("one item")
        } else {
            Term::Seq(flat)
        }
    }

    /// `{items}key`, with the body flattened.
    pub fn enc(items: impl IntoIterator<Item = Term>, key: Term) -> Term {
        let mut flat = Vec::new();
        for t in items {
            t.push_flat(&mut flat);
        }
        Term::Enc(flat, Box::new(key))
    }

    fn push_flat(self, out: &mut Vec<Term>) {
        match self {
            Term::Seq(items) => out.extend(items),
            t => out.push(t),
        }
    }

    /// The items of a sequence, or the term itself.
    pub fn items(&self) -> &[Term] {
        match self {
            Term::Seq(items) => items,
            t => std::slice::from_ref(t),
        }
    }

    pub fn is_seq(&self) -> bool {
        matches!(self, Term::Seq(_))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::PubKey(t) | Term::PrivKey(t) => t.is_ground(),
            Term::Seq(items) => items.iter().all(Term::is_ground),
            Term::Enc(body, k) => body.iter().all(Term::is_ground) && k.is_ground(),
            _ => true,
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            if let Term::Var(v) = t {
                out.insert(v.clone());
            }
        });
        out
    }

    /// Pre-order walk over every subterm, keys included.
    pub fn visit(&self, f: &mut impl FnMut(&Term)) {
        f(self);
        match self {
            Term::PubKey(t) | Term::PrivKey(t) => t.visit(f),
            Term::Seq(items) => items.iter().for_each(|t| t.visit(f)),
            Term::Enc(body, k) => {
                body.iter().for_each(|t| t.visit(f));
                k.visit(f);
            }
            _ => {}
        }
    }

    pub fn contains(&self, needle: &Term) -> bool {
        let mut hit = false;
        self.visit(&mut |t| hit |= t == needle);
        hit
    }

    /// Names of nonces and symmetric keys occurring anywhere in the term.
    pub fn fresh_atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            if let Term::Nonce(n) | Term::SymKey(n) = t {
                out.insert(n.clone());
            }
        });
        out
    }

    /// The decryption key for material encrypted under `self`.
    pub fn inverse(&self) -> Option<Term> {
        match self {
            Term::PubKey(a) => Some(Term::PrivKey(a.clone())),
            Term::PrivKey(a) => Some(Term::PubKey(a.clone())),
            Term::SymKey(_) => Some(self.clone()),
            _ => None,
        }
    }

    /// Replaces bound variables, leaving unbound ones in place.
    pub fn subst(&self, b: &Bindings) -> Term {
        self.map_leaves(&mut |t| match t {
            Term::Var(v) => b.get(v).cloned(),
            _ => None,
        })
    }

    /// Renames nonce and symmetric-key atoms.
    pub fn rename_fresh(&self, ren: &BTreeMap<String, String>) -> Term {
        self.map_leaves(&mut |t| match t {
            Term::Nonce(n) => ren.get(n).map(|m| Term::Nonce(m.clone())),
            Term::SymKey(n) => ren.get(n).map(|m| Term::SymKey(m.clone())),
            _ => None,
        })
    }

    /// Rebuilds the term, replacing any leaf for which `f` returns a term.
    /// Replacements are re-flattened.
    pub fn map_leaves(&self, f: &mut impl FnMut(&Term) -> Option<Term>) -> Term {
        match self {
            Term::PubKey(t) => Term::PubKey(Box::new(t.map_leaves(f))),
            Term::PrivKey(t) => Term::PrivKey(Box::new(t.map_leaves(f))),
            Term::Seq(items) => Term::seq(items.iter().map(|t| t.map_leaves(f))),
            Term::Enc(body, k) => {
                let body: Vec<Term> = body.iter().map(|t| t.map_leaves(f)).collect();
                Term::enc(body, k.map_leaves(f))
            }
            leaf => f(leaf).unwrap_or_else(|| leaf.clone()),
        }
    }
}

/// Matches a pattern against a ground term, extending `b`. Variables stand
/// for single non-sequence terms, so sequences match item by item.
pub fn match_term(pattern: &Term, ground: &Term, b: &mut Bindings) -> bool {
    match (pattern, ground) {
        (Term::Var(v), g) => match b.get(v) {
            Some(bound) => bound == g,
            None if g.is_seq() => false,
            None => {
                b.insert(v.clone(), g.clone());
                true
            }
        },
        (Term::Seq(ps), Term::Seq(gs)) => match_all(ps, gs, b),
        (Term::Enc(pb, pk), Term::Enc(gb, gk)) => match_all(pb, gb, b) && match_term(pk, gk, b),
        (Term::PubKey(p), Term::PubKey(g)) | (Term::PrivKey(p), Term::PrivKey(g)) => {
            match_term(p, g, b)
        }
        (p, g) => p == g,
    }
}

fn match_all(ps: &[Term], gs: &[Term], b: &mut Bindings) -> bool {
    ps.len() == gs.len() && ps.iter().zip(gs).all(|(p, g)| match_term(p, g, b))
}

/// Matching that leaves `b` untouched on failure.
pub fn try_match(pattern: &Term, ground: &Term, b: &Bindings) -> Option<Bindings> {
    let mut nb = b.clone();
    match_term(pattern, ground, &mut nb).then_some(nb)
}

/// Equality up to a bijective renaming of nonces and symmetric keys.
impl MatchModulo for Term {
    fn match_modulo(&self, other: &Self, ren: &mut Renaming) -> bool {
        match (self, other) {
            (Term::Nonce(a), Term::Nonce(b)) => ren.bind(&format!("n:{a}"), &format!("n:{b}")),
            (Term::SymKey(a), Term::SymKey(b)) => ren.bind(&format!("k:{a}"), &format!("k:{b}")),
            (Term::PubKey(a), Term::PubKey(b)) | (Term::PrivKey(a), Term::PrivKey(b)) => {
                a.match_modulo(b, ren)
            }
            (Term::Seq(a), Term::Seq(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.match_modulo(y, ren))
            }
            (Term::Enc(a, ka), Term::Enc(b, kb)) => {
                a.len() == b.len()
                    && a.iter().zip(b).all(|(x, y)| x.match_modulo(y, ren))
                    && ka.match_modulo(kb, ren)
            }
            (a, b) => a == b,
        }
    }
}

fn write_items(f: &mut fmt::Formatter<'_>, items: &[Term]) -> fmt::Result {
    for (i, t) in items.iter().enumerate() {
        if i > 0 {
            f.write_str("^")?;
        }
        write!(f, "{t}")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Value(s)
            | Term::Nonce(s)
            | Term::SymKey(s)
            | Term::Principal(s)
            | Term::Tag(s) => f.write_str(s),
            Term::Var(v) => write!(f, "?{v}"),
            Term::PubKey(t) => write!(f, "pk({t})"),
            Term::PrivKey(t) => write!(f, "sk({t})"),
            Term::Seq(items) => write_items(f, items),
            Term::Enc(body, k) => {
                f.write_str("{")?;
                match body.split_first() {
                    Some((tag @ Term::Tag(_), rest)) if !rest.is_empty() => {
                        write!(f, "{tag} ")?;
                        write_items(f, rest)?;
                    }
                    _ => write_items(f, body)?,
                }
                write!(f, "}}{k}")
            }
        }
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// What a bare identifier denotes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomKind {
    Value,
    Nonce,
    SymKey,
    Principal,
    Tag,
    Var,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("col {col}: {message}")]
pub struct TermParseError {
    pub col: usize,
    pub message: String,
}

/// A table of declared identifiers for parsing standalone terms.
#[derive(Clone, Debug, Default)]
pub struct Symbols {
    pub kinds: BTreeMap<String, AtomKind>,
}

impl Symbols {
    pub fn declare(&mut self, name: &str, kind: AtomKind) -> Option<AtomKind> {
        self.kinds.insert(name.to_string(), kind)
    }

    pub fn kind(&self, name: &str) -> Option<AtomKind> {
        self.kinds.get(name).copied().or_else(|| {
            // Instance-renamed fresh atoms `N@C0` keep the kind of `N`.
            let (base, _) = name.split_once('@')?;
            self.kinds
                .get(base)
                .copied()
                .filter(|k| matches!(k, AtomKind::Nonce | AtomKind::SymKey))
        })
    }

    pub fn parse(&self, src: &str) -> Result<Term, TermParseError> {
        parse_term(src, &|n| self.kind(n))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Caret,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '@' | '.' | '\'' | '#')
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, TermParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            c if c.is_whitespace() => i += 1,
            '{' | '}' | '(' | ')' | '^' => {
                out.push((
                    match c {
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        _ => Tok::Caret,
                    },
                    col,
                ));
                i += 1;
            }
            '?' => {
                let start = i + 1;
                i = start;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                if i == start {
                    return Err(TermParseError {
                        col,
                        message: "`?` must be followed by a variable name".into(),
                    });
                }
                out.push((Tok::Var(chars[start..i].iter().collect()), col));
            }
            c if is_ident_char(c) => {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            }
            other => {
                return Err(TermParseError {
                    col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct TermParser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    resolve: &'a dyn Fn(&str) -> Option<AtomKind>,
}

impl TermParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, TermParseError> {
        Err(TermParseError {
            col: self.col(),
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), TermParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    /// `unit ('^' unit)*`
    fn seq(&mut self) -> Result<Term, TermParseError> {
        let mut items = vec![self.unit()?];
        while self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            items.push(self.unit()?);
        }
        Ok(Term::seq(items))
    }

    fn starts_unit(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(_) | Tok::Var(_) | Tok::LBrace))
    }

    fn unit(&mut self) -> Result<Term, TermParseError> {
        match self.peek().cloned() {
            Some(Tok::Var(v)) => {
                self.pos += 1;
                Ok(Term::Var(v))
            }
            Some(Tok::LBrace) => {
                self.pos += 1;
                let mut body = Vec::new();
                while self.starts_unit() {
                    body.push(self.seq()?);
                }
                self.expect(Tok::RBrace, "`}`")?;
                if !self.starts_unit() {
                    return self.err("expected a key after `}`");
                }
                let key = self.unit()?;
                Ok(Term::enc(body, key))
            }
            Some(Tok::Ident(name))
                if (name == "pk" || name == "sk")
                    && self.toks.get(self.pos + 1).map(|t| &t.0) == Some(&Tok::LParen) =>
            {
                self.pos += 2;
                let inner = self.unit()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(if name == "pk" {
                    Term::PubKey(Box::new(inner))
                } else {
                    Term::PrivKey(Box::new(inner))
                })
            }
            Some(Tok::Ident(name)) => {
                let Some(kind) = (self.resolve)(&name) else {
                    return self.err(format!("undeclared identifier `{name}`"));
                };
                self.pos += 1;
                Ok(match kind {
                    AtomKind::Value => Term::Value(name),
                    AtomKind::Nonce => Term::Nonce(name),
                    AtomKind::SymKey => Term::SymKey(name),
                    AtomKind::Principal => Term::Principal(name),
                    AtomKind::Tag => Term::Tag(name),
                    AtomKind::Var => Term::Var(name),
                })
            }
            _ => self.err("expected a term"),
        }
    }
}

/// Parses `src` as one term. Juxtaposition inside braces concatenates, so
/// `{cs C^B^N1}pk(S)` has a four-item body. `?x` is always a variable;
/// other identifiers are classified by `resolve`.
pub fn parse_term(
    src: &str,
    resolve: &dyn Fn(&str) -> Option<AtomKind>,
) -> Result<Term, TermParseError> {
    let toks = lex(src)?;
    let mut p = TermParser {
        toks,
        pos: 0,
        end: src.chars().count() + 1,
        resolve,
    };
    let t = p.seq()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(t)
}
