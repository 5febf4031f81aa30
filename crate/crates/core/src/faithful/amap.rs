//! Abstraction maps: partial functions from concrete terms to abstract
//! interactions, given as ordered `pattern => op<args>` rules.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::abs::AbsEvent;
use crate::chor::{AbstractMessage, OpLabel, Role};
use crate::crypto::{try_match, Bindings, Symbols, Term};

/// One argument of a rule result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Extractor {
    /// The value bound to a pattern variable.
    Var(String),
    /// A declared value or principal name.
    Const(String),
    Boxed {
        contents: Vec<Extractor>,
        from: Role,
        to: Role,
    },
}

impl fmt::Display for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extractor::Var(v) => write!(f, "?{v}"),
            Extractor::Const(c) => f.write_str(c),
            Extractor::Boxed { contents, from, to } => {
                f.write_str("box[")?;
                write_args(f, contents)?;
                write!(f, "]{{{from},{to}}}")
            }
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Extractor]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub pattern: Term,
    pub op: OpLabel,
    pub args: Vec<Extractor>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => {}<", self.pattern, self.op)?;
        write_args(f, &self.args)?;
        f.write_str(">")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AbstractionMap {
    pub rules: Vec<Rule>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct AmapError {
    pub line: usize,
    pub message: String,
}

/// The top-level tag of a `{tag ...}key` pattern.
fn top_tag(p: &Term) -> Option<&str> {
    match p {
        Term::Enc(body, _) => match body.first() {
            Some(Term::Tag(t)) => Some(t),
            _ => None,
        },
        _ => None,
    }
}

/// Variables occurring inside the body of some encryption.
fn vars_under_enc(t: &Term, inside: bool, out: &mut BTreeSet<String>) {
    match t {
        Term::Var(v) if inside => {
            out.insert(v.clone());
        }
        Term::Seq(items) => items.iter().for_each(|i| vars_under_enc(i, inside, out)),
        Term::Enc(body, _) => body.iter().for_each(|i| vars_under_enc(i, true, out)),
        _ => {}
    }
}

struct ArgParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl ArgParser<'_> {
    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len()
            && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_')
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
    }

    /// Arguments up to (not including) `close`.
    fn args(&mut self, close: u8) -> Result<Vec<Extractor>, String> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.arg()?);
            if self.eat(close) {
                return Ok(out);
            }
            if !self.eat(b',') {
                return Err(format!("expected `,` or `{}`", close as char));
            }
        }
    }

    fn arg(&mut self) -> Result<Extractor, String> {
        if self.eat(b'?') {
            return self
                .ident()
                .map(Extractor::Var)
                .ok_or_else(|| "expected a variable name".to_string());
        }
        let Some(id) = self.ident() else {
            return Err("expected an argument".into());
        };
        if id != "box" {
            return Ok(Extractor::Const(id));
        }
        if !self.eat(b'[') {
            return Err("expected `[` after box".into());
        }
        let contents = self.args(b']')?;
        if !self.eat(b'{') {
            return Err("expected `{` after box contents".into());
        }
        let from = self.ident().ok_or("expected a role")?;
        if !self.eat(b',') {
            return Err("expected `,` between box roles".into());
        }
        let to = self.ident().ok_or("expected a role")?;
        if !self.eat(b'}') {
            return Err("expected `}`".into());
        }
        Ok(Extractor::Boxed {
            contents,
            from: Role(from),
            to: Role(to),
        })
    }
}

fn collect_vars(args: &[Extractor], boxed: bool, out: &mut Vec<(String, bool)>) {
    for a in args {
        match a {
            Extractor::Var(v) => out.push((v.clone(), boxed)),
            Extractor::Const(_) => {}
            Extractor::Boxed { contents, .. } => collect_vars(contents, true, out),
        }
    }
}

impl AbstractionMap {
    /// Parses rules, resolving bare identifiers in patterns with `symbols`.
    pub fn parse(src: &str, symbols: &Symbols) -> Result<AbstractionMap, AmapError> {
        let mut rules: Vec<Rule> = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| AmapError { line, message };
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let Some((pat, res)) = text.split_once("=>") else {
                return Err(err("expected `pattern => op<args>`".into()));
            };
            let pattern = symbols.parse(pat).map_err(|e| err(e.to_string()))?;
            let Some(tag) = top_tag(&pattern) else {
                return Err(err(
                    "pattern must be a tagged encryption `{tag ...}key`".into()
                ));
            };
            if let Some(prev) = rules.iter().find(|r| top_tag(&r.pattern) == Some(tag)) {
                return Err(err(format!("tag `{tag}` already used by rule `{prev}`")));
            }
            let mut ap = ArgParser {
                s: res.as_bytes(),
                pos: 0,
            };
            let op = ap
                .ident()
                .ok_or_else(|| err("expected an op label".into()))?;
            if !ap.eat(b'<') {
                return Err(err("expected `<` after the op label".into()));
            }
            let args = ap.args(b'>').map_err(err)?;
            ap.ws();
            if ap.pos != ap.s.len() {
                return Err(err("unexpected trailing input".into()));
            }
            let pvars = pattern.vars();
            let mut sealed = BTreeSet::new();
            vars_under_enc(&pattern, false, &mut sealed);
            let mut used = Vec::new();
            collect_vars(&args, false, &mut used);
            for (v, boxed) in used {
                if !pvars.contains(&v) {
                    return Err(err(format!("`?{v}` does not occur in the pattern")));
                }
                if boxed && !sealed.contains(&v) {
                    return Err(err(format!(
                        "boxed `?{v}` is not under an encryption in the pattern"
                    )));
                }
            }
            check_consts(&args, symbols).map_err(err)?;
            rules.push(Rule {
                pattern,
                op: OpLabel(op),
                args,
            });
        }
        Ok(AbstractionMap { rules })
    }

    /// The first matching rule's result, or `None` where the map is
    /// undefined. A match whose extracted parts are not plain values or
    /// principal names is also undefined.
    pub fn apply(&self, t: &Term) -> Option<(OpLabel, Vec<AbstractMessage>)> {
        self.rules.iter().find_map(|r| {
            let b = try_match(&r.pattern, t, &Bindings::new())?;
            let payload = r
                .args
                .iter()
                .map(|a| extract(a, &b))
                .collect::<Option<Vec<_>>>()?;
            Some((r.op.clone(), payload))
        })
    }

    pub fn event(&self, t: &Term) -> Option<AbsEvent> {
        self.apply(t)
            .map(|(op, payload)| AbsEvent::Interaction { op, payload })
    }
}

fn check_consts(args: &[Extractor], symbols: &Symbols) -> Result<(), String> {
    use crate::crypto::AtomKind;
    for a in args {
        match a {
            Extractor::Const(c) => match symbols.kind(c) {
                Some(AtomKind::Value | AtomKind::Principal) | None => {}
                Some(k) => {
                    return Err(format!(
                        "`{c}` is a {k:?}; results may hold only values and names"
                    ))
                }
            },
            Extractor::Boxed { contents, .. } => check_consts(contents, symbols)?,
            Extractor::Var(_) => {}
        }
    }
    Ok(())
}

fn extract(a: &Extractor, b: &Bindings) -> Option<AbstractMessage> {
    match a {
        Extractor::Var(v) => match b.get(v)? {
            Term::Value(x) | Term::Principal(x) => Some(AbstractMessage::Value(x.clone())),
            _ => None,
        },
        Extractor::Const(c) => Some(AbstractMessage::Value(c.clone())),
        Extractor::Boxed { contents, from, to } => Some(AbstractMessage::Box {
            contents: contents
                .iter()
                .map(|c| extract(c, b))
                .collect::<Option<Vec<_>>>()?,
            from: from.clone(),
            to: to.clone(),
        }),
    }
}

/// Free-standing form of [`AbstractionMap::apply`].
pub fn apply_abstraction(a: &AbstractionMap, t: &Term) -> Option<(OpLabel, Vec<AbstractMessage>)> {
    a.apply(t)
}
