//! Parametric role templates and the `.proto` text format.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::term::{parse_term, AtomKind, Bindings, Symbols, Term};
use crate::strand::{DirectedTerm, Strand, StrandKind};

/// One complete path through a role's behaviour.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleTemplate {
    pub role: String,
    /// `role` alone, or `role.branch.branch` for paths through choices.
    pub name: String,
    pub trace: Vec<DirectedTerm<Term>>,
    /// Nonces and keys this role originates, renamed per instance.
    pub fresh: BTreeSet<String>,
    pub params: BTreeSet<String>,
}

/// The deliver-once family of messages carrying one fresh value inside an
/// encrypted unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilySpec {
    pub fresh_value_name: String,
}

#[derive(Clone, Debug)]
pub struct Protocol {
    pub name: String,
    pub templates: Vec<RoleTemplate>,
    pub deliver_once_families: Vec<FamilySpec>,
    /// Protocol-wide values for role parameters.
    pub bindings: Bindings,
    pub symbols: Symbols,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, col {col}: {message}")]
pub struct ProtoParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstantiateError {
    #[error("no value for {0:?}")]
    IncompleteSubstitution(Vec<String>),
    #[error("fresh renaming is not injective")]
    NonInjective,
}

impl Protocol {
    /// Roles in order of declaration.
    pub fn roles(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.templates {
            if !out.contains(&t.role) {
                out.push(t.role.clone());
            }
        }
        out
    }

    pub fn templates_of<'a>(
        &'a self,
        role: &'a str,
    ) -> impl Iterator<Item = (usize, &'a RoleTemplate)> + 'a {
        self.templates
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.role == role)
    }

    pub fn template(&self, name: &str) -> Option<&RoleTemplate> {
        self.templates.iter().find(|t| t.name == name)
    }

    pub fn parse(src: &str) -> Result<Protocol, ProtoParseError> {
        Parser::new(src).protocol()
    }

    /// Parses a standalone term against this protocol's declarations.
    pub fn term(&self, src: &str) -> Result<Term, super::TermParseError> {
        self.symbols.parse(src)
    }
}

/// Grounds a template: parameters and reception variables from `subst`,
/// fresh names through `fresh_renaming`.
pub fn instantiate(
    template: &RoleTemplate,
    subst: &Bindings,
    fresh_renaming: &BTreeMap<String, String>,
) -> Result<Strand<Term>, InstantiateError> {
    let targets: BTreeSet<&String> = fresh_renaming.values().collect();
    if targets.len() != fresh_renaming.len() {
        return Err(InstantiateError::NonInjective);
    }
    let trace: Vec<DirectedTerm<Term>> = template
        .trace
        .iter()
        .map(|d| DirectedTerm {
            dir: d.dir,
            msg: d.msg.rename_fresh(fresh_renaming).subst(subst),
        })
        .collect();
    let mut missing: BTreeSet<String> = template
        .params
        .iter()
        .filter(|p| !subst.contains_key(*p))
        .cloned()
        .collect();
    for d in &trace {
        missing.extend(d.msg.vars());
    }
    if !missing.is_empty() {
        return Err(InstantiateError::IncompleteSubstitution(
            missing.into_iter().collect(),
        ));
    }
    Ok(Strand::new(
        template.name.clone(),
        StrandKind::Regular,
        template.role.clone(),
        trace,
    ))
}

/// A role body before expansion into templates. A choice, if any, ends it.
#[derive(Debug, Default)]
struct Block {
    steps: Vec<DirectedTerm<Term>>,
    branches: Vec<(String, Block)>,
}

impl Block {
    fn paths(&self, prefix: &str, out: &mut Vec<(String, Vec<DirectedTerm<Term>>)>) {
        if self.branches.is_empty() {
            out.push((prefix.to_string(), self.steps.clone()));
            return;
        }
        for (name, b) in &self.branches {
            let mut sub = Vec::new();
            b.paths(&format!("{prefix}.{name}"), &mut sub);
            for (n, mut tail) in sub {
                let mut trace = self.steps.clone();
                trace.append(&mut tail);
                out.push((n, trace));
            }
        }
    }
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    symbols: Symbols,
}

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        let lines = src
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim_end()))
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        Parser {
            lines,
            pos: 0,
            symbols: Symbols::default(),
        }
    }

    fn err<T>(&self, line: usize, message: impl Into<String>) -> Result<T, ProtoParseError> {
        Err(ProtoParseError {
            line,
            col: 1,
            message: message.into(),
        })
    }

    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        let l = self.lines.get(self.pos).copied();
        self.pos += 1;
        l.map(|(n, s)| (n, s.trim()))
    }

    fn declare(
        &mut self,
        line: usize,
        names: &[&str],
        kind: AtomKind,
    ) -> Result<(), ProtoParseError> {
        for n in names {
            if n.contains('@') || n.starts_with('?') {
                return self.err(line, format!("invalid name `{n}`"));
            }
            if let Some(prev) = self.symbols.kind(n) {
                if prev != kind {
                    return self.err(line, format!("`{n}` already declared as {prev:?}"));
                }
            }
            self.symbols.declare(n, kind);
        }
        Ok(())
    }

    fn protocol(mut self) -> Result<Protocol, ProtoParseError> {
        let mut name = None;
        let mut templates = Vec::new();
        let mut families = Vec::new();
        let mut bindings = Bindings::new();
        let mut all_fresh: BTreeSet<String> = BTreeSet::new();
        let mut family_lines = Vec::new();
        let mut global = Symbols::default();
        while let Some((ln, line)) = self.next_line() {
            let w = words(line);
            match w[0] {
                "protocol" if w.len() == 2 => name = Some(w[1].to_string()),
                "principals" => self.declare(ln, &w[1..], AtomKind::Principal)?,
                "tags" => self.declare(ln, &w[1..], AtomKind::Tag)?,
                "values" => self.declare(ln, &w[1..], AtomKind::Value)?,
                "role" if w.len() == 3 && w[2] == "{" => {
                    let role = w[1].to_string();
                    if self.symbols.kind(&role) != Some(AtomKind::Principal) {
                        return self.err(ln, format!("role `{role}` is not a declared principal"));
                    }
                    if templates.iter().any(|t: &RoleTemplate| t.role == role) {
                        return self.err(ln, format!("duplicate role `{role}`"));
                    }
                    let saved = self.symbols.clone();
                    let mut local = RoleDecls::default();
                    let body = self.block(&mut local)?;
                    let mut paths = Vec::new();
                    body.paths(&role, &mut paths);
                    for (tname, trace) in paths {
                        let t = RoleTemplate {
                            role: role.clone(),
                            name: tname,
                            trace,
                            fresh: local.fresh.clone(),
                            params: local.params.clone(),
                        };
                        validate_template(&t).or_else(|m| self.err(ln, m))?;
                        templates.push(t);
                    }
                    for (n, k) in &self.symbols.kinds {
                        if matches!(k, AtomKind::Nonce | AtomKind::SymKey) {
                            global.declare(n, *k);
                        }
                    }
                    all_fresh.extend(local.fresh);
                    self.symbols = saved;
                }
                "deliver_once" => {
                    for v in &w[1..] {
                        families.push(FamilySpec {
                            fresh_value_name: v.to_string(),
                        });
                        family_lines.push(ln);
                    }
                }
                "bind" if w.len() >= 4 && w[2] == "=" => {
                    let src = line.split_once('=').map_or("", |x| x.1);
                    let mut syms = self.symbols.clone();
                    for (n, k) in &global.kinds {
                        syms.declare(n, *k);
                    }
                    let t = syms.parse(src).map_err(|e| ProtoParseError {
                        line: ln,
                        col: e.col,
                        message: e.message,
                    })?;
                    if !t.is_ground() {
                        return self.err(ln, "bound value must be ground");
                    }
                    bindings.insert(w[1].to_string(), t);
                }
                other => return self.err(ln, format!("unexpected `{other}`")),
            }
        }
        let Some(name) = name else {
            return self.err(1, "missing `protocol NAME` line");
        };
        for (f, ln) in families.iter().zip(family_lines) {
            if !all_fresh.contains(&f.fresh_value_name) {
                return self.err(
                    ln,
                    format!("`{}` is not declared fresh by any role", f.fresh_value_name),
                );
            }
        }
        for t in &templates {
            for p in &t.params {
                if !bindings.contains_key(p) {
                    return self.err(
                        1,
                        format!("parameter `{p}` of role {} has no `bind`", t.role),
                    );
                }
            }
        }
        let mut symbols = self.symbols;
        for (n, k) in global.kinds {
            symbols.declare(&n, k);
        }
        Ok(Protocol {
            name,
            templates,
            deliver_once_families: families,
            bindings,
            symbols,
        })
    }

    fn term(&self, ln: usize, line: &str, kw: &str) -> Result<Term, ProtoParseError> {
        let offset = line.find(kw).unwrap_or(0) + kw.len();
        let t = parse_term(&line[offset..], &|n| self.symbols.kind(n)).map_err(|e| {
            ProtoParseError {
                line: ln,
                col: e.col + offset,
                message: e.message,
            }
        })?;
        let mut bad = None;
        t.visit(&mut |s| {
            if let Term::Enc(_, k) = s {
                if !matches!(
                    **k,
                    Term::PubKey(_) | Term::PrivKey(_) | Term::SymKey(_) | Term::Var(_)
                ) {
                    bad.get_or_insert_with(|| k.to_string());
                }
            }
        });
        match bad {
            Some(k) => self.err(ln, format!("`{k}` cannot be used as a key")),
            None => Ok(t),
        }
    }

    /// Reads statements up to the closing `}`.
    fn block(&mut self, decls: &mut RoleDecls) -> Result<Block, ProtoParseError> {
        let mut b = Block::default();
        loop {
            let Some((ln, line)) = self.next_line() else {
                return self.err(self.lines.last().map_or(1, |l| l.0), "missing `}`");
            };
            let w = words(line);
            if !b.branches.is_empty() && w[0] != "}" {
                return self.err(ln, "a choice must end its block");
            }
            match w[0] {
                "}" if w.len() == 1 => return Ok(b),
                "fresh" if w.len() >= 3 => {
                    let kind = match w[1] {
                        "nonce" => AtomKind::Nonce,
                        "key" => AtomKind::SymKey,
                        _ => return self.err(ln, "expected `fresh nonce` or `fresh key`"),
                    };
                    self.declare(ln, &w[2..], kind)?;
                    decls.fresh.extend(w[2..].iter().map(|s| s.to_string()));
                }
                "var" => self.declare(ln, &w[1..], AtomKind::Var)?,
                "param" => {
                    self.declare(ln, &w[1..], AtomKind::Var)?;
                    decls.params.extend(w[1..].iter().map(|s| s.to_string()));
                }
                "send" => b
                    .steps
                    .push(DirectedTerm::send(self.term(ln, line, "send")?)),
                "recv" => b
                    .steps
                    .push(DirectedTerm::recv(self.term(ln, line, "recv")?)),
                "choice" if w.len() == 2 && w[1] == "{" => {
                    loop {
                        let Some((bl, bline)) = self.next_line() else {
                            return self.err(ln, "unterminated choice");
                        };
                        let bw = words(bline);
                        match bw.as_slice() {
                            ["}"] => break,
                            ["branch", name, "{"] => {
                                if b.branches.iter().any(|(n, _)| n == name) {
                                    return self.err(bl, format!("duplicate branch `{name}`"));
                                }
                                let sub = self.block(decls)?;
                                if sub.steps.is_empty() && sub.branches.is_empty() {
                                    return self.err(bl, "empty branch");
                                }
                                b.branches.push((name.to_string(), sub));
                            }
                            _ => return self.err(bl, "expected `branch NAME {` or `}`"),
                        }
                    }
                    if b.branches.is_empty() {
                        return self.err(ln, "choice without branches");
                    }
                }
                other => return self.err(ln, format!("unexpected `{other}` in role body")),
            }
        }
    }
}

#[derive(Default)]
struct RoleDecls {
    fresh: BTreeSet<String>,
    params: BTreeSet<String>,
}

fn validate_template(t: &RoleTemplate) -> Result<(), String> {
    if t.trace.is_empty() {
        return Err(format!("{} has an empty trace", t.name));
    }
    let mut bound: BTreeSet<String> = t.params.clone();
    let mut sent: BTreeSet<String> = BTreeSet::new();
    for d in &t.trace {
        let fresh_here: BTreeSet<String> = d
            .msg
            .fresh_atoms()
            .intersection(&t.fresh)
            .cloned()
            .collect();
        if d.is_send() {
            if let Some(v) = d.msg.vars().difference(&bound).next() {
                return Err(format!("{}: `?{v}` is sent before it is received", t.name));
            }
            sent.extend(fresh_here);
        } else {
            if let Some(n) = fresh_here.difference(&sent).next() {
                return Err(format!(
                    "{}: fresh `{n}` is received before it is sent",
                    t.name
                ));
            }
            bound.extend(d.msg.vars());
        }
    }
    Ok(())
}
