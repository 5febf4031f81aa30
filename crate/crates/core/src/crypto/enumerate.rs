//! Bounded forward search for the bundles of a protocol.
//!
//! Regular strands advance one node at a time. Each reception is fed either
//! directly by an unused transmission or by a short chain of adversary
//! strands built on demand for that reception (goal-directed derivation).
//! Every transmission node feeds at most one reception; replaying a message
//! therefore needs an explicit duplication strand, which is spliced in only
//! when a second consumer of a transmission appears. The search records the
//! states in which no regular strand can move.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::deliver::family_members;
use super::derive::{in_basis, Knowledge};
use super::protocol::Protocol;
use super::term::{try_match, Bindings, Term};
use crate::strand::{isomorphic, Bundle, DirectedTerm, NodeRef, Strand, StrandId, StrandKind};

pub const DEFAULT_MAX_STATES: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Bounds {
    pub max_instances: usize,
    pub max_adversary_steps: usize,
    pub require_deliver_once: bool,
    /// Search states explored before giving up.
    pub max_states: usize,
}

impl Bounds {
    pub fn new(max_instances: usize, max_adversary_steps: usize) -> Self {
        Bounds {
            max_instances,
            max_adversary_steps,
            require_deliver_once: true,
            max_states: DEFAULT_MAX_STATES,
        }
    }

    pub fn deliver_once(mut self, on: bool) -> Self {
        self.require_deliver_once = on;
        self
    }
}

/// One adversary ability; each strand of this kind costs one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvKind {
    Originate,
    Concat,
    Separate,
    Encrypt,
    Decrypt,
    Duplicate,
}

impl fmt::Display for AdvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdvKind::Originate => "originate",
            AdvKind::Concat => "concat",
            AdvKind::Separate => "separate",
            AdvKind::Encrypt => "encrypt",
            AdvKind::Decrypt => "decrypt",
            AdvKind::Duplicate => "duplicate",
        })
    }
}

/// An enumerated bundle and the regular strands that ran to completion.
#[derive(Clone, Debug)]
pub struct Execution {
    pub bundle: Bundle<Term>,
    pub complete: BTreeSet<StrandId>,
}

impl Execution {
    pub fn adversary_steps(&self) -> usize {
        self.bundle.strands_of_kind(StrandKind::Adversary).count()
    }

    /// Heights of the regular strands, keyed by role.
    pub fn heights(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for s in self.bundle.strands_of_kind(StrandKind::Regular) {
            out.entry(s.label.clone())
                .or_default()
                .push(self.bundle.height(&s.id));
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EnumerationStats {
    pub states: usize,
    pub terminal_states: usize,
    pub rejected_nonminimal: usize,
    pub rejected_incomplete: usize,
    pub blocked_deliver_once: usize,
    /// The state cap was hit: the result may be missing bundles.
    pub truncated: bool,
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub bundles: Vec<Execution>,
    pub stats: EnumerationStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Src {
    Reg(usize, usize),
    Adv(usize, usize),
}

#[derive(Clone, Debug)]
struct Inst {
    group: usize,
    k: usize,
    cands: Vec<usize>,
    trace: Vec<DirectedTerm<Term>>,
    binds: Bindings,
    ren: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
struct Adv {
    kind: AdvKind,
    trace: Vec<DirectedTerm<Term>>,
}

#[derive(Clone, Debug, Default)]
struct State {
    insts: Vec<Inst>,
    advs: Vec<Adv>,
    /// (transmission, reception)
    edges: Vec<(Src, Src)>,
    consumed: BTreeSet<Src>,
}

impl State {
    fn dt(&self, s: Src) -> &DirectedTerm<Term> {
        match s {
            Src::Reg(i, n) => &self.insts[i].trace[n - 1],
            Src::Adv(j, n) => &self.advs[j].trace[n - 1],
        }
    }

    fn available(&self) -> Vec<Src> {
        let mut out = Vec::new();
        for (i, inst) in self.insts.iter().enumerate() {
            for (n, d) in inst.trace.iter().enumerate() {
                if d.is_send() && !self.consumed.contains(&Src::Reg(i, n + 1)) {
                    out.push(Src::Reg(i, n + 1));
                }
            }
        }
        for (j, a) in self.advs.iter().enumerate() {
            for (n, d) in a.trace.iter().enumerate() {
                if d.is_send() && !self.consumed.contains(&Src::Adv(j, n + 1)) {
                    out.push(Src::Adv(j, n + 1));
                }
            }
        }
        out
    }

    fn consumed_sends(&self) -> Vec<Src> {
        self.consumed
            .iter()
            .copied()
            .filter(|s| self.dt(*s).is_send())
            .collect()
    }

    fn knowledge(&self) -> Knowledge {
        let sent: Vec<&Term> = self
            .insts
            .iter()
            .flat_map(|i| i.trace.iter())
            .chain(self.advs.iter().flat_map(|a| a.trace.iter()))
            .filter(|d| d.is_send())
            .map(|d| &d.msg)
            .collect();
        Knowledge::new(sent)
    }

    /// Adds an adversary strand, wiring `inputs` to its receptions in order.
    fn add_adv(&mut self, kind: AdvKind, trace: Vec<DirectedTerm<Term>>, inputs: &[Src]) -> usize {
        let j = self.advs.len();
        let recvs: Vec<usize> = trace
            .iter()
            .enumerate()
            .filter(|(_, d)| !d.is_send())
            .map(|(n, _)| n + 1)
            .collect();
        for (src, n) in inputs.iter().zip(recvs) {
            self.consumed.insert(*src);
            self.edges.push((*src, Src::Adv(j, n)));
        }
        self.advs.push(Adv { kind, trace });
        j
    }

    /// Canonical memo key: instance states plus adversary strands described
    /// by content and provenance, sorted.
    fn key(&self) -> String {
        let mut feed: HashMap<Src, Src> = HashMap::new();
        for (s, r) in &self.edges {
            feed.insert(*r, *s);
        }
        let mut sigs: Vec<Option<String>> = vec![None; self.advs.len()];
        fn sig(
            j: usize,
            st: &State,
            feed: &HashMap<Src, Src>,
            memo: &mut Vec<Option<String>>,
        ) -> String {
            if let Some(s) = &memo[j] {
                return s.clone();
            }
            let a = &st.advs[j];
            let mut s = format!("{}[", a.kind);
            for (n, d) in a.trace.iter().enumerate() {
                s.push_str(&d.to_string());
                if !d.is_send() {
                    s.push('<');
                    s.push_str(&src_desc(feed[&Src::Adv(j, n + 1)], st, feed, memo));
                }
                if d.is_send() && st.consumed.contains(&Src::Adv(j, n + 1)) {
                    s.push('!');
                }
                s.push(';');
            }
            s.push(']');
            memo[j] = Some(s.clone());
            s
        }
        fn src_desc(
            src: Src,
            st: &State,
            feed: &HashMap<Src, Src>,
            memo: &mut Vec<Option<String>>,
        ) -> String {
            match src {
                Src::Reg(i, n) => format!("r{i}.{n}"),
                Src::Adv(j, n) => format!("({}).{n}", sig(j, st, feed, memo)),
            }
        }
        let mut parts: Vec<String> = (0..self.advs.len())
            .map(|j| sig(j, self, &feed, &mut sigs))
            .collect();
        parts.sort();
        let mut out = String::new();
        for (i, inst) in self.insts.iter().enumerate() {
            out.push_str(&format!("I{}:{}:{:?}:", inst.group, inst.k, inst.cands));
            for (n, d) in inst.trace.iter().enumerate() {
                out.push_str(&d.to_string());
                let me = Src::Reg(i, n + 1);
                if let Some(s) = feed.get(&me) {
                    out.push('<');
                    out.push_str(&src_desc(*s, self, &feed, &mut sigs));
                }
                if d.is_send() && self.consumed.contains(&me) {
                    out.push('!');
                }
                out.push(';');
            }
            out.push('|');
        }
        out.push_str(&parts.join("|"));
        out
    }
}

/// A way of supplying a reception: the state after supplying it, the
/// transmission node used, the term it carries and the extended bindings.
struct Got {
    st: State,
    src: Src,
    term: Term,
    binds: Bindings,
}

struct Search<'a> {
    p: &'a Protocol,
    bounds: Bounds,
    groups: Vec<Vec<usize>>,
    families: Vec<String>,
    seen: HashSet<String>,
    terminals: Vec<State>,
    stats: EnumerationStats,
}

/// Loose structural match: variables match anything.
fn loose(p: &Term, t: &Term) -> bool {
    match (p, t) {
        (Term::Var(_), _) => true,
        (Term::Seq(a), Term::Seq(b)) => {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| loose(x, y))
        }
        (Term::Enc(a, ka), Term::Enc(b, kb)) => {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| loose(x, y)) && loose(ka, kb)
        }
        (Term::PubKey(a), Term::PubKey(b)) | (Term::PrivKey(a), Term::PrivKey(b)) => loose(a, b),
        (a, b) => a == b,
    }
}

fn subgoals(g: &Term, out: &mut Vec<Term>) {
    out.push(g.clone());
    match g {
        Term::Seq(items) => items.iter().for_each(|i| subgoals(i, out)),
        Term::Enc(body, k) => {
            subgoals(&Term::seq(body.iter().cloned()), out);
            subgoals(k, out);
        }
        _ => {}
    }
}

fn components(t: &Term, out: &mut Vec<Term>) {
    out.push(t.clone());
    match t {
        Term::Seq(items) => items.iter().for_each(|i| components(i, out)),
        Term::Enc(body, _) => components(&Term::seq(body.iter().cloned()), out),
        _ => {}
    }
}

/// Whether analysing `t` could expose something usable for `goal`.
fn relevant(t: &Term, goal: &Term) -> bool {
    let mut gs = Vec::new();
    subgoals(goal, &mut gs);
    let mut cs = Vec::new();
    components(t, &mut cs);
    cs.iter().skip(1).any(|c| gs.iter().any(|g| loose(g, c))) || gs.iter().any(|g| loose(g, t))
}

impl Search<'_> {
    fn budget(&self, st: &State) -> usize {
        self.bounds
            .max_adversary_steps
            .saturating_sub(st.advs.len())
    }

    /// All ways of supplying a term matching `goal` under `binds`. `know`
    /// is what the adversary can derive; adversary strands never extend it.
    /// Analysis only touches transmissions after `after`, so independent
    /// analysis steps are tried in one canonical order.
    fn obtain(
        &self,
        st: &State,
        goal: &Term,
        binds: &Bindings,
        know: &Knowledge,
        after: Option<Src>,
    ) -> Vec<Got> {
        let goal = goal.subst(binds);
        let mut out = Vec::new();
        let avail = st.available();
        for &r in &avail {
            let t = &st.dt(r).msg;
            if let Some(b) = try_match(&goal, t, binds) {
                let mut s2 = st.clone();
                s2.consumed.insert(r);
                out.push(Got {
                    st: s2,
                    src: r,
                    term: t.clone(),
                    binds: b,
                });
            }
        }
        if self.budget(st) == 0 {
            return out;
        }
        for r in st.consumed_sends() {
            if let Some(b) = try_match(&goal, &st.dt(r).msg, binds) {
                if let Some((mut s2, copy)) = self.respawn(st, r) {
                    s2.consumed.insert(copy);
                    let term = s2.dt(copy).msg.clone();
                    out.push(Got {
                        st: s2,
                        src: copy,
                        term,
                        binds: b,
                    });
                }
            }
        }
        if goal.is_ground() && !know.synth(&goal) {
            return out;
        }

        // Synthesis.
        match &goal {
            Term::Seq(items) => {
                for k in 1..items.len() {
                    let left = Term::seq(items[..k].iter().cloned());
                    let right = Term::seq(items[k..].iter().cloned());
                    for l in self.obtain(st, &left, binds, know, None) {
                        if self.budget(&l.st) == 0 {
                            continue;
                        }
                        for r in self.obtain(&l.st, &right, &l.binds, know, None) {
                            if self.budget(&r.st) == 0 {
                                continue;
                            }
                            let whole = Term::seq([l.term.clone(), r.term.clone()]);
                            let mut s2 = r.st;
                            let trace = vec![
                                DirectedTerm::recv(l.term.clone()),
                                DirectedTerm::recv(r.term.clone()),
                                DirectedTerm::send(whole.clone()),
                            ];
                            let j = s2.add_adv(AdvKind::Concat, trace, &[l.src, r.src]);
                            s2.consumed.insert(Src::Adv(j, 3));
                            out.push(Got {
                                st: s2,
                                src: Src::Adv(j, 3),
                                term: whole,
                                binds: r.binds,
                            });
                        }
                    }
                }
            }
            Term::Enc(body, key) if key.is_ground() && know.synth(key) => {
                for kg in self.obtain(st, key, binds, know, None) {
                    if self.budget(&kg.st) == 0 {
                        continue;
                    }
                    for bg in self.obtain(
                        &kg.st,
                        &Term::seq(body.iter().cloned()),
                        &kg.binds,
                        know,
                        None,
                    ) {
                        if self.budget(&bg.st) == 0 {
                            continue;
                        }
                        let whole = Term::enc([bg.term.clone()], kg.term.clone());
                        let mut s2 = bg.st;
                        let trace = vec![
                            DirectedTerm::recv(bg.term.clone()),
                            DirectedTerm::recv(kg.term.clone()),
                            DirectedTerm::send(whole.clone()),
                        ];
                        let j = s2.add_adv(AdvKind::Encrypt, trace, &[bg.src, kg.src]);
                        s2.consumed.insert(Src::Adv(j, 3));
                        out.push(Got {
                            st: s2,
                            src: Src::Adv(j, 3),
                            term: whole,
                            binds: bg.binds,
                        });
                    }
                }
            }
            g if in_basis(g) => {
                let mut s2 = st.clone();
                let j = s2.add_adv(AdvKind::Originate, vec![DirectedTerm::send(g.clone())], &[]);
                s2.consumed.insert(Src::Adv(j, 1));
                out.push(Got {
                    st: s2,
                    src: Src::Adv(j, 1),
                    term: g.clone(),
                    binds: binds.clone(),
                });
            }
            _ => {}
        }

        // Analysis: take a transmission apart, then retry the goal using at
        // least one of the new outputs. A transmission already consumed is
        // first copied by a duplication.
        let mut sources: Vec<(Src, State, Src)> =
            avail.iter().map(|&r| (r, st.clone(), r)).collect();
        for r in st.consumed_sends() {
            if let Some((s2, copy)) = self.respawn(st, r) {
                sources.push((r, s2, copy));
            }
        }
        sources.sort_by_key(|x| x.0);
        for (r, base, src) in sources {
            if after.is_some_and(|a| r <= a) {
                continue;
            }
            let t = base.dt(src).msg.clone();
            if !relevant(&t, &goal) || self.budget(&base) == 0 {
                continue;
            }
            let mut steps: Vec<(State, usize)> = Vec::new();
            if let Term::Seq(items) = &t {
                for k in 1..items.len() {
                    let mut s2 = base.clone();
                    let left = Term::seq(items[..k].iter().cloned());
                    let right = Term::seq(items[k..].iter().cloned());
                    let trace = vec![
                        DirectedTerm::recv(t.clone()),
                        DirectedTerm::send(left),
                        DirectedTerm::send(right),
                    ];
                    let j = s2.add_adv(AdvKind::Separate, trace, &[src]);
                    steps.push((s2, j));
                }
            }
            if let Term::Enc(body, k) = &t {
                if let Some(inv) = k.inverse().filter(|i| know.synth(i)) {
                    let mut s1 = base.clone();
                    s1.consumed.insert(src);
                    for kg in self.obtain(&s1, &inv, binds, know, None) {
                        if self.budget(&kg.st) == 0 {
                            continue;
                        }
                        let mut s2 = kg.st;
                        s2.consumed.remove(&src);
                        let trace = vec![
                            DirectedTerm::recv(t.clone()),
                            DirectedTerm::recv(kg.term.clone()),
                            DirectedTerm::send(Term::seq(body.iter().cloned())),
                        ];
                        let j = s2.add_adv(AdvKind::Decrypt, trace, &[src, kg.src]);
                        steps.push((s2, j));
                    }
                }
            }
            for (s2, j) in steps {
                let outs: Vec<Src> = (1..=s2.advs[j].trace.len())
                    .filter(|n| s2.advs[j].trace[n - 1].is_send())
                    .map(|n| Src::Adv(j, n))
                    .collect();
                for g in self.obtain(&s2, &goal, binds, know, Some(r)) {
                    if outs.iter().any(|o| g.st.consumed.contains(o)) {
                        out.push(g);
                    }
                }
            }
        }
        out
    }

    /// Splices a duplication into the edge leaving the consumed
    /// transmission `r`; returns the new state and the spare copy.
    fn respawn(&self, st: &State, r: Src) -> Option<(State, Src)> {
        if self.budget(st) == 0 {
            return None;
        }
        let pos = st.edges.iter().position(|(s, _)| *s == r)?;
        let mut s2 = st.clone();
        let (_, x) = s2.edges.remove(pos);
        let t = st.dt(r).msg.clone();
        let trace = vec![
            DirectedTerm::recv(t.clone()),
            DirectedTerm::send(t.clone()),
            DirectedTerm::send(t),
        ];
        let j = s2.add_adv(AdvKind::Duplicate, trace, &[r]);
        s2.edges.push((Src::Adv(j, 2), x));
        s2.consumed.insert(Src::Adv(j, 2));
        Some((s2, Src::Adv(j, 3)))
    }

    /// Whether some family value would be received more often than it was
    /// transmitted on regular strands.
    fn violates_deliver_once(&self, st: &State) -> bool {
        if !self.bounds.require_deliver_once {
            return false;
        }
        let mut values = BTreeSet::new();
        for inst in &st.insts {
            for (base, renamed) in &inst.ren {
                if self.families.contains(base) {
                    values.insert(renamed.clone());
                }
            }
        }
        values.iter().any(|v| {
            let (mut r, mut t) = (0, 0);
            for inst in &st.insts {
                for d in &inst.trace {
                    if family_members(v, &d.msg) {
                        if d.is_send() {
                            t += 1;
                        } else {
                            r += 1;
                        }
                    }
                }
            }
            r > t
        })
    }

    /// Regular moves from `st`.
    fn successors(&mut self, st: &State) -> Vec<State> {
        let mut out = Vec::new();
        let mut movers: Vec<(Option<usize>, usize)> = (0..st.insts.len())
            .map(|i| (Some(i), st.insts[i].group))
            .collect();
        for (g, members) in self.groups.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let started = st.insts.iter().filter(|i| i.group == g).count();
            if started < self.bounds.max_instances {
                movers.push((None, g));
            }
        }
        for (which, g) in movers {
            let mut base = st.clone();
            let i = match which {
                Some(i) => i,
                None => {
                    let k = st.insts.iter().filter(|x| x.group == g).count();
                    let role = &self.p.templates[self.groups[g][0]].role;
                    let fresh = &self.p.templates[self.groups[g][0]].fresh;
                    base.insts.push(Inst {
                        group: g,
                        k,
                        cands: self.groups[g].clone(),
                        trace: Vec::new(),
                        binds: self.p.bindings.clone(),
                        ren: fresh
                            .iter()
                            .map(|n| (n.clone(), format!("{n}@{role}{k}")))
                            .collect(),
                    });
                    base.insts.len() - 1
                }
            };
            let inst = &base.insts[i];
            let h = inst.trace.len();
            let mut nexts: Vec<(DirectedTerm<Term>, Vec<usize>)> = Vec::new();
            for &c in &inst.cands {
                if let Some(d) = self.p.templates[c].trace.get(h) {
                    match nexts.iter_mut().find(|(x, _)| x == d) {
                        Some((_, cs)) => cs.push(c),
                        None => nexts.push((d.clone(), vec![c])),
                    }
                }
            }
            for (d, cs) in nexts {
                let inst = &base.insts[i];
                let pat = d.msg.rename_fresh(&inst.ren);
                if d.is_send() {
                    let msg = pat.subst(&inst.binds);
                    if !msg.is_ground() {
                        continue;
                    }
                    let mut s2 = base.clone();
                    s2.insts[i].cands = cs;
                    s2.insts[i].trace.push(DirectedTerm::send(msg));
                    out.push(s2);
                } else {
                    let binds = inst.binds.clone();
                    let know = base.knowledge();
                    for g in self.obtain(&base, &pat, &binds, &know, None) {
                        let mut s2 = g.st;
                        s2.insts[i].cands = cs.clone();
                        s2.insts[i].trace.push(DirectedTerm::recv(g.term));
                        s2.insts[i].binds = g.binds;
                        s2.edges.push((g.src, Src::Reg(i, h + 1)));
                        if self.violates_deliver_once(&s2) {
                            self.stats.blocked_deliver_once += 1;
                            continue;
                        }
                        out.push(s2);
                    }
                }
            }
        }
        out
    }

    fn run(&mut self, init: State) {
        let mut stack = vec![init];
        while let Some(st) = stack.pop() {
            if !self.seen.insert(st.key()) {
                continue;
            }
            self.stats.states += 1;
            if self.stats.states >= self.bounds.max_states {
                self.stats.truncated = true;
                return;
            }
            let next = self.successors(&st);
            if next.is_empty() {
                self.stats.terminal_states += 1;
                self.terminals.push(st);
            } else {
                stack.extend(next.into_iter().rev());
            }
        }
    }

    fn complete(&self, inst: &Inst) -> bool {
        inst.cands
            .iter()
            .any(|&c| self.p.templates[c].trace.len() == inst.trace.len())
    }

    /// Rejects adversary strands whose outputs go unused (or, for a
    /// duplication, whose spare copy goes unused).
    fn minimal(st: &State) -> bool {
        st.advs.iter().enumerate().all(|(j, a)| {
            let used = (1..=a.trace.len())
                .filter(|n| a.trace[n - 1].is_send())
                .filter(|n| st.consumed.contains(&Src::Adv(j, *n)))
                .count();
            match a.kind {
                AdvKind::Duplicate => used == 2,
                _ => used >= 1,
            }
        })
    }

    fn to_execution(&self, st: &State) -> Execution {
        let rid = |i: usize| {
            let inst = &st.insts[i];
            format!(
                "{}{}",
                self.p.templates[self.groups[inst.group][0]].role, inst.k
            )
        };
        let node = |s: Src| match s {
            Src::Reg(i, n) => NodeRef::new(rid(i), n),
            Src::Adv(j, n) => NodeRef::new(format!("adv{j}"), n),
        };
        let mut b = Bundle::new();
        let mut complete = BTreeSet::new();
        for (i, inst) in st.insts.iter().enumerate() {
            let role = self.p.templates[self.groups[inst.group][0]].role.clone();
            let strand = Strand::new(rid(i), StrandKind::Regular, role, inst.trace.clone());
            if self.complete(inst) {
                complete.insert(strand.id.clone());
            }
            b.add_full_strand(strand);
        }
        for (j, a) in st.advs.iter().enumerate() {
            b.add_full_strand(Strand::new(
                format!("adv{j}"),
                StrandKind::Adversary,
                a.kind.to_string(),
                a.trace.clone(),
            ));
        }
        for (s, r) in &st.edges {
            b.add_comm(node(*s), node(*r));
        }
        Execution {
            bundle: b,
            complete,
        }
    }
}

fn shape_key(b: &Bundle<Term>) -> Vec<(StrandKind, String, usize)> {
    let mut k: Vec<_> = b
        .strands
        .values()
        .map(|s| (s.kind, s.label.clone(), b.height(&s.id)))
        .collect();
    k.sort();
    k
}

/// Enumerates the bundles reachable within `bounds`, keeping those in which
/// no regular strand can move further and at least one regular strand is
/// complete, deduplicated up to isomorphism.
pub fn enumerate_bundles(p: &Protocol, bounds: Bounds) -> Enumeration {
    let roles = p.roles();
    let groups: Vec<Vec<usize>> = roles
        .iter()
        .map(|r| p.templates_of(r).map(|(i, _)| i).collect())
        .collect();
    let mut search = Search {
        p,
        bounds,
        groups,
        families: p
            .deliver_once_families
            .iter()
            .map(|f| f.fresh_value_name.clone())
            .collect(),
        seen: HashSet::new(),
        terminals: Vec::new(),
        stats: EnumerationStats::default(),
    };
    if bounds.max_instances > 0 {
        search.run(State::default());
    }
    let mut buckets: BTreeMap<Vec<(StrandKind, String, usize)>, Vec<usize>> = BTreeMap::new();
    let mut bundles: Vec<Execution> = Vec::new();
    for st in std::mem::take(&mut search.terminals) {
        if !Search::minimal(&st) {
            search.stats.rejected_nonminimal += 1;
            continue;
        }
        if !st.insts.iter().any(|i| search.complete(i)) {
            search.stats.rejected_incomplete += 1;
            continue;
        }
        let ex = search.to_execution(&st);
        let bucket = buckets.entry(shape_key(&ex.bundle)).or_default();
        if bucket
            .iter()
            .any(|&k| isomorphic(&bundles[k].bundle, &ex.bundle))
        {
            continue;
        }
        bucket.push(bundles.len());
        bundles.push(ex);
    }
    bundles.sort_by_cached_key(|e| {
        (
            e.bundle.node_count(),
            e.adversary_steps(),
            format!("{:?}", shape_key(&e.bundle)),
            render(&e.bundle),
        )
    });
    Enumeration {
        bundles,
        stats: search.stats,
    }
}

fn render(b: &Bundle<Term>) -> String {
    crate::strand::bundle_to_json(b).to_string()
}
