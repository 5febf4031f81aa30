//! Abstract bundle semantics: the executions of a choreography as bundles.
//!
//! Every role owns one strand, named after the role. Its trace lists the
//! role's interactions in order and ends with a fresh end-of-role event.
//! The head of each strand is node 1, so prefixing an interaction shifts the
//! existing nodes of the two participants one place down.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::chor::{
    check_static_assumptions, roles_of, AbstractMessage, Choreography, OpLabel, Payload, Role,
    Violation,
};
use crate::lts::{step, LabelMu};
use crate::strand::{
    isomorphic, topological_order, Bundle, DirectedTerm, Direction, Edge, MatchModulo, NodeRef,
    Renaming, Strand, StrandId, StrandKind,
};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AbsEvent {
    Interaction {
        op: OpLabel,
        payload: Vec<AbstractMessage>,
    },
    EndMarker {
        role: Role,
        tag: String,
    },
}

impl AbsEvent {
    pub fn interaction(op: &OpLabel, payload: &[AbstractMessage]) -> Self {
        AbsEvent::Interaction {
            op: op.clone(),
            payload: payload.to_vec(),
        }
    }

    pub fn is_marker(&self) -> bool {
        matches!(self, AbsEvent::EndMarker { .. })
    }
}

impl fmt::Display for AbsEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbsEvent::Interaction { op, payload } => write!(f, "{op}<{}>", Payload(payload)),
            AbsEvent::EndMarker { role, tag } => write!(f, "end_{role}#{tag}"),
        }
    }
}

/// Interactions must agree exactly; end markers agree on the role and up to
/// a consistent renaming of their tags.
impl MatchModulo for AbsEvent {
    fn match_modulo(&self, other: &Self, ren: &mut Renaming) -> bool {
        match (self, other) {
            (
                AbsEvent::EndMarker { role: r1, tag: t1 },
                AbsEvent::EndMarker { role: r2, tag: t2 },
            ) => r1 == r2 && ren.bind(t1, t2),
            _ => self == other,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AbsError {
    #[error("role `{0}` has no strand in the environment")]
    UnknownRole(Role),
    #[error("an interaction needs two distinct roles, got `{0}` twice")]
    SelfInteraction(Role),
    #[error("choreography violates static assumptions: {0:?}")]
    Static(Vec<Violation>),
}

/// A bundle together with the current head node of each role's strand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleEnv {
    pub bundle: Bundle<AbsEvent>,
    pub who: BTreeMap<Role, NodeRef>,
}

impl BundleEnv {
    /// One marker strand per role, each a lone transmission of a fresh tag.
    pub fn zero(roles: &BTreeSet<Role>, fresh: &mut impl FnMut() -> String) -> Self {
        let mut bundle = Bundle::new();
        let mut who = BTreeMap::new();
        for r in roles {
            let ev = AbsEvent::EndMarker {
                role: r.clone(),
                tag: fresh(),
            };
            bundle.add_full_strand(Strand::new(
                r.as_str(),
                StrandKind::Marker,
                r.as_str(),
                vec![DirectedTerm::send(ev)],
            ));
            who.insert(r.clone(), NodeRef::new(r.as_str(), 1));
        }
        BundleEnv { bundle, who }
    }

    pub fn roles(&self) -> impl Iterator<Item = &Role> {
        self.who.keys()
    }

    /// Number of interaction (non-marker) nodes on a role's strand.
    pub fn interaction_count(&self, role: &Role) -> usize {
        let id = StrandId::new(role.as_str());
        self.bundle
            .strand_nodes(&id)
            .iter()
            .filter(|n| self.bundle.msg(n).is_some_and(|e| !e.is_marker()))
            .count()
    }

    /// The role's strand holds nothing but its end marker.
    pub fn is_marker_only(&self, role: &Role) -> bool {
        let id = StrandId::new(role.as_str());
        self.bundle
            .strand(&id)
            .is_some_and(|s| s.trace.iter().all(|d| d.msg.is_marker()))
    }
}

fn shift(n: &NodeRef, on: &[&StrandId], by: isize) -> NodeRef {
    if on.contains(&&n.strand) {
        NodeRef::of(&n.strand, (n.index as isize + by) as usize)
    } else {
        n.clone()
    }
}

fn shift_edges(
    es: &BTreeSet<Edge>,
    on: &[&StrandId],
    by: isize,
    drop: &BTreeSet<NodeRef>,
) -> BTreeSet<Edge> {
    es.iter()
        .filter(|(a, b)| !drop.contains(a) && !drop.contains(b))
        .map(|(a, b)| (shift(a, on, by), shift(b, on, by)))
        .collect()
}

/// `(B,who)[μ]`: puts `+op<M>` on the sender's strand and `-op<M>` on the
/// receiver's, ahead of their current heads, and wires one into the other.
pub fn prefix(env: &BundleEnv, mu: &LabelMu) -> Result<BundleEnv, AbsError> {
    if mu.sender == mu.receiver {
        return Err(AbsError::SelfInteraction(mu.sender.clone()));
    }
    for r in [&mu.sender, &mu.receiver] {
        if !env.who.contains_key(r) {
            return Err(AbsError::UnknownRole(r.clone()));
        }
    }
    let s = env.who[&mu.sender].strand.clone();
    let r = env.who[&mu.receiver].strand.clone();
    let on = [&s, &r];
    let ev = AbsEvent::interaction(&mu.op, &mu.payload);

    let old = &env.bundle;
    let mut strands = old.strands.clone();
    for (id, dir) in [(&s, Direction::Send), (&r, Direction::Recv)] {
        let st = strands.get_mut(id).expect("who points into the bundle");
        st.trace.insert(
            0,
            DirectedTerm {
                dir,
                msg: ev.clone(),
            },
        );
        st.kind = StrandKind::Regular;
    }
    let none = BTreeSet::new();
    let mut nodes: BTreeSet<NodeRef> = old.nodes.iter().map(|n| shift(n, &on, 1)).collect();
    let mut succ_edges = shift_edges(&old.succ_edges, &on, 1, &none);
    let mut comm_edges = shift_edges(&old.comm_edges, &on, 1, &none);
    let n1 = NodeRef::of(&s, 1);
    let n2 = NodeRef::of(&r, 1);
    for n in [&n1, &n2] {
        if nodes.contains(&n.next()) {
            succ_edges.insert((n.clone(), n.next()));
        }
        nodes.insert(n.clone());
    }
    comm_edges.insert((n1.clone(), n2.clone()));

    let mut who = env.who.clone();
    who.insert(mu.sender.clone(), n1);
    who.insert(mu.receiver.clone(), n2);
    Ok(BundleEnv {
        bundle: Bundle {
            strands,
            nodes,
            succ_edges,
            comm_edges,
        },
        who,
    })
}

/// `(B,who)\[μ]`: the environment `e′` with `prefix(e′, μ) = env`, if any.
pub fn unprefix_env(env: &BundleEnv, mu: &LabelMu) -> Option<BundleEnv> {
    if mu.sender == mu.receiver {
        return None;
    }
    let n1 = env.who.get(&mu.sender)?.clone();
    let n2 = env.who.get(&mu.receiver)?.clone();
    let b = &env.bundle;
    let ev = AbsEvent::interaction(&mu.op, &mu.payload);
    let head_ok = |n: &NodeRef, dir: Direction| {
        n.index == 1
            && b.nodes.contains(n)
            && b.nodes.contains(&n.next())
            && b.dmsg(n)
                == Some(&DirectedTerm {
                    dir,
                    msg: ev.clone(),
                })
    };
    if !head_ok(&n1, Direction::Send) || !head_ok(&n2, Direction::Recv) {
        return None;
    }
    // n1 must feed exactly n2, and n2 must be fed by n1 alone.
    let out: Vec<_> = b.outgoing_comm(&n1).collect();
    let inc: Vec<_> = b.incoming_comm(&n2).collect();
    if out != [&n2] || inc != [&n1] {
        return None;
    }

    let on = [&n1.strand, &n2.strand];
    let drop: BTreeSet<NodeRef> = [n1.clone(), n2.clone()].into_iter().collect();
    let mut strands = b.strands.clone();
    for id in on {
        let st = strands.get_mut(id)?;
        st.trace.remove(0);
        if st.trace.iter().all(|d| d.msg.is_marker()) {
            st.kind = StrandKind::Marker;
        }
    }
    let nodes = b
        .nodes
        .iter()
        .filter(|n| !drop.contains(n))
        .map(|n| shift(n, &on, -1))
        .collect();
    // Heads stay at index 1 after the shift.
    Some(BundleEnv {
        bundle: Bundle {
            strands,
            nodes,
            succ_edges: shift_edges(&b.succ_edges, &on, -1, &drop),
            comm_edges: shift_edges(&b.comm_edges, &on, -1, &drop),
        },
        who: env.who.clone(),
    })
}

/// The bundle part of [`unprefix_env`]; `None` means undefined.
pub fn unprefix(env: &BundleEnv, mu: &LabelMu) -> Option<Bundle<AbsEvent>> {
    unprefix_env(env, mu).map(|e| e.bundle)
}

/// The semantics of `c` over its own role set.
pub fn abs(c: &Choreography) -> Result<Vec<BundleEnv>, AbsError> {
    abs_with_roles(c, &roles_of(c))
}

/// The semantics of `c` with end markers for every role in `roles`.
pub fn abs_with_roles(
    c: &Choreography,
    roles: &BTreeSet<Role>,
) -> Result<Vec<BundleEnv>, AbsError> {
    let v = check_static_assumptions(c);
    if !v.is_empty() {
        return Err(AbsError::Static(v));
    }
    unchecked(c, roles)
}

/// Residuals of a well-formed choreography may forward boxes that
/// originated earlier, so they are taken without the static checks.
fn unchecked(c: &Choreography, roles: &BTreeSet<Role>) -> Result<Vec<BundleEnv>, AbsError> {
    let mut counter = 0usize;
    let mut fresh = || {
        counter += 1;
        format!("e{counter}")
    };
    semantics(c, roles, &mut fresh)
}

fn semantics(
    c: &Choreography,
    roles: &BTreeSet<Role>,
    fresh: &mut impl FnMut() -> String,
) -> Result<Vec<BundleEnv>, AbsError> {
    let steps = step(c);
    if steps.is_empty() {
        return Ok(vec![BundleEnv::zero(roles, fresh)]);
    }
    let mut out = Vec::new();
    for (mu, cont) in steps {
        for e in semantics(cont, roles, fresh)? {
            out.push(prefix(&e, &mu)?);
        }
    }
    Ok(out)
}

/// Drops end-marker nodes (and strands left with no node).
pub fn strip_markers(b: &Bundle<AbsEvent>) -> Bundle<AbsEvent> {
    let keep: BTreeSet<NodeRef> = b
        .nodes
        .iter()
        .filter(|n| b.msg(n).is_some_and(|e| !e.is_marker()))
        .cloned()
        .collect();
    b.restrict(&keep)
}

/// The interactions of a bundle, one per transmission, in a topological
/// order of its nodes.
pub fn interactions_in_order(b: &Bundle<AbsEvent>) -> Vec<LabelMu> {
    let order = topological_order(b).unwrap_or_else(|_| b.nodes.iter().cloned().collect());
    let mut out = Vec::new();
    for n in &order {
        let Some(DirectedTerm {
            dir: Direction::Send,
            msg: AbsEvent::Interaction { op, payload },
        }) = b.dmsg(n)
        else {
            continue;
        };
        let Some(to) = b.outgoing_comm(n).next() else {
            continue;
        };
        let role = |id: &StrandId| b.strand(id).map(|s| s.label.clone()).unwrap_or_default();
        out.push(LabelMu::new(
            &role(&n.strand),
            &role(&to.strand),
            op.as_str(),
            payload.clone(),
        ));
    }
    out
}

/// Two bundle collections are equal as multisets up to isomorphism.
pub fn same_bundles(a: &[Bundle<AbsEvent>], b: &[Bundle<AbsEvent>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    for x in a {
        let hit = b
            .iter()
            .enumerate()
            .position(|(i, y)| !used[i] && isomorphic(x, y));
        match hit {
            Some(i) => used[i] = true,
            None => return false,
        }
    }
    true
}

/// How the removal clause is read by [`check_theorem1`].
pub const THEOREM1_READING: &str = "clause 1 is checked as: the bundles of abs(C') equal, up to isomorphism, \
{ unprefix(e, mu) : e in abs(C), unprefix defined }; environments whose first interaction is not mu are dropped";

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub clause: u8,
    pub state: String,
    pub label: String,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Report {
    pub reading: &'static str,
    pub depth_bound: usize,
    pub states: usize,
    pub transitions: usize,
    pub static_violations: Vec<String>,
    pub counterexamples: Vec<Counterexample>,
}

impl Theorem1Report {
    pub fn holds(&self) -> bool {
        self.static_violations.is_empty() && self.counterexamples.is_empty()
    }
}

/// Checks both clauses of the correspondence between `step` and
/// `unprefix` on every state reachable from `c` in at most `depth_bound`
/// steps. Role sets are those of `c` throughout.
pub fn check_theorem1(c: &Choreography, depth_bound: usize) -> Theorem1Report {
    let mut report = Theorem1Report {
        reading: THEOREM1_READING,
        depth_bound,
        states: 0,
        transitions: 0,
        static_violations: check_static_assumptions(c)
            .iter()
            .map(|v| v.to_string())
            .collect(),
        counterexamples: Vec::new(),
    };
    if !report.static_violations.is_empty() {
        return report;
    }
    let roles = roles_of(c);
    let mut frontier = vec![(c, 0usize)];
    while let Some((state, depth)) = frontier.pop() {
        report.states += 1;
        let envs = unchecked(state, &roles).expect("roles cover every reachable state");
        let moves = step(state);

        for (mu, next) in &moves {
            report.transitions += 1;
            let removed: Vec<_> = envs.iter().filter_map(|e| unprefix(e, mu)).collect();
            let expected: Vec<_> = unchecked(next, &roles)
                .expect("roles cover every reachable state")
                .into_iter()
                .map(|e| e.bundle)
                .collect();
            if !same_bundles(&removed, &expected) {
                report.counterexamples.push(Counterexample {
                    clause: 1,
                    state: state.to_string(),
                    label: mu.to_string(),
                    detail: format!(
                        "{} bundles after removal, {} expected",
                        removed.len(),
                        expected.len()
                    ),
                });
            }
            if depth < depth_bound {
                frontier.push((next, depth + 1));
            }
        }

        let labels: BTreeSet<&LabelMu> = moves.iter().map(|(m, _)| m).collect();
        for e in &envs {
            for mu in first_interactions(e) {
                if unprefix(e, &mu).is_some() && !labels.contains(&mu) {
                    report.counterexamples.push(Counterexample {
                        clause: 2,
                        state: state.to_string(),
                        label: mu.to_string(),
                        detail: "removable interaction with no matching transition".into(),
                    });
                }
            }
        }
    }
    report
}

/// Candidate labels for removal: the interactions sent from a strand head.
fn first_interactions(e: &BundleEnv) -> Vec<LabelMu> {
    let mut out = Vec::new();
    for (role, head) in &e.who {
        let Some(DirectedTerm {
            dir: Direction::Send,
            msg: AbsEvent::Interaction { op, payload },
        }) = e.bundle.dmsg(head)
        else {
            continue;
        };
        for to in e.bundle.outgoing_comm(head) {
            if let Some(s) = e.bundle.strand(&to.strand) {
                out.push(LabelMu::new(
                    role.as_str(),
                    &s.label,
                    op.as_str(),
                    payload.clone(),
                ));
            }
        }
    }
    out
}
