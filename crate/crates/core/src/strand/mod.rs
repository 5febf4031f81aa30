//! Strands, nodes and bundles, shared by the choreography level and the
//! cryptographic level.
//!
//! A [`Bundle`] is kept as raw parts (strands, node set, succession edges,
//! communication edges) so that arbitrary candidate graphs can be
//! represented and then judged by [`validate_bundle`]. Builders in this
//! module only ever produce well-formed succession structure.

mod export;
mod iso;
mod order;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use export::{bundle_to_dot, bundle_to_json};
pub use iso::{isomorphic, isomorphic_by, MatchModulo, Renaming};
pub use order::{causal_order, minimal_nodes, topological_order, CausalOrder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Direction {
    #[serde(rename = "+")]
    Send,
    #[serde(rename = "-")]
    Recv,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Send => "+",
            Direction::Recv => "-",
        })
    }
}

/// A transmission (`+t`) or reception (`-t`) of a message.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DirectedTerm<M> {
    pub dir: Direction,
    pub msg: M,
}

impl<M> DirectedTerm<M> {
    pub fn send(msg: M) -> Self {
        DirectedTerm {
            dir: Direction::Send,
            msg,
        }
    }

    pub fn recv(msg: M) -> Self {
        DirectedTerm {
            dir: Direction::Recv,
            msg,
        }
    }

    pub fn is_send(&self) -> bool {
        self.dir == Direction::Send
    }
}

impl<M: fmt::Display> fmt::Display for DirectedTerm<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.dir, self.msg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrandKind {
    Regular,
    Adversary,
    /// Holds only an end-of-role event: a transmission nobody receives.
    Marker,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct StrandId(pub String);

impl StrandId {
    pub fn new(s: impl Into<String>) -> Self {
        StrandId(s.into())
    }
}

impl fmt::Display for StrandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A strand: a finite, nonempty sequence of directed terms. `label` names
/// the role (regular and marker strands) or the adversary ability.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Strand<M> {
    pub id: StrandId,
    pub kind: StrandKind,
    pub label: String,
    pub trace: Vec<DirectedTerm<M>>,
}

impl<M> Strand<M> {
    pub fn new(
        id: impl Into<String>,
        kind: StrandKind,
        label: impl Into<String>,
        trace: Vec<DirectedTerm<M>>,
    ) -> Self {
        Strand {
            id: StrandId::new(id),
            kind,
            label: label.into(),
            trace,
        }
    }

    pub fn len(&self) -> usize {
        self.trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.is_empty()
    }
}

/// The node `(strand, index)`; indices are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeRef {
    pub strand: StrandId,
    pub index: usize,
}

impl NodeRef {
    pub fn new(strand: impl Into<String>, index: usize) -> Self {
        NodeRef {
            strand: StrandId::new(strand),
            index,
        }
    }

    pub fn of(strand: &StrandId, index: usize) -> Self {
        NodeRef {
            strand: strand.clone(),
            index,
        }
    }

    /// The node immediately after this one on its strand.
    pub fn next(&self) -> Self {
        NodeRef::of(&self.strand, self.index + 1)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.strand, self.index)
    }
}

pub type Edge = (NodeRef, NodeRef);

/// A candidate bundle: strands, included nodes, `⇒` edges and `→` edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bundle<M> {
    pub strands: BTreeMap<StrandId, Strand<M>>,
    pub nodes: BTreeSet<NodeRef>,
    pub succ_edges: BTreeSet<Edge>,
    pub comm_edges: BTreeSet<Edge>,
}

impl<M> Default for Bundle<M> {
    fn default() -> Self {
        Bundle {
            strands: BTreeMap::new(),
            nodes: BTreeSet::new(),
            succ_edges: BTreeSet::new(),
            comm_edges: BTreeSet::new(),
        }
    }
}

impl<M> Bundle<M> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a strand with its first `height` nodes included, together with
    /// the succession edges between them.
    pub fn add_strand(&mut self, strand: Strand<M>, height: usize) -> &mut Self {
        let id = strand.id.clone();
        for i in 1..=height {
            self.nodes.insert(NodeRef::of(&id, i));
            if i > 1 {
                self.succ_edges
                    .insert((NodeRef::of(&id, i - 1), NodeRef::of(&id, i)));
            }
        }
        self.strands.insert(id, strand);
        self
    }

    /// Adds a strand with all of its nodes included.
    pub fn add_full_strand(&mut self, strand: Strand<M>) -> &mut Self {
        let h = strand.len();
        self.add_strand(strand, h)
    }

    pub fn add_comm(&mut self, from: NodeRef, to: NodeRef) -> &mut Self {
        self.comm_edges.insert((from, to));
        self
    }

    pub fn strand(&self, id: &StrandId) -> Option<&Strand<M>> {
        self.strands.get(id)
    }

    pub fn dmsg(&self, n: &NodeRef) -> Option<&DirectedTerm<M>> {
        if n.index == 0 {
            return None;
        }
        self.strands
            .get(&n.strand)
            .and_then(|s| s.trace.get(n.index - 1))
    }

    pub fn msg(&self, n: &NodeRef) -> Option<&M> {
        self.dmsg(n).map(|d| &d.msg)
    }

    /// Number of included nodes on a strand.
    pub fn height(&self, id: &StrandId) -> usize {
        self.nodes.iter().filter(|n| &n.strand == id).count()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn incoming_comm<'a>(&'a self, n: &'a NodeRef) -> impl Iterator<Item = &'a NodeRef> + 'a {
        self.comm_edges
            .iter()
            .filter(move |(_, t)| t == n)
            .map(|(s, _)| s)
    }

    pub fn outgoing_comm<'a>(&'a self, n: &'a NodeRef) -> impl Iterator<Item = &'a NodeRef> + 'a {
        self.comm_edges
            .iter()
            .filter(move |(s, _)| s == n)
            .map(|(_, t)| t)
    }

    /// Included nodes of strands of the given kind.
    pub fn nodes_of_kind(&self, kind: StrandKind) -> impl Iterator<Item = &NodeRef> + '_ {
        self.nodes
            .iter()
            .filter(move |n| self.strands.get(&n.strand).map(|s| s.kind) == Some(kind))
    }

    pub fn strands_of_kind(&self, kind: StrandKind) -> impl Iterator<Item = &Strand<M>> + '_ {
        self.strands.values().filter(move |s| s.kind == kind)
    }

    /// Included nodes of one strand, in strand order.
    pub fn strand_nodes(&self, id: &StrandId) -> Vec<NodeRef> {
        self.nodes
            .iter()
            .filter(|n| &n.strand == id)
            .cloned()
            .collect()
    }

    /// Restriction to a node subset: strands keep their traces, nodes and
    /// edges are those with all endpoints in `keep`. Strands with no kept
    /// node are dropped.
    pub fn restrict(&self, keep: &BTreeSet<NodeRef>) -> Bundle<M>
    where
        M: Clone,
    {
        let nodes: BTreeSet<NodeRef> = self.nodes.intersection(keep).cloned().collect();
        let strands = self
            .strands
            .iter()
            .filter(|(id, _)| nodes.iter().any(|n| &n.strand == *id))
            .map(|(id, s)| (id.clone(), s.clone()))
            .collect();
        let in_set = |e: &&Edge| nodes.contains(&e.0) && nodes.contains(&e.1);
        Bundle {
            strands,
            succ_edges: self.succ_edges.iter().filter(in_set).cloned().collect(),
            comm_edges: self.comm_edges.iter().filter(in_set).cloned().collect(),
            nodes,
        }
    }

    /// Applies `f` to every message, keeping the graph.
    pub fn map_messages<N>(&self, mut f: impl FnMut(&M) -> N) -> Bundle<N> {
        let strands = self
            .strands
            .iter()
            .map(|(id, s)| {
                let trace = s
                    .trace
                    .iter()
                    .map(|d| DirectedTerm {
                        dir: d.dir,
                        msg: f(&d.msg),
                    })
                    .collect();
                (
                    id.clone(),
                    Strand {
                        id: s.id.clone(),
                        kind: s.kind,
                        label: s.label.clone(),
                        trace,
                    },
                )
            })
            .collect();
        Bundle {
            strands,
            nodes: self.nodes.clone(),
            succ_edges: self.succ_edges.clone(),
            comm_edges: self.comm_edges.clone(),
        }
    }
}

/// A failed bundle clause, naming the offending node or edge.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "clause")]
pub enum BundleViolation {
    /// The node names no strand, or an index outside its trace.
    UnknownNode { node: NodeRef },
    /// B1: a node is included but its predecessor is not.
    NotPrefixClosed { node: NodeRef, missing: NodeRef },
    /// B2: strand succession between included nodes lacks its edge.
    MissingSuccEdge { from: NodeRef, to: NodeRef },
    /// B2: a `⇒` edge that is not strand succession within the node set.
    SpuriousSuccEdge { from: NodeRef, to: NodeRef },
    /// B3: a `→` edge with an endpoint outside the node set.
    DanglingCommEdge { from: NodeRef, to: NodeRef },
    /// B3: a `→` edge not from `+t` to `-t` for one message `t`.
    CommMismatch { from: NodeRef, to: NodeRef },
    /// B4: a reception with no incoming `→` edge.
    UnfedReception { node: NodeRef },
    /// B4: a reception with several incoming `→` edges.
    MultiplyFedReception { node: NodeRef, sources: usize },
    /// B5: the node lies on a cycle.
    Cycle { node: NodeRef },
}

impl BundleViolation {
    pub fn clause(&self) -> &'static str {
        match self {
            BundleViolation::UnknownNode { .. } => "B0",
            BundleViolation::NotPrefixClosed { .. } => "B1",
            BundleViolation::MissingSuccEdge { .. } | BundleViolation::SpuriousSuccEdge { .. } => {
                "B2"
            }
            BundleViolation::DanglingCommEdge { .. } | BundleViolation::CommMismatch { .. } => "B3",
            BundleViolation::UnfedReception { .. }
            | BundleViolation::MultiplyFedReception { .. } => "B4",
            BundleViolation::Cycle { .. } => "B5",
        }
    }
}

impl fmt::Display for BundleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BundleViolation::UnknownNode { node } => {
                write!(f, "B0: {node} is not a node of any strand")
            }
            BundleViolation::NotPrefixClosed { node, missing } => {
                write!(
                    f,
                    "B1: {node} is included but its predecessor {missing} is not"
                )
            }
            BundleViolation::MissingSuccEdge { from, to } => {
                write!(f, "B2: missing {from} => {to}")
            }
            BundleViolation::SpuriousSuccEdge { from, to } => {
                write!(f, "B2: spurious {from} => {to}")
            }
            BundleViolation::DanglingCommEdge { from, to } => {
                write!(f, "B3: {from} -> {to} leaves the node set")
            }
            BundleViolation::CommMismatch { from, to } => {
                write!(
                    f,
                    "B3: {from} -> {to} does not carry one message from + to -"
                )
            }
            BundleViolation::UnfedReception { node } => {
                write!(f, "B4: reception {node} has no sender")
            }
            BundleViolation::MultiplyFedReception { node, sources } => {
                write!(f, "B4: reception {node} has {sources} senders")
            }
            BundleViolation::Cycle { node } => write!(f, "B5: {node} lies on a cycle"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrandError {
    #[error("not a bundle: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidBundle(Vec<BundleViolation>),
    #[error("empty node set")]
    EmptySet,
    #[error("node {0} is not in the bundle")]
    UnknownNode(NodeRef),
}

/// Checks the bundle clauses; the empty list means `b` is a bundle.
pub fn validate_bundle<M: PartialEq>(b: &Bundle<M>) -> Vec<BundleViolation> {
    let mut out = Vec::new();

    for n in &b.nodes {
        if b.dmsg(n).is_none() {
            out.push(BundleViolation::UnknownNode { node: n.clone() });
        }
    }

    for n in &b.nodes {
        if n.index > 1 {
            let prev = NodeRef::of(&n.strand, n.index - 1);
            if !b.nodes.contains(&prev) {
                out.push(BundleViolation::NotPrefixClosed {
                    node: n.clone(),
                    missing: prev,
                });
            }
        }
    }

    for n in &b.nodes {
        let next = n.next();
        if b.nodes.contains(&next) && !b.succ_edges.contains(&(n.clone(), next.clone())) {
            out.push(BundleViolation::MissingSuccEdge {
                from: n.clone(),
                to: next,
            });
        }
    }
    for (m, n) in &b.succ_edges {
        let ok = m.strand == n.strand
            && n.index == m.index + 1
            && b.nodes.contains(m)
            && b.nodes.contains(n);
        if !ok {
            out.push(BundleViolation::SpuriousSuccEdge {
                from: m.clone(),
                to: n.clone(),
            });
        }
    }

    for (m, n) in &b.comm_edges {
        if !b.nodes.contains(m) || !b.nodes.contains(n) {
            out.push(BundleViolation::DanglingCommEdge {
                from: m.clone(),
                to: n.clone(),
            });
            continue;
        }
        let ok = match (b.dmsg(m), b.dmsg(n)) {
            (Some(dm), Some(dn)) => {
                dm.dir == Direction::Send && dn.dir == Direction::Recv && dm.msg == dn.msg
            }
            _ => false,
        };
        if !ok {
            out.push(BundleViolation::CommMismatch {
                from: m.clone(),
                to: n.clone(),
            });
        }
    }

    let mut fed: BTreeMap<&NodeRef, usize> = BTreeMap::new();
    for (_, n) in &b.comm_edges {
        *fed.entry(n).or_default() += 1;
    }
    for n in &b.nodes {
        if let Some(d) = b.dmsg(n) {
            if d.dir == Direction::Recv {
                match fed.get(n).copied().unwrap_or(0) {
                    0 => out.push(BundleViolation::UnfedReception { node: n.clone() }),
                    1 => {}
                    k => out.push(BundleViolation::MultiplyFedReception {
                        node: n.clone(),
                        sources: k,
                    }),
                }
            }
        }
    }

    for n in order::cyclic_nodes(b) {
        out.push(BundleViolation::Cycle { node: n });
    }
    out
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    fn s(id: &str, trace: &[(Direction, &str)]) -> Strand<String> {
        Strand::new(
            id,
            StrandKind::Regular,
            id,
            trace
                .iter()
                .map(|(d, m)| DirectedTerm {
                    dir: *d,
                    msg: m.to_string(),
                })
                .collect(),
        )
    }

    use Direction::{Recv as R, Send as S};

    /// The five example strands; `n1..n12` map to `(strand, index)`.
    pub fn strands() -> Vec<Strand<String>> {
        vec![
            s("1", &[(S, "Hello"), (R, "Bye")]),
            s("2", &[(S, "Good luck"), (R, "Thanks")]),
            s("3", &[(R, "Good luck"), (S, "Thanks")]),
            s(
                "4",
                &[(R, "Hello"), (R, "Good luck"), (S, "Thanks"), (S, "Bye")],
            ),
            s("5", &[(R, "Thanks"), (S, "Bye")]),
        ]
    }

    pub fn n(k: usize) -> NodeRef {
        let (s, i) = match k {
            1 => ("1", 1),
            2 => ("1", 2),
            3 => ("2", 1),
            4 => ("2", 2),
            5 => ("3", 1),
            6 => ("3", 2),
            7 => ("4", 1),
            8 => ("4", 2),
            9 => ("4", 3),
            10 => ("4", 4),
            11 => ("5", 1),
            12 => ("5", 2),
            _ => panic!("no node n{k}"),
        };
        NodeRef::new(s, i)
    }

    fn build(include: &[(&str, usize)], comm: &[(usize, usize)]) -> Bundle<String> {
        let all = strands();
        let mut b = Bundle::new();
        for (id, h) in include {
            let st = all.iter().find(|s| s.id.0 == *id).unwrap().clone();
            b.add_strand(st, *h);
        }
        for (m, k) in comm {
            b.add_comm(n(*m), n(*k));
        }
        b
    }

    /// Strands (2) and (3) exchanging "Good luck" and "Thanks".
    pub fn first() -> Bundle<String> {
        build(&[("2", 2), ("3", 2)], &[(3, 5), (6, 4)])
    }

    /// Strands (1), (2), (4) with (4) relaying between them.
    pub fn second() -> Bundle<String> {
        build(
            &[("1", 2), ("2", 2), ("4", 4)],
            &[(1, 7), (3, 8), (9, 4), (10, 2)],
        )
    }

    /// Strand (5) consumes "Thanks" and supplies "Bye".
    pub fn third() -> Bundle<String> {
        build(
            &[("1", 2), ("2", 1), ("4", 3), ("5", 2)],
            &[(1, 7), (3, 8), (9, 11), (12, 2)],
        )
    }
}
