//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;

use chorstrand::abs::AbsEvent;
use chorstrand::chor::{AbstractMessage, Branch, Choreography};
use chorstrand::lts::LabelMu;
use chorstrand::strand::{Bundle, DirectedTerm, Direction, NodeRef, Strand, StrandKind};

pub const CHOR: &str = include_str!("../../data/buyer_seller.chor");
pub const PROTO: &str = include_str!("../../data/buyer_seller.proto");
pub const AMAP: &str = include_str!("../../data/buyer_seller.amap");
pub const REPLAY: &str = include_str!("../../data/replay_demo.proto");

pub fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

const ROLES: [&str; 4] = ["P", "Q", "R", "T"];

/// A random choreography meeting the static assumptions: at most 4 roles,
/// at most 3 branches per interaction, depth at most 4. Each continuation
/// is sent by the previous receiver, labels are globally distinct, and a
/// box only travels from its originator straight to its addressee.
pub fn random_choreography(rng: &mut impl Rng) -> Choreography {
    let roles = rng.gen_range(2..=4);
    let depth = rng.gen_range(1..=4);
    let sender = rng.gen_range(0..roles);
    let mut next = 0;
    com(rng, roles, depth, sender, &mut next)
}

fn com(
    rng: &mut impl Rng,
    roles: usize,
    depth: usize,
    sender: usize,
    next: &mut usize,
) -> Choreography {
    if depth == 0 {
        return Choreography::Zero;
    }
    let receiver = (sender + rng.gen_range(1..roles)) % roles;
    let branches = rng.gen_range(1..=3);
    let bs = (0..branches)
        .map(|_| {
            *next += 1;
            let op = format!("op{next}");
            let mut payload = Vec::new();
            for _ in 0..rng.gen_range(0..=2) {
                let v = AbstractMessage::value(format!("v{}", rng.gen_range(0..4)));
                if rng.gen_bool(0.25) {
                    payload.push(AbstractMessage::boxed(
                        vec![v],
                        ROLES[sender],
                        ROLES[receiver],
                    ));
                } else {
                    payload.push(v);
                }
            }
            let sub = if rng.gen_bool(0.2) {
                0
            } else {
                rng.gen_range(0..depth)
            };
            let cont = com(rng, roles, sub, receiver, next);
            Branch::new(ROLES[sender], ROLES[receiver], &op, payload, cont)
        })
        .collect();
    Choreography::Com(bs)
}

/// Clause-by-clause bundle check written without the library's validator.
pub fn naive_is_bundle<M: PartialEq>(b: &Bundle<M>) -> bool {
    let node = |n: &NodeRef| {
        b.strands
            .get(&n.strand)
            .and_then(|s| s.trace.get(n.index.wrapping_sub(1)))
    };
    // every node exists
    if b.nodes.iter().any(|n| n.index == 0 || node(n).is_none()) {
        return false;
    }
    // prefix closed
    for n in &b.nodes {
        if n.index > 1
            && !b
                .nodes
                .contains(&NodeRef::new(n.strand.0.clone(), n.index - 1))
        {
            return false;
        }
    }
    // succession edges are exactly the consecutive included pairs
    let mut succ = BTreeSet::new();
    for n in &b.nodes {
        let m = NodeRef::new(n.strand.0.clone(), n.index + 1);
        if b.nodes.contains(&m) {
            succ.insert((n.clone(), m));
        }
    }
    if succ != b.succ_edges {
        return false;
    }
    // communication edges: included endpoints, + to -, same message
    for (m, n) in &b.comm_edges {
        if !b.nodes.contains(m) || !b.nodes.contains(n) {
            return false;
        }
        let (x, y) = (node(m).unwrap(), node(n).unwrap());
        if x.dir != Direction::Send || y.dir != Direction::Recv || x.msg != y.msg {
            return false;
        }
    }
    // each reception fed exactly once
    for n in &b.nodes {
        if node(n).unwrap().dir == Direction::Recv
            && b.comm_edges.iter().filter(|(_, t)| t == n).count() != 1
        {
            return false;
        }
    }
    // acyclic
    let closure = closure(b);
    !b.nodes
        .iter()
        .any(|n| closure.contains(&(n.clone(), n.clone())))
}

/// Transitive closure of both edge kinds by Floyd-Warshall.
#[allow(clippy::needless_range_loop)]
pub fn closure<M>(b: &Bundle<M>) -> BTreeSet<(NodeRef, NodeRef)> {
    let ns: Vec<&NodeRef> = b.nodes.iter().collect();
    let idx: BTreeMap<&NodeRef, usize> = ns.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let k = ns.len();
    let mut r = vec![vec![false; k]; k];
    for (m, n) in b.succ_edges.iter().chain(&b.comm_edges) {
        if let (Some(&i), Some(&j)) = (idx.get(m), idx.get(n)) {
            r[i][j] = true;
        }
    }
    for via in 0..k {
        for i in 0..k {
            if r[i][via] {
                for j in 0..k {
                    if r[via][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for i in 0..k {
        for j in 0..k {
            if r[i][j] {
                out.insert((ns[i].clone(), ns[j].clone()));
            }
        }
    }
    out
}

/// A random candidate graph with at most 12 nodes. Mostly bundle-shaped,
/// with some local damage so that both verdicts occur often.
pub fn random_graph(rng: &mut impl Rng) -> Bundle<String> {
    let msgs = ["a", "b", "c"];
    let mut b = Bundle::new();
    let mut budget = 12;
    for s in 0..rng.gen_range(1..=4) {
        if budget == 0 {
            break;
        }
        let len = rng.gen_range(1..=budget.min(4));
        budget -= len;
        let trace = (0..len)
            .map(|_| {
                let m = msgs[rng.gen_range(0..msgs.len())].to_string();
                if rng.gen_bool(0.5) {
                    DirectedTerm::send(m)
                } else {
                    DirectedTerm::recv(m)
                }
            })
            .collect();
        let h = rng.gen_range(0..=len);
        b.add_strand(
            Strand::new(format!("s{s}"), StrandKind::Regular, "r", trace),
            h,
        );
    }
    let nodes: Vec<NodeRef> = b.nodes.iter().cloned().collect();
    for n in &nodes {
        if b.dmsg(n).unwrap().dir != Direction::Recv {
            continue;
        }
        let fit: Vec<&NodeRef> = nodes
            .iter()
            .filter(|m| {
                m.strand != n.strand
                    && b.dmsg(m).unwrap().dir == Direction::Send
                    && b.msg(m) == b.msg(n)
            })
            .collect();
        if let Some(m) = fit.choose(rng) {
            b.add_comm((*m).clone(), n.clone());
        }
    }
    let pick = |rng: &mut dyn RngCore, b: &Bundle<String>| {
        let all: Vec<NodeRef> = b
            .strands
            .values()
            .flat_map(|s| (1..=s.trace.len() + 1).map(move |i| NodeRef::new(s.id.0.clone(), i)))
            .collect();
        all.choose(rng).cloned()
    };
    if !nodes.is_empty() {
        match rng.gen_range(0..8) {
            0 => {
                if let (Some(m), Some(n)) = (pick(rng, &b), pick(rng, &b)) {
                    b.comm_edges.insert((m, n));
                }
            }
            1 => {
                if let Some(n) = pick(rng, &b) {
                    b.nodes.insert(n);
                }
            }
            2 => {
                let n = nodes.choose(rng).unwrap().clone();
                b.nodes.remove(&n);
            }
            3 => {
                if let Some(e) = b.succ_edges.iter().next().cloned() {
                    b.succ_edges.remove(&e);
                }
            }
            4 => {
                if let (Some(m), Some(n)) = (pick(rng, &b), pick(rng, &b)) {
                    b.succ_edges.insert((m, n));
                }
            }
            _ => {}
        }
    }
    b
}

/// The interactions read off `b` along a uniformly chosen topological
/// order, skipping end markers.
pub fn random_reading(b: &Bundle<AbsEvent>, rng: &mut impl Rng) -> Vec<LabelMu> {
    let mut preds: BTreeMap<&NodeRef, usize> = b.nodes.iter().map(|n| (n, 0)).collect();
    for (_, n) in b.succ_edges.iter().chain(&b.comm_edges) {
        *preds.get_mut(n).unwrap() += 1;
    }
    let mut out = Vec::new();
    let mut ready: Vec<&NodeRef> = preds
        .iter()
        .filter(|(_, k)| **k == 0)
        .map(|(n, _)| *n)
        .collect();
    while !ready.is_empty() {
        let n = ready.swap_remove(rng.gen_range(0..ready.len()));
        let d = b.dmsg(n).unwrap();
        if let (Direction::Send, AbsEvent::Interaction { op, payload }) = (d.dir, &d.msg) {
            for (m, to) in &b.comm_edges {
                if m == n {
                    let sender = &b.strands[&n.strand].label;
                    let receiver = &b.strands[&to.strand].label;
                    out.push(LabelMu::new(sender, receiver, op.as_str(), payload.clone()));
                }
            }
        }
        for (m, to) in b.succ_edges.iter().chain(&b.comm_edges) {
            if m == n {
                let k = preds.get_mut(to).unwrap();
                *k -= 1;
                if *k == 0 {
                    ready.push(to);
                }
            }
        }
    }
    out
}
