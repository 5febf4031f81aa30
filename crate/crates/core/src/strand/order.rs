use std::collections::{BTreeMap, BTreeSet};

use super::{validate_bundle, Bundle, NodeRef, StrandError};

/// Dense indexing of a node set with adjacency over `⇒ ∪ →`.
struct Graph {
    nodes: Vec<NodeRef>,
    succ: Vec<Vec<usize>>,
}

impl Graph {
    fn of<M>(b: &Bundle<M>) -> Self {
        let nodes: Vec<NodeRef> = b.nodes.iter().cloned().collect();
        let index: BTreeMap<&NodeRef, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let mut succ = vec![Vec::new(); nodes.len()];
        for (m, n) in b.succ_edges.iter().chain(b.comm_edges.iter()) {
            if let (Some(&i), Some(&j)) = (index.get(m), index.get(n)) {
                succ[i].push(j);
            }
        }
        Graph { nodes, succ }
    }

    /// Kahn's algorithm with smallest-index-first tie breaking. Nodes left
    /// out lie on or after a cycle.
    fn topo(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for out in &self.succ {
            for &j in out {
                indeg[j] += 1;
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &j in &self.succ[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        order
    }
}

pub(super) fn cyclic_nodes<M>(b: &Bundle<M>) -> Vec<NodeRef> {
    let g = Graph::of(b);
    let n = g.nodes.len();
    let sorted = g.topo();
    if sorted.len() == n {
        return Vec::new();
    }
    let mut out = Vec::new();
    for start in 0..n {
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = g.succ[start].clone();
        let mut on_cycle = false;
        while let Some(i) = stack.pop() {
            if i == start {
                on_cycle = true;
                break;
            }
            if !seen[i] {
                seen[i] = true;
                stack.extend(g.succ[i].iter().copied());
            }
        }
        if on_cycle {
            out.push(g.nodes[start].clone());
        }
    }
    out
}

/// The causal partial order `⪯` of a bundle: `a ⪯ b` iff a path over
/// `⇒ ∪ →` leads from `a` to `b` (reflexively).
#[derive(Debug, Clone)]
pub struct CausalOrder {
    nodes: Vec<NodeRef>,
    index: BTreeMap<NodeRef, usize>,
    reach: Vec<Vec<u64>>,
}

impl CausalOrder {
    fn idx(&self, n: &NodeRef) -> Result<usize, StrandError> {
        self.index
            .get(n)
            .copied()
            .ok_or_else(|| StrandError::UnknownNode(n.clone()))
    }

    fn bit(&self, i: usize, j: usize) -> bool {
        self.reach[i][j / 64] >> (j % 64) & 1 == 1
    }

    /// `a ⪯ b`. Unknown nodes are unrelated to everything.
    pub fn leq(&self, a: &NodeRef, b: &NodeRef) -> bool {
        match (self.idx(a), self.idx(b)) {
            (Ok(i), Ok(j)) => self.bit(i, j),
            _ => false,
        }
    }

    /// `a ≺ b`.
    pub fn lt(&self, a: &NodeRef, b: &NodeRef) -> bool {
        a != b && self.leq(a, b)
    }

    pub fn comparable(&self, a: &NodeRef, b: &NodeRef) -> bool {
        self.leq(a, b) || self.leq(b, a)
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    /// The `⪯`-minimal members of `set`.
    pub fn minimal(&self, set: &BTreeSet<NodeRef>) -> Result<BTreeSet<NodeRef>, StrandError> {
        if set.is_empty() {
            return Err(StrandError::EmptySet);
        }
        for n in set {
            self.idx(n)?;
        }
        Ok(set
            .iter()
            .filter(|m| !set.iter().any(|o| self.lt(o, m)))
            .cloned()
            .collect())
    }

    /// The downward closure of `set`.
    pub fn down_closure(&self, set: &BTreeSet<NodeRef>) -> BTreeSet<NodeRef> {
        self.nodes
            .iter()
            .filter(|n| set.iter().any(|s| self.leq(n, s)))
            .cloned()
            .collect()
    }
}

/// Computes `⪯` for a valid bundle.
pub fn causal_order<M: PartialEq>(b: &Bundle<M>) -> Result<CausalOrder, StrandError> {
    let v = validate_bundle(b);
    if !v.is_empty() {
        return Err(StrandError::InvalidBundle(v));
    }
    Ok(order_unchecked(b))
}

pub(crate) fn order_unchecked<M>(b: &Bundle<M>) -> CausalOrder {
    let g = Graph::of(b);
    let n = g.nodes.len();
    let words = n.div_ceil(64).max(1);
    let mut reach = vec![vec![0u64; words]; n];
    let order = g.topo();
    for &i in order.iter().rev() {
        reach[i][i / 64] |= 1 << (i % 64);
        for &j in &g.succ[i] {
            if i == j {
                continue;
            }
            let rj = reach[j].clone();
            for (w, x) in reach[i].iter_mut().zip(rj) {
                *w |= x;
            }
        }
    }
    let index = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    CausalOrder {
        nodes: g.nodes,
        index,
        reach,
    }
}

/// The `⪯`-minimal members of a nonempty node set of a valid bundle.
pub fn minimal_nodes<M: PartialEq>(
    b: &Bundle<M>,
    set: &BTreeSet<NodeRef>,
) -> Result<BTreeSet<NodeRef>, StrandError> {
    causal_order(b)?.minimal(set)
}

/// A deterministic topological order of a valid bundle's nodes.
pub fn topological_order<M: PartialEq>(b: &Bundle<M>) -> Result<Vec<NodeRef>, StrandError> {
    let v = validate_bundle(b);
    if !v.is_empty() {
        return Err(StrandError::InvalidBundle(v));
    }
    let g = Graph::of(b);
    Ok(g.topo().into_iter().map(|i| g.nodes[i].clone()).collect())
}
