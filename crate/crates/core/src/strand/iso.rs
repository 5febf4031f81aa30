use std::collections::{BTreeMap, BTreeSet};

use super::{Bundle, NodeRef, StrandId};

/// A partial bijection between names, grown while comparing structures.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Renaming {
    fwd: BTreeMap<String, String>,
    bwd: BTreeMap<String, String>,
}

impl Renaming {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `a ↦ b`; false if that contradicts an earlier binding.
    pub fn bind(&mut self, a: &str, b: &str) -> bool {
        match (self.fwd.get(a), self.bwd.get(b)) {
            (Some(x), Some(y)) => x == b && y == a,
            (None, None) => {
                self.fwd.insert(a.to_string(), b.to_string());
                self.bwd.insert(b.to_string(), a.to_string());
                true
            }
            _ => false,
        }
    }

    pub fn get(&self, a: &str) -> Option<&str> {
        self.fwd.get(a).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }
}

/// Message equality modulo a renaming of fresh names.
pub trait MatchModulo {
    fn match_modulo(&self, other: &Self, ren: &mut Renaming) -> bool;
}

impl MatchModulo for String {
    fn match_modulo(&self, other: &Self, _: &mut Renaming) -> bool {
        self == other
    }
}

/// Structural isomorphism: a bijection of strands preserving kind, the
/// included part of each trace (up to [`MatchModulo`]) and all edges.
pub fn isomorphic<M: MatchModulo>(a: &Bundle<M>, b: &Bundle<M>) -> bool {
    isomorphic_by(a, b, |x, y, r| x.match_modulo(y, r)).is_some()
}

/// Isomorphism under a caller-supplied message comparison. Returns the
/// strand bijection on success.
pub fn isomorphic_by<M, N>(
    a: &Bundle<M>,
    b: &Bundle<N>,
    eq: impl Fn(&M, &N, &mut Renaming) -> bool,
) -> Option<BTreeMap<StrandId, StrandId>> {
    if a.nodes.len() != b.nodes.len() || a.comm_edges.len() != b.comm_edges.len() {
        return None;
    }
    let heights = |nodes: &BTreeSet<NodeRef>| {
        let mut h: BTreeMap<StrandId, usize> = BTreeMap::new();
        for n in nodes {
            *h.entry(n.strand.clone()).or_default() += 1;
        }
        h
    };
    let ha = heights(&a.nodes);
    let hb = heights(&b.nodes);
    if ha.keys().any(|id| !a.strands.contains_key(id))
        || hb.keys().any(|id| !b.strands.contains_key(id))
    {
        return None;
    }
    if ha.len() != hb.len() {
        return None;
    }
    let mut sig_a: Vec<_> = ha
        .iter()
        .map(|(id, h)| (a.strands.get(id).map(|s| s.kind), *h))
        .collect();
    let mut sig_b: Vec<_> = hb
        .iter()
        .map(|(id, h)| (b.strands.get(id).map(|s| s.kind), *h))
        .collect();
    sig_a.sort();
    sig_b.sort();
    if sig_a != sig_b {
        return None;
    }

    let mut order: Vec<(StrandId, usize)> = ha.into_iter().collect();
    order.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    let cands: Vec<(StrandId, usize)> = hb.into_iter().collect();

    let search = Search {
        a,
        b,
        eq: &eq,
        order: &order,
        cands: &cands,
    };
    let mut map = BTreeMap::new();
    let mut used = BTreeSet::new();
    if search.assign(0, &mut map, &mut used, &Renaming::new()) {
        Some(map)
    } else {
        None
    }
}

struct Search<'a, M, N, F> {
    a: &'a Bundle<M>,
    b: &'a Bundle<N>,
    eq: &'a F,
    order: &'a [(StrandId, usize)],
    cands: &'a [(StrandId, usize)],
}

impl<M, N, F: Fn(&M, &N, &mut Renaming) -> bool> Search<'_, M, N, F> {
    fn assign(
        &self,
        k: usize,
        map: &mut BTreeMap<StrandId, StrandId>,
        used: &mut BTreeSet<StrandId>,
        ren: &Renaming,
    ) -> bool {
        if k == self.order.len() {
            return true;
        }
        let (sa, h) = &self.order[k];
        let strand_a = &self.a.strands[sa];
        for (sb, hb) in self.cands {
            if hb != h || used.contains(sb) {
                continue;
            }
            let strand_b = &self.b.strands[sb];
            if strand_a.kind != strand_b.kind {
                continue;
            }
            let mut r = ren.clone();
            let traces_match = (0..*h).all(|i| {
                let (x, y) = (&strand_a.trace[i], &strand_b.trace[i]);
                x.dir == y.dir && (self.eq)(&x.msg, &y.msg, &mut r)
            });
            if !traces_match {
                continue;
            }
            map.insert(sa.clone(), sb.clone());
            used.insert(sb.clone());
            if self.edges_consistent(sa, map) && self.assign(k + 1, map, used, &r) {
                return true;
            }
            map.remove(sa);
            used.remove(sb);
        }
        false
    }

    fn edges_consistent(&self, just: &StrandId, map: &BTreeMap<StrandId, StrandId>) -> bool {
        self.a.comm_edges.iter().all(|(m, n)| {
            if &m.strand != just && &n.strand != just {
                return true;
            }
            match (map.get(&m.strand), map.get(&n.strand)) {
                (Some(sm), Some(sn)) => self
                    .b
                    .comm_edges
                    .contains(&(NodeRef::of(sm, m.index), NodeRef::of(sn, n.index))),
                _ => true,
            }
        })
    }
}
