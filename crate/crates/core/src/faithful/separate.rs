//! Splitting a concrete bundle into per-session components.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::crypto::Term;
use crate::strand::{causal_order, validate_bundle, Bundle, NodeRef, StrandId, StrandKind};

/// A partition of the regular nodes of a bundle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComponentFamily {
    pub components: Vec<BTreeSet<NodeRef>>,
}

/// Fresh values (nonces and keys) on the included nodes of each regular
/// strand.
pub fn fingerprints(c: &Bundle<Term>) -> BTreeMap<StrandId, BTreeSet<String>> {
    c.strands_of_kind(StrandKind::Regular)
        .map(|s| {
            let h = c.height(&s.id);
            let fp = s
                .trace
                .iter()
                .take(h)
                .flat_map(|d| d.msg.fresh_atoms())
                .collect();
            (s.id.clone(), fp)
        })
        .collect()
}

/// The sub-bundle for one component: its regular nodes plus every
/// adversary node below them.
pub fn component_bundle(c: &Bundle<Term>, comp: &BTreeSet<NodeRef>) -> Bundle<Term> {
    let Ok(order) = causal_order(c) else {
        return c.restrict(comp);
    };
    let below = order.down_closure(comp);
    let adversary: BTreeSet<NodeRef> = c.nodes_of_kind(StrandKind::Adversary).cloned().collect();
    let keep: BTreeSet<NodeRef> = below
        .into_iter()
        .filter(|n| comp.contains(n) || adversary.contains(n))
        .collect();
    c.restrict(&keep)
}

/// Groups regular strands whose fingerprints share a value, transitively.
/// `None` if some component is not a bundle on its own.
pub fn separate(
    c: &Bundle<Term>,
    fps: &BTreeMap<StrandId, BTreeSet<String>>,
) -> Option<ComponentFamily> {
    let ids: Vec<&StrandId> = fps.keys().collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            p[x] = find(p, p[x]);
        }
        p[x]
    }
    let mut owner: BTreeMap<&String, usize> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        for v in &fps[*id] {
            match owner.get(v) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
                None => {
                    owner.insert(v, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<NodeRef>> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().extend(c.strand_nodes(id));
    }
    let components: Vec<BTreeSet<NodeRef>> =
        groups.into_values().filter(|g| !g.is_empty()).collect();
    if components
        .iter()
        .any(|comp| !validate_bundle(&component_bundle(c, comp)).is_empty())
    {
        return None;
    }
    Some(ComponentFamily { components })
}
