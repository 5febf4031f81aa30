//! Deliver-once: an injection from family receptions to family
//! transmissions on regular strands.

use std::collections::BTreeMap;

use serde::Serialize;

use super::term::Term;
use crate::strand::{Bundle, NodeRef, StrandKind};

/// Whether `t` belongs to the family of `value`: some top-level encrypted
/// unit of `t` (the term itself, or an item of a sequence) contains a nonce
/// or key named `value`.
pub fn family_members(value: &str, t: &Term) -> bool {
    t.items()
        .iter()
        .any(|u| matches!(u, Term::Enc(..)) && u.fresh_atoms().contains(value))
}

/// Kuhn's augmenting-path matching. `adj[l]` lists the right vertices left
/// vertex `l` may use. Returns the matching size.
pub fn max_bipartite_matching(n_right: usize, adj: &[Vec<usize>]) -> usize {
    fn augment(
        l: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &r in &adj[l] {
            if seen[r] {
                continue;
            }
            seen[r] = true;
            if owner[r].is_none_or(|o| augment(o, adj, seen, owner)) {
                owner[r] = Some(l);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n_right];
    (0..adj.len())
        .filter(|&l| augment(l, adj, &mut vec![false; n_right], &mut owner))
        .count()
}

fn regular_nodes<'a>(b: &'a Bundle<Term>, value: &'a str, send: bool) -> Vec<&'a NodeRef> {
    b.nodes_of_kind(StrandKind::Regular)
        .filter(|n| {
            b.dmsg(n)
                .is_some_and(|d| d.is_send() == send && family_members(value, &d.msg))
        })
        .collect()
}

/// True iff every regular reception of a family member can be assigned its
/// own regular transmission of a family member.
pub fn check_deliver_once(b: &Bundle<Term>, value: &str) -> bool {
    let recvs = regular_nodes(b, value, false);
    let sends = regular_nodes(b, value, true);
    let adj: Vec<Vec<usize>> = recvs.iter().map(|_| (0..sends.len()).collect()).collect();
    max_bipartite_matching(sends.len(), &adj) == recvs.len()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FamilyStatus {
    pub value: String,
    pub receptions: usize,
    pub transmissions: usize,
    pub holds: bool,
}

/// Status for every instance of the given family names occurring in `b`.
/// Instance values are the renamed atoms `name@inst`.
pub fn deliver_once_report(b: &Bundle<Term>, families: &[String]) -> Vec<FamilyStatus> {
    let mut values: BTreeMap<String, ()> = BTreeMap::new();
    for s in b.strands.values() {
        for d in &s.trace {
            for a in d.msg.fresh_atoms() {
                let base = a.split('@').next().unwrap_or(&a);
                if families.iter().any(|f| f == base) {
                    values.insert(a.clone(), ());
                }
            }
        }
    }
    values
        .into_keys()
        .map(|v| FamilyStatus {
            receptions: regular_nodes(b, &v, false).len(),
            transmissions: regular_nodes(b, &v, true).len(),
            holds: check_deliver_once(b, &v),
            value: v,
        })
        .collect()
}
