//! Initial sub-bundles: downward-closed embeddings of one abstract bundle
//! into another, optionally up to a substitution of values and names.

use std::collections::{BTreeMap, BTreeSet};

use crate::abs::AbsEvent;
use crate::chor::AbstractMessage;
use crate::strand::{Bundle, NodeRef, StrandId};

/// Maps values and principal names of the larger bundle to those of the
/// smaller one.
pub type ValueMap = BTreeMap<String, String>;

fn bind(sigma: &mut ValueMap, from: &str, to: &str) -> bool {
    match sigma.get(from) {
        Some(x) => x == to,
        None => {
            sigma.insert(from.to_string(), to.to_string());
            true
        }
    }
}

fn msg_matches(small: &AbstractMessage, big: &AbstractMessage, sigma: &mut ValueMap) -> bool {
    match (small, big) {
        (AbstractMessage::Value(a), AbstractMessage::Value(b)) => bind(sigma, b, a),
        (
            AbstractMessage::Box {
                contents: ca,
                from: fa,
                to: ta,
            },
            AbstractMessage::Box {
                contents: cb,
                from: fb,
                to: tb,
            },
        ) => {
            ca.len() == cb.len()
                && bind(sigma, fb.as_str(), fa.as_str())
                && bind(sigma, tb.as_str(), ta.as_str())
                && ca.iter().zip(cb).all(|(x, y)| msg_matches(x, y, sigma))
        }
        _ => false,
    }
}

/// Event agreement under `sigma`: op labels must be equal, payloads may
/// differ by the substitution. End markers never match.
pub fn event_matches(small: &AbsEvent, big: &AbsEvent, sigma: &mut ValueMap) -> bool {
    match (small, big) {
        (
            AbsEvent::Interaction {
                op: oa,
                payload: pa,
            },
            AbsEvent::Interaction {
                op: ob,
                payload: pb,
            },
        ) => {
            oa == ob
                && pa.len() == pb.len()
                && pa.iter().zip(pb).all(|(x, y)| msg_matches(x, y, sigma))
        }
        _ => false,
    }
}

/// A found embedding: the strand map and the substitution used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Embedding {
    pub strands: BTreeMap<StrandId, StrandId>,
    pub sigma: ValueMap,
}

struct Search<'a> {
    small: &'a Bundle<AbsEvent>,
    big: &'a Bundle<AbsEvent>,
    order: Vec<(StrandId, usize)>,
    substitute: bool,
}

impl Search<'_> {
    fn assign(
        &self,
        k: usize,
        map: &mut BTreeMap<StrandId, StrandId>,
        used: &mut BTreeSet<StrandId>,
        sigma: &ValueMap,
    ) -> Option<ValueMap> {
        if k == self.order.len() {
            return self.downward_closed(map).then(|| sigma.clone());
        }
        let (sa, h) = &self.order[k];
        let a = &self.small.strands[sa];
        for (sb, b) in &self.big.strands {
            if used.contains(sb) || b.kind != a.kind || self.big.height(sb) < *h {
                continue;
            }
            let mut s2 = sigma.clone();
            let ok = (0..*h).all(|i| {
                let (x, y) = (&a.trace[i], &b.trace[i]);
                x.dir == y.dir
                    && if self.substitute {
                        event_matches(&x.msg, &y.msg, &mut s2)
                    } else {
                        x.msg == y.msg
                    }
            });
            if !ok {
                continue;
            }
            map.insert(sa.clone(), sb.clone());
            used.insert(sb.clone());
            if self.edges_ok(sa, map) {
                if let Some(s) = self.assign(k + 1, map, used, &s2) {
                    return Some(s);
                }
            }
            map.remove(sa);
            used.remove(sb);
        }
        None
    }

    fn edges_ok(&self, just: &StrandId, map: &BTreeMap<StrandId, StrandId>) -> bool {
        self.small.comm_edges.iter().all(|(m, n)| {
            if &m.strand != just && &n.strand != just {
                return true;
            }
            match (map.get(&m.strand), map.get(&n.strand)) {
                (Some(sm), Some(sn)) => self
                    .big
                    .comm_edges
                    .contains(&(NodeRef::of(sm, m.index), NodeRef::of(sn, n.index))),
                _ => true,
            }
        })
    }

    /// Every edge of the big bundle into the image comes from the image.
    fn downward_closed(&self, map: &BTreeMap<StrandId, StrandId>) -> bool {
        let image: BTreeSet<NodeRef> = self
            .small
            .nodes
            .iter()
            .map(|n| NodeRef::of(&map[&n.strand], n.index))
            .collect();
        self.big
            .comm_edges
            .iter()
            .all(|(m, n)| !image.contains(n) || image.contains(m))
    }
}

fn embed(small: &Bundle<AbsEvent>, big: &Bundle<AbsEvent>, substitute: bool) -> Option<Embedding> {
    let mut heights: BTreeMap<StrandId, usize> = BTreeMap::new();
    for n in &small.nodes {
        *heights.entry(n.strand.clone()).or_default() += 1;
    }
    let mut order: Vec<(StrandId, usize)> = heights.into_iter().collect();
    order.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    let search = Search {
        small,
        big,
        order,
        substitute,
    };
    let mut map = BTreeMap::new();
    let sigma = search.assign(0, &mut map, &mut BTreeSet::new(), &ValueMap::new())?;
    Some(Embedding {
        strands: map,
        sigma,
    })
}

/// `small` embeds in `big` with equal messages, edges preserved and a
/// downward-closed node image.
pub fn is_initial_subbundle(small: &Bundle<AbsEvent>, big: &Bundle<AbsEvent>) -> bool {
    embed(small, big, false).is_some()
}

/// As [`is_initial_subbundle`], with `big`'s values and names substituted
/// by some map σ; returns the embedding with σ.
pub fn initial_embedding(small: &Bundle<AbsEvent>, big: &Bundle<AbsEvent>) -> Option<Embedding> {
    embed(small, big, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abs::{abs, strip_markers};
    use crate::chor::parse_choreography;
    use crate::strand::{causal_order, validate_bundle};

    fn envs() -> Vec<Bundle<AbsEvent>> {
        let c = parse_choreography(include_str!("../../data/buyer_seller.chor")).unwrap();
        abs(&c)
            .unwrap()
            .into_iter()
            .map(|e| strip_markers(&e.bundle))
            .collect()
    }

    fn pick(envs: &[Bundle<AbsEvent>], op: &str) -> Bundle<AbsEvent> {
        envs.iter()
            .find(|b| {
                b.strands.values().any(|s| {
                    s.trace
                        .iter()
                        .any(|d| d.to_string().starts_with(&format!("+{op}<")))
                })
            })
            .cloned()
            .unwrap()
    }

    /// Restriction of `b` to the nodes carrying the given ops.
    fn truncate(b: &Bundle<AbsEvent>, keep_ops: &[&str]) -> Bundle<AbsEvent> {
        let keep: BTreeSet<NodeRef> = b
            .nodes
            .iter()
            .filter(|n| {
                b.msg(n).is_some_and(|m| {
                    keep_ops
                        .iter()
                        .any(|op| m.to_string().starts_with(&format!("{op}<")))
                })
            })
            .cloned()
            .collect();
        b.restrict(&keep)
    }

    #[test]
    fn reflexive() {
        for b in envs() {
            assert!(is_initial_subbundle(&b, &b));
        }
    }

    #[test]
    fn truncated_success_run_is_initial() {
        let envs = envs();
        let full = pick(&envs, "rcpt");
        let pre = truncate(&full, &["req", "reply"]);
        assert!(validate_bundle(&pre).is_empty());
        assert_eq!(pre.nodes.len(), 4);
        let order = causal_order(&full).unwrap();
        assert_eq!(order.down_closure(&pre.nodes), pre.nodes);
        assert!(is_initial_subbundle(&pre, &full));
    }

    #[test]
    fn refusal_is_not_a_prefix_of_success() {
        let envs = envs();
        let refuse = pick(&envs, "refuse");
        let ok = pick(&envs, "rcpt");
        assert!(!is_initial_subbundle(&refuse, &ok));
        assert!(initial_embedding(&refuse, &ok).is_none());
    }

    #[test]
    fn substitution_renames_values() {
        let envs = envs();
        let full = pick(&envs, "refuse");
        let renamed = full.map_messages(|e| match e {
            AbsEvent::Interaction { op, payload } => AbsEvent::Interaction {
                op: op.clone(),
                payload: payload
                    .iter()
                    .map(|m| match m {
                        AbstractMessage::Value(v) if v == "prod" => AbstractMessage::value("book"),
                        m => m.clone(),
                    })
                    .collect(),
            },
            e => e.clone(),
        });
        assert!(!is_initial_subbundle(&renamed, &full));
        let emb = initial_embedding(&renamed, &full).unwrap();
        assert_eq!(emb.sigma.get("prod").map(String::as_str), Some("book"));
    }
}
