//! Images of concrete strands and bundles under an abstraction map.

use std::collections::BTreeMap;

use super::amap::AbstractionMap;
use crate::abs::AbsEvent;
use crate::crypto::Term;
use crate::strand::{causal_order, Bundle, DirectedTerm, NodeRef, Strand, StrandKind};

/// Image of a strand: the abstracted nodes in order, with directions kept,
/// and for each image node the index of its concrete preimage.
#[derive(Clone, Debug)]
pub struct StrandImage {
    pub strand: Strand<AbsEvent>,
    pub preimage: Vec<usize>,
}

impl StrandImage {
    /// Abstractly vacuous: no node lies in the map's domain.
    pub fn vacuous(&self) -> bool {
        self.preimage.is_empty()
    }
}

/// Image of the first `height` nodes of `s`.
pub fn strand_image_prefix(a: &AbstractionMap, s: &Strand<Term>, height: usize) -> StrandImage {
    let mut trace = Vec::new();
    let mut preimage = Vec::new();
    for (i, d) in s.trace.iter().take(height).enumerate() {
        if let Some(ev) = a.event(&d.msg) {
            trace.push(DirectedTerm {
                dir: d.dir,
                msg: ev,
            });
            preimage.push(i + 1);
        }
    }
    StrandImage {
        strand: Strand {
            id: s.id.clone(),
            kind: s.kind,
            label: s.label.clone(),
            trace,
        },
        preimage,
    }
}

pub fn strand_image(a: &AbstractionMap, s: &Strand<Term>) -> StrandImage {
    strand_image_prefix(a, s, s.trace.len())
}

/// Every image of `c`: the images of its non-vacuous regular strands, with
/// each image reception fed by an image transmission carrying the same
/// event whose preimage precedes the reception's preimage in `c`. One
/// bundle per choice of feeding transmissions, at most `cap` of them.
pub fn bundle_images(a: &AbstractionMap, c: &Bundle<Term>, cap: usize) -> Vec<Bundle<AbsEvent>> {
    let Ok(order) = causal_order(c) else {
        return Vec::new();
    };
    let mut base = Bundle::new();
    // image node -> concrete node
    let mut pre: BTreeMap<NodeRef, NodeRef> = BTreeMap::new();
    for s in c.strands_of_kind(StrandKind::Regular) {
        let img = strand_image_prefix(a, s, c.height(&s.id));
        if img.vacuous() {
            continue;
        }
        for (k, ci) in img.preimage.iter().enumerate() {
            pre.insert(NodeRef::of(&s.id, k + 1), NodeRef::of(&s.id, *ci));
        }
        base.add_full_strand(img.strand);
    }
    let recvs: Vec<NodeRef> = base
        .nodes
        .iter()
        .filter(|n| base.dmsg(n).is_some_and(|d| !d.is_send()))
        .cloned()
        .collect();
    let sends: Vec<NodeRef> = base
        .nodes
        .iter()
        .filter(|n| base.dmsg(n).is_some_and(|d| d.is_send()))
        .cloned()
        .collect();
    let options: Vec<Vec<NodeRef>> = recvs
        .iter()
        .map(|r| {
            sends
                .iter()
                .filter(|s| base.msg(s) == base.msg(r) && order.lt(&pre[s], &pre[r]))
                .cloned()
                .collect()
        })
        .collect();
    if options.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut pick = vec![0usize; recvs.len()];
    loop {
        let mut b = base.clone();
        for (k, r) in recvs.iter().enumerate() {
            b.add_comm(options[k][pick[k]].clone(), r.clone());
        }
        out.push(b);
        if out.len() >= cap {
            return out;
        }
        // Odometer over the choices.
        let mut k = 0;
        loop {
            if k == pick.len() {
                return out;
            }
            pick[k] += 1;
            if pick[k] < options[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
    }
}

/// Some image of `c`, if one exists.
pub fn bundle_image(a: &AbstractionMap, c: &Bundle<Term>) -> Option<Bundle<AbsEvent>> {
    bundle_images(a, c, 1).pop()
}

#[cfg(test)]
mod tests {
    use super::super::amap::tests::{amap, protocol};
    use super::*;
    use crate::abs::{abs, strip_markers};
    use crate::chor::parse_choreography;
    use crate::crypto::{enumerate_bundles, Bounds, Execution};
    use crate::strand::{isomorphic, validate_bundle};

    fn runs() -> Vec<Execution> {
        enumerate_bundles(&protocol(), Bounds::new(1, 0)).bundles
    }

    fn envs() -> Vec<Bundle<AbsEvent>> {
        let c = parse_choreography(include_str!("../../data/buyer_seller.chor")).unwrap();
        abs(&c)
            .unwrap()
            .into_iter()
            .map(|e| strip_markers(&e.bundle))
            .collect()
    }

    #[test]
    fn client_strand_image() {
        let run = runs()
            .into_iter()
            .find(|e| {
                e.bundle.node_count() == 20
                    && e.bundle.strands.values().any(|s| {
                        s.trace
                            .iter()
                            .any(|d| d.to_string().contains("rcpt receipt"))
                    })
            })
            .unwrap();
        let c = run
            .bundle
            .strands
            .values()
            .find(|s| s.label == "C")
            .unwrap();
        let img = strand_image(&amap(), c);
        let shown: Vec<String> = img.strand.trace.iter().map(|d| d.to_string()).collect();
        assert_eq!(
            shown,
            [
                "+req<prod>",
                "-reply<quote>",
                "+ok<box[card]{C,B}>",
                "-rcpt<box[receipt]{B,C}>"
            ]
        );
        assert_eq!(img.preimage, [3, 4, 5, 6]);
    }

    #[test]
    fn refuse_run_leaves_bank_vacuous() {
        let run = runs()
            .into_iter()
            .find(|e| e.bundle.node_count() == 14)
            .unwrap();
        let b = run
            .bundle
            .strands
            .values()
            .find(|s| s.label == "B")
            .unwrap();
        assert!(strand_image(&amap(), b).vacuous());
        assert!(strand_image(&AbstractionMap::default(), b).vacuous());
    }

    #[test]
    fn images_of_honest_runs_are_the_abstract_bundles() {
        let envs = envs();
        for run in runs() {
            let imgs = bundle_images(&amap(), &run.bundle, 8);
            assert_eq!(imgs.len(), 1);
            let img = &imgs[0];
            assert!(validate_bundle(img).is_empty());
            assert_eq!(envs.iter().filter(|e| isomorphic(*e, img)).count(), 1);
        }
    }

    #[test]
    fn image_edges_follow_concrete_order() {
        for run in runs() {
            let order = causal_order(&run.bundle).unwrap();
            let img = bundle_image(&amap(), &run.bundle).unwrap();
            for (m, n) in &img.comm_edges {
                let sm = run.bundle.strands.get(&m.strand).unwrap();
                let si = strand_image(&amap(), sm);
                let sn = run.bundle.strands.get(&n.strand).unwrap();
                let ni = strand_image(&amap(), sn);
                let mc = NodeRef::of(&m.strand, si.preimage[m.index - 1]);
                let nc = NodeRef::of(&n.strand, ni.preimage[n.index - 1]);
                assert!(order.lt(&mc, &nc));
            }
        }
    }

    #[test]
    fn empty_bundle_has_empty_image() {
        let img = bundle_image(&amap(), &Bundle::new()).unwrap();
        assert!(img.is_empty());
    }
}
