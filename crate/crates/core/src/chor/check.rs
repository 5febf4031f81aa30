use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{AbstractMessage, Branch, Choreography, OpLabel, Role};

/// A breach of the static well-formedness assumptions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    /// An operation label used by more than one branch.
    DuplicateOpLabel {
        op: OpLabel,
        occurrences: usize,
    },
    /// A box first appears in an interaction not sent by its originator.
    BoxOrigin {
        boxed: String,
        op: OpLabel,
        sender: Role,
    },
    /// On some path the box never reaches an interaction received by its
    /// addressee.
    BoxNotDelivered {
        boxed: String,
        first_op: OpLabel,
    },
    /// A continuation's sender is not the receiver of the interaction
    /// before it.
    SenderAlternation {
        op: OpLabel,
        expected: Role,
        found: Role,
    },
    /// Branches of one interaction disagree on sender or receiver.
    MixedParticipants {
        op: OpLabel,
    },
    SelfInteraction {
        op: OpLabel,
    },
    SelfAddressedBox {
        boxed: String,
        op: OpLabel,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateOpLabel { op, occurrences } => {
                write!(f, "operation `{op}` labels {occurrences} branches")
            }
            Violation::BoxOrigin { boxed, op, sender } => {
                write!(
                    f,
                    "{boxed} first occurs in `{op}`, sent by {sender} instead of its originator"
                )
            }
            Violation::BoxNotDelivered { boxed, first_op } => {
                write!(
                    f,
                    "{boxed} (first sent in `{first_op}`) never reaches its addressee on some path"
                )
            }
            Violation::SenderAlternation {
                op,
                expected,
                found,
            } => {
                write!(f, "interaction `{op}` is sent by {found}, expected the previous receiver {expected}")
            }
            Violation::MixedParticipants { op } => {
                write!(
                    f,
                    "branch `{op}` disagrees with its siblings on sender or receiver"
                )
            }
            Violation::SelfInteraction { op } => {
                write!(f, "interaction `{op}` sends to its own sender")
            }
            Violation::SelfAddressedBox { boxed, op } => {
                write!(f, "{boxed} in `{op}` is addressed to its own originator")
            }
        }
    }
}

/// Checks label distinctness, box discipline and sender alternation.
/// Returns the empty list iff all assumptions hold.
pub fn check_static_assumptions(c: &Choreography) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut counts: BTreeMap<&OpLabel, usize> = BTreeMap::new();
    count_ops(c, &mut counts);
    for (op, n) in counts {
        if n > 1 {
            out.push(Violation::DuplicateOpLabel {
                op: op.clone(),
                occurrences: n,
            });
        }
    }

    shape_checks(c, &mut out);

    let mut path = Vec::new();
    let mut box_violations = Vec::new();
    walk_paths(c, &mut path, &mut box_violations);
    for v in box_violations {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn count_ops<'a>(c: &'a Choreography, counts: &mut BTreeMap<&'a OpLabel, usize>) {
    if let Choreography::Com(bs) = c {
        for b in bs {
            *counts.entry(&b.op).or_default() += 1;
            count_ops(&b.continuation, counts);
        }
    }
}

fn shape_checks(c: &Choreography, out: &mut Vec<Violation>) {
    let Choreography::Com(bs) = c else { return };
    let (s0, r0) = (&bs[0].sender, &bs[0].receiver);
    for b in bs {
        if (&b.sender, &b.receiver) != (s0, r0) {
            out.push(Violation::MixedParticipants { op: b.op.clone() });
        }
        if b.sender == b.receiver {
            out.push(Violation::SelfInteraction { op: b.op.clone() });
        }
        let mut boxes = Vec::new();
        for m in &b.payload {
            m.visit_boxes(&mut boxes);
        }
        for bx in boxes {
            if let AbstractMessage::Box { from, to, .. } = bx {
                if from == to {
                    out.push(Violation::SelfAddressedBox {
                        boxed: bx.to_string(),
                        op: b.op.clone(),
                    });
                }
            }
        }
        if let Some(next) = b.continuation.sender() {
            if next != &b.receiver {
                out.push(Violation::SenderAlternation {
                    op: first_op(&b.continuation).clone(),
                    expected: b.receiver.clone(),
                    found: next.clone(),
                });
            }
        }
        shape_checks(&b.continuation, out);
    }
}

fn first_op(c: &Choreography) -> &OpLabel {
    match c {
        Choreography::Com(bs) => &bs[0].op,
        Choreography::Zero => unreachable!("zero has no operation"),
    }
}

fn walk_paths<'a>(c: &'a Choreography, path: &mut Vec<&'a Branch>, out: &mut Vec<Violation>) {
    match c {
        Choreography::Zero => check_path_boxes(path, out),
        Choreography::Com(bs) => {
            for b in bs {
                path.push(b);
                walk_paths(&b.continuation, path, out);
                path.pop();
            }
        }
    }
}

/// Box discipline along one root-to-leaf path: the first occurrence is
/// sent by the originator, and some occurrence is received by the
/// addressee. Forwarding through intermediaries is allowed.
fn check_path_boxes(path: &[&Branch], out: &mut Vec<Violation>) {
    // box -> (first op, delivered?)
    let mut seen: Vec<(&AbstractMessage, &OpLabel, bool)> = Vec::new();
    for b in path {
        let mut boxes = Vec::new();
        for m in &b.payload {
            m.visit_boxes(&mut boxes);
        }
        for bx in boxes {
            let AbstractMessage::Box { from, to, .. } = bx else {
                continue;
            };
            let delivered = &b.receiver == to;
            match seen.iter_mut().find(|(m, _, _)| *m == bx) {
                Some(entry) => entry.2 |= delivered,
                None => {
                    if &b.sender != from {
                        let v = Violation::BoxOrigin {
                            boxed: bx.to_string(),
                            op: b.op.clone(),
                            sender: b.sender.clone(),
                        };
                        if !out.contains(&v) {
                            out.push(v);
                        }
                    }
                    seen.push((bx, &b.op, delivered));
                }
            }
        }
    }
    for (bx, op, delivered) in seen {
        if !delivered {
            let v = Violation::BoxNotDelivered {
                boxed: bx.to_string(),
                first_op: op.clone(),
            };
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chor::{parse_choreography, BUYER_SELLER_SOURCE};

    fn check(src: &str) -> Vec<Violation> {
        check_static_assumptions(&parse_choreography(src).unwrap())
    }

    #[test]
    fn buyer_seller_is_well_formed() {
        assert_eq!(check(BUYER_SELLER_SOURCE), vec![]);
    }

    #[test]
    fn sender_alternation() {
        assert_eq!(
            check("C -> S : a<>. C -> B : b<>. 0"),
            vec![Violation::SenderAlternation {
                op: OpLabel::new("b"),
                expected: Role::new("S"),
                found: Role::new("C"),
            }]
        );
    }

    #[test]
    fn duplicate_labels() {
        assert_eq!(
            check("C -> S : req<>. (S -> C : req<>. 0 + S -> C : no<>. 0)"),
            vec![Violation::DuplicateOpLabel {
                op: OpLabel::new("req"),
                occurrences: 2,
            }]
        );
    }

    #[test]
    fn box_must_start_at_originator() {
        let v = check("S -> B : pay<box[card]{C,B}>. 0");
        assert_eq!(
            v,
            vec![Violation::BoxOrigin {
                boxed: "box[card]{C,B}".into(),
                op: OpLabel::new("pay"),
                sender: Role::new("S"),
            }]
        );
    }

    #[test]
    fn box_must_reach_addressee_on_every_path() {
        let v = check(
            "C -> S : ok<box[card]{C,B}>. (S -> B : pay<box[card]{C,B}>. 0 + S -> B : skip<>. 0)",
        );
        assert_eq!(
            v,
            vec![Violation::BoxNotDelivered {
                boxed: "box[card]{C,B}".into(),
                first_op: OpLabel::new("ok"),
            }]
        );
        assert_eq!(check("C -> S : ok<box[card]{C,S}>. 0"), vec![]);
    }

    #[test]
    fn programmatic_shape_errors() {
        let c = Choreography::Com(vec![
            Branch::new("C", "S", "a", vec![], Choreography::Zero),
            Branch::new("S", "C", "b", vec![], Choreography::Zero),
        ]);
        assert_eq!(
            check_static_assumptions(&c),
            vec![Violation::MixedParticipants {
                op: OpLabel::new("b")
            }]
        );
        let c = Choreography::interaction("C", "C", "a", vec![], Choreography::Zero);
        assert_eq!(
            check_static_assumptions(&c),
            vec![Violation::SelfInteraction {
                op: OpLabel::new("a")
            }]
        );
    }

    #[test]
    fn zero_is_well_formed() {
        assert!(check_static_assumptions(&Choreography::Zero).is_empty());
    }
}
