//! Labelled transition semantics of choreographies.
//!
//! A multi-branch interaction steps to the continuation of any one of its
//! branches, labelled with that branch's sender, receiver, label and
//! payload. `0` has no transitions.

use std::fmt;

use serde::Serialize;

use crate::chor::{AbstractMessage, Choreography, OpLabel, Payload, Role};

/// The parameters of one performed interaction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LabelMu {
    pub sender: Role,
    pub receiver: Role,
    pub op: OpLabel,
    pub payload: Vec<AbstractMessage>,
}

impl LabelMu {
    pub fn new(sender: &str, receiver: &str, op: &str, payload: Vec<AbstractMessage>) -> Self {
        LabelMu {
            sender: Role::new(sender),
            receiver: Role::new(receiver),
            op: OpLabel::new(op),
            payload,
        }
    }
}

impl fmt::Display for LabelMu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}->{}:{}<{}>",
            self.sender,
            self.receiver,
            self.op,
            Payload(&self.payload)
        )
    }
}

/// One-step successors. The result is a set: it is returned in branch order
/// but no caller may depend on that order.
pub fn step(c: &Choreography) -> Vec<(LabelMu, &Choreography)> {
    match c {
        Choreography::Zero => Vec::new(),
        Choreography::Com(bs) => bs
            .iter()
            .map(|b| {
                let mu = LabelMu {
                    sender: b.sender.clone(),
                    receiver: b.receiver.clone(),
                    op: b.op.clone(),
                    payload: b.payload.clone(),
                };
                (mu, &b.continuation)
            })
            .collect(),
    }
}

/// All maximal label sequences, each ending at `0`, in depth-first order.
pub fn traces(c: &Choreography) -> Vec<Vec<LabelMu>> {
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    collect(c, &mut prefix, &mut out);
    out
}

fn collect(c: &Choreography, prefix: &mut Vec<LabelMu>, out: &mut Vec<Vec<LabelMu>>) {
    let next = step(c);
    if next.is_empty() {
        out.push(prefix.clone());
        return;
    }
    for (mu, cont) in next {
        prefix.push(mu);
        collect(cont, prefix, out);
        prefix.pop();
    }
}

/// Renders a trace as `a->b:op<..> ; ...` (empty trace renders as `ε`).
pub fn format_trace(trace: &[LabelMu]) -> String {
    if trace.is_empty() {
        return "ε".to_string();
    }
    trace
        .iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join(" ; ")
}
