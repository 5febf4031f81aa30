//! The choreography mini-language: roles, abstract messages, branching
//! interactions and the inactive term.
//!
//! Concrete syntax (`.chor` files, UTF-8, `#` starts a line comment):
//!
//! ```text
//! chor   ::= '0' | branch | '(' chor ')' | '(' branch ('+' branch)+ ')'
//! branch ::= role '->' role ':' op '<' [msg (',' msg)*] '>' '.' chor
//! msg    ::= value | 'box' '[' [msg (',' msg)*] ']' '{' role ',' role '}'
//! ```

mod check;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use check::{check_static_assumptions, Violation};
pub use parse::{parse_choreography, ParseError};

/// A participant name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Role(pub String);

impl Role {
    pub fn new(name: impl Into<String>) -> Self {
        Role(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Label selecting one branch of an interaction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpLabel(pub String);

impl OpLabel {
    pub fn new(name: impl Into<String>) -> Self {
        OpLabel(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OpLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A choreography-level message: a plain value, or a box of messages that
/// `from` prepared and only `to` may open.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AbstractMessage {
    Value(String),
    Box {
        contents: Vec<AbstractMessage>,
        from: Role,
        to: Role,
    },
}

impl AbstractMessage {
    pub fn value(v: impl Into<String>) -> Self {
        AbstractMessage::Value(v.into())
    }

    pub fn boxed(contents: Vec<AbstractMessage>, from: &str, to: &str) -> Self {
        AbstractMessage::Box {
            contents,
            from: Role::new(from),
            to: Role::new(to),
        }
    }

    /// Visits this message and every box nested inside it, outermost first.
    pub fn visit_boxes<'a>(&'a self, out: &mut Vec<&'a AbstractMessage>) {
        if let AbstractMessage::Box { contents, .. } = self {
            out.push(self);
            for m in contents {
                m.visit_boxes(out);
            }
        }
    }
}

impl fmt::Display for AbstractMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbstractMessage::Value(v) => f.write_str(v),
            AbstractMessage::Box { contents, from, to } => {
                write!(f, "box[{}]{{{},{}}}", Payload(contents), from, to)
            }
        }
    }
}

/// Displays a message list as `m1,m2,...`.
pub struct Payload<'a>(pub &'a [AbstractMessage]);

impl fmt::Display for Payload<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub sender: Role,
    pub receiver: Role,
    pub op: OpLabel,
    pub payload: Vec<AbstractMessage>,
    pub continuation: Choreography,
}

impl Branch {
    pub fn new(
        sender: &str,
        receiver: &str,
        op: &str,
        payload: Vec<AbstractMessage>,
        continuation: Choreography,
    ) -> Self {
        Branch {
            sender: Role::new(sender),
            receiver: Role::new(receiver),
            op: OpLabel::new(op),
            payload,
            continuation,
        }
    }
}

/// A choreography: a (possibly branching) interaction, or the inactive
/// system `0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Choreography {
    Com(Vec<Branch>),
    Zero,
}

impl Choreography {
    /// Single-branch interaction `sender -> receiver : op<payload>. cont`.
    pub fn interaction(
        sender: &str,
        receiver: &str,
        op: &str,
        payload: Vec<AbstractMessage>,
        cont: Choreography,
    ) -> Self {
        Choreography::Com(vec![Branch::new(sender, receiver, op, payload, cont)])
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Choreography::Zero)
    }

    /// The shared sender of the top-level branches; `None` for `0`.
    pub fn sender(&self) -> Option<&Role> {
        match self {
            Choreography::Com(bs) => bs.first().map(|b| &b.sender),
            Choreography::Zero => None,
        }
    }

    /// The shared receiver of the top-level branches; `None` for `0`.
    pub fn receiver(&self) -> Option<&Role> {
        match self {
            Choreography::Com(bs) => bs.first().map(|b| &b.receiver),
            Choreography::Zero => None,
        }
    }

    /// Every role occurring as a sender, receiver, or box endpoint.
    pub fn roles(&self) -> BTreeSet<Role> {
        let mut out = BTreeSet::new();
        self.collect_roles(&mut out);
        out
    }

    fn collect_roles(&self, out: &mut BTreeSet<Role>) {
        if let Choreography::Com(bs) = self {
            for b in bs {
                out.insert(b.sender.clone());
                out.insert(b.receiver.clone());
                let mut boxes = Vec::new();
                for m in &b.payload {
                    m.visit_boxes(&mut boxes);
                }
                for bx in boxes {
                    if let AbstractMessage::Box { from, to, .. } = bx {
                        out.insert(from.clone());
                        out.insert(to.clone());
                    }
                }
                b.continuation.collect_roles(out);
            }
        }
    }

    /// Number of `0` leaves in the syntax tree.
    pub fn leaf_count(&self) -> usize {
        match self {
            Choreography::Zero => 1,
            Choreography::Com(bs) => bs.iter().map(|b| b.continuation.leaf_count()).sum(),
        }
    }

    /// Length of the longest root-to-leaf path, counted in interactions.
    pub fn depth(&self) -> usize {
        match self {
            Choreography::Zero => 0,
            Choreography::Com(bs) => {
                1 + bs.iter().map(|b| b.continuation.depth()).max().unwrap_or(0)
            }
        }
    }
}

/// The roles of a choreography.
pub fn roles_of(c: &Choreography) -> BTreeSet<Role> {
    c.roles()
}

/// The sender of a choreography, absent for `0`.
pub fn sender_of(c: &Choreography) -> Option<Role> {
    c.sender().cloned()
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {} : {}<{}>. {}",
            self.sender,
            self.receiver,
            self.op,
            Payload(&self.payload),
            self.continuation
        )
    }
}

impl fmt::Display for Choreography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choreography::Zero => f.write_str("0"),
            Choreography::Com(bs) if bs.len() == 1 => write!(f, "{}", bs[0]),
            Choreography::Com(bs) => {
                f.write_str("(")?;
                for (i, b) in bs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{b}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// The Buyer-Seller choreography shipped in `data/buyer_seller.chor`.
pub const BUYER_SELLER_SOURCE: &str = include_str!("../../data/buyer_seller.chor");
