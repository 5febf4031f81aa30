//! Choreographies, their strand-space semantics, and a bounded checker for
//! faithful abstraction of concrete cryptographic protocols.

pub mod abs;
pub mod chor;
pub mod crypto;
pub mod faithful;
pub mod lts;
pub mod strand;
