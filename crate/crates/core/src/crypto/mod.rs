//! The cryptographic level: terms, the Dolev-Yao adversary, parametric
//! protocol roles and bounded enumeration of their bundles.

mod cache;
mod deliver;
mod derive;
mod enumerate;
mod protocol;
mod term;

pub use cache::{nonce_cache_run, CacheVerdict, NonceCache};
pub use deliver::{
    check_deliver_once, deliver_once_report, family_members, max_bipartite_matching, FamilyStatus,
};
pub use derive::{derivable, in_basis, Knowledge};
pub use enumerate::{
    enumerate_bundles, AdvKind, Bounds, Enumeration, EnumerationStats, Execution,
    DEFAULT_MAX_STATES,
};
pub use protocol::{
    instantiate, FamilySpec, InstantiateError, ProtoParseError, Protocol, RoleTemplate,
};
pub use term::{
    match_term, parse_term, try_match, AtomKind, Bindings, Symbols, Term, TermParseError,
};
