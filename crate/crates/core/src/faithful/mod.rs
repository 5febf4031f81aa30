//! Abstraction maps, images of concrete bundles, and the bounded
//! faithfulness check between a protocol and a choreography.

mod amap;
mod check;
mod image;
mod separate;
mod subbundle;

pub use amap::{apply_abstraction, AbstractionMap, AmapError, Extractor, Rule};
pub use check::{
    check_faithfulness, Clause1, Clause2, FaithfulError, FaithfulnessReport, Finding, Verdict,
    Witness, IMAGE_CAP,
};
pub use image::{bundle_image, bundle_images, strand_image, strand_image_prefix, StrandImage};
pub use separate::{component_bundle, fingerprints, separate, ComponentFamily};
pub use subbundle::{event_matches, initial_embedding, is_initial_subbundle, Embedding, ValueMap};
