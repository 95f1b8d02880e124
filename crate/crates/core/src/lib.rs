//! Taxonomy-aware concept embeddings.
//!
//! Concept vectors are computed from an is-a knowledge graph by decayed
//! transitive-closure enrichment and PCA ([`embed`]); a linear projection maps
//! feature vectors into that space under a cosine loss ([`project`]); queries
//! are classified by exact cosine ranking ([`classify`]) and scored with
//! standard, subsumption-tolerant and sibling-aware zero-shot Hit@k
//! protocols ([`evaluate`]). [`synth`] builds seeded desk-scale benchmarks.

pub mod classify;
pub mod embed;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod project;
pub mod synth;
pub mod taxonomy;

pub use error::{Error, ErrorClass, Result};
