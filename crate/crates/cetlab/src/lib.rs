//! Cut edge transfer (CET) move calculus on rooted and semi-directed binary
//! phylogenetic networks, with standard-form transformation pipelines and an
//! exhaustive space explorer for verifying connectivity and diameter claims
//! at small leaf counts.

pub mod canon;
pub mod cycles;
pub mod explore;
pub mod graph;
pub mod moves;
pub mod network;
pub mod standard;

pub use canon::CanonicalCode;
pub use graph::{EdgeId, EdgeKind, LeafLabel, MixedGraph, VertexId};
pub use network::{
    CountInvariants, LevelClass, RootedNetwork, SemiDirectedNetwork, ValidationError,
};
