//! Toolkit for relation-conversation markup: grounded image descriptions in
//! which entity mentions and relation mentions carry bounding boxes inline.
//!
//! The pipeline runs text -> [`parser::RecDocument`] -> [`graph::SceneGraph`]
//! -> relation triplets, with evaluation on top: open-vocabulary scene-graph
//! recall ([`metrics`]), predicate-classification recall, and a four-way
//! multiple-choice relation benchmark with circular scoring ([`crpe`]).
//! [`io`] defines the line-delimited JSON formats the CLI speaks.

pub mod cli;
pub mod crpe;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod parser;
pub mod types;

pub use graph::{Edge, Node, SceneGraph};
pub use parser::{ParseMode, RecDocument, RecSegment};
pub use types::{ImageSize, NormBox, PixelBox, RelationTriplet, SemanticTag};
