//! Content-based retrieval for long surveillance video.
//!
//! Frames are cut into documents of `A` frames and tiles of `B×B` pixels.
//! Each atom (one tile over one document) gets a handful of cheap features,
//! atoms are aggregated into overlapping pyramidal trees, and the trees are
//! hashed into per-feature p-stable LSH tables that store only
//! `(document, u, v)` references. Queries are ordered lists of user-drawn
//! action components; their index hits (partial matches) are assembled into
//! ranked video segments either greedily or with a Smith–Waterman style
//! dynamic program.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airborne;
pub mod bounds;
pub mod cctv;
pub mod config;
pub mod error;
pub mod feature;
pub mod frame;
pub mod geometry;
pub mod ingest;
pub mod lsh;
pub mod search;
pub mod synth;
pub mod tree;

#[cfg(test)]
mod properties;

pub use error::{Error, Result};
pub use feature::{FeatureKind, FeatureVector};
pub use geometry::{AtomCoord, GridGeometry};
pub use tree::FeatureTree;
