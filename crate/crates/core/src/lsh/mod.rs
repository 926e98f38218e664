//! Per-feature inverted indices backed by p-stable locality-sensitive hashing.
//!
//! Each index holds `n` tables, each with its own random projection
//! `h(x) = floor((a·x + b) / r)`. A bucket is keyed by the hash value and the
//! tree position `(u, v)`, and stores only document ids (plus track ids for
//! airborne footage); feature values are never kept.

mod hash;
mod index;
mod store;

pub use hash::{collision_probability, StableHashFunction};
pub use index::{BucketKey, HashTable, LshIndex, Posting};
pub use store::{IndexSet, FORMAT_VERSION, INDEX_MAGIC};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::feature::FeatureKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LshParams {
    /// Hash tables per feature index.
    pub tables: u32,
    pub seed: u64,
    /// Root activity a tree position must exceed to be indexed.
    pub activity_threshold: f64,
    /// Bucket width `r` per feature.
    pub bucket_width: BTreeMap<FeatureKind, f64>,
}

impl Default for LshParams {
    fn default() -> Self {
        let bucket_width = [
            (FeatureKind::Activity, 0.25),
            (FeatureKind::BlobSize, 30.0),
            (FeatureKind::Color, 0.5),
            (FeatureKind::Persistence, 30.0),
            (FeatureKind::Motion, 0.5),
            (FeatureKind::Displacement, 3.0),
        ]
        .into_iter()
        .collect();
        LshParams {
            tables: 8,
            seed: 0x5eed_cafe,
            activity_threshold: 0.01,
            bucket_width,
        }
    }
}

impl LshParams {
    pub fn width_for(&self, kind: FeatureKind) -> f64 {
        self.bucket_width
            .get(&kind)
            .copied()
            .unwrap_or_else(|| LshParams::default().bucket_width[&kind])
    }
}
