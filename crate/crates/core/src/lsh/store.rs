//! The per-archive index set and its on-disk format.
//!
//! Layout (little-endian):
//!
//! ```text
//! "SVIX" | u16 version | u64 seed
//! geometry: u32 width, height, tile, frames/doc, depth
//! u8 feature set | u32 documents | u8 feature count
//! per feature:
//!     u8 tag | u8 tracked | f64 r | u32 dims | u32 tables
//!     per table:
//!         f64 b | dims × f64 a | u32 buckets
//!         per bucket (ascending key):
//!             u64 key | u32 entries | entries as u32 doc (tracked: u32 doc, u32 track)
//! ```

use std::collections::{BTreeMap, BTreeSet};

use super::{LshIndex, LshParams, Posting, StableHashFunction};
use crate::cctv::CctvAtomFeatures;
use crate::config::FeatureSet;
use crate::error::{Error, Result};
use crate::feature::FeatureKind;
use crate::geometry::GridGeometry;
use crate::tree::FeatureTree;

pub const INDEX_MAGIC: &[u8; 4] = b"SVIX";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct IndexSet {
    pub seed: u64,
    pub geometry: GridGeometry,
    pub feature_set: FeatureSet,
    /// Documents covered by the archive, indexed or not.
    pub documents: u32,
    pub indices: BTreeMap<FeatureKind, LshIndex>,
}

impl IndexSet {
    pub fn new(geometry: GridGeometry, feature_set: FeatureSet, params: &LshParams) -> Result<Self> {
        geometry.validate()?;
        let nodes = geometry.nodes_per_tree();
        let tracked = feature_set == FeatureSet::Airborne;
        let indices = feature_set
            .features()
            .iter()
            .map(|&kind| {
                let idx = LshIndex::new(
                    kind,
                    nodes,
                    params.width_for(kind),
                    params.tables,
                    params.seed,
                    tracked,
                )?;
                Ok((kind, idx))
            })
            .collect::<Result<_>>()?;
        Ok(IndexSet {
            seed: params.seed,
            geometry,
            feature_set,
            documents: 0,
            indices,
        })
    }

    pub fn index(&self, kind: FeatureKind) -> Option<&LshIndex> {
        self.indices.get(&kind)
    }

    /// Indexes every tree position of a CCTV document whose activity tree
    /// root exceeds `activity_threshold`. Returns the number of positions indexed.
    pub fn insert_cctv_document(
        &mut self,
        document: u32,
        features: &CctvAtomFeatures,
        activity_threshold: f64,
    ) -> Result<usize> {
        let per_kind = features.trees(&self.geometry, document)?;
        let activity = &per_kind
            .iter()
            .find(|(k, _)| *k == FeatureKind::Activity)
            .expect("activity trees")
            .1;
        let significant: Vec<bool> = activity
            .iter()
            .map(|t| t.root().activity().unwrap_or(0.0) > activity_threshold)
            .collect();
        for (kind, trees) in &per_kind {
            let Some(index) = self.indices.get_mut(kind) else {
                continue;
            };
            for (tree, &keep) in trees.iter().zip(&significant) {
                if keep {
                    index.insert(tree, tree.anchor)?;
                }
            }
        }
        self.documents = self.documents.max(document + 1);
        Ok(significant.iter().filter(|&&s| s).count())
    }

    /// Indexes pre-built trees (airborne displacement trees carry their track id).
    pub fn insert_trees(&mut self, trees: &[FeatureTree]) -> Result<()> {
        for tree in trees {
            let index = self.indices.get_mut(&tree.kind).ok_or_else(|| {
                Error::IndexMismatch(format!("no {} index in this archive", tree.kind))
            })?;
            index.insert(tree, tree.anchor)?;
            self.documents = self.documents.max(tree.anchor.t + 1);
        }
        Ok(())
    }

    pub fn mark_documents(&mut self, documents: u32) {
        self.documents = self.documents.max(documents);
    }

    pub fn entry_count(&self) -> usize {
        self.indices.values().map(LshIndex::entry_count).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        let g = &self.geometry;
        for x in [
            g.frame_width,
            g.frame_height,
            g.tile_size,
            g.frames_per_document,
            g.tree_depth,
        ] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.push(self.feature_set.tag());
        out.extend_from_slice(&self.documents.to_le_bytes());
        out.push(self.indices.len() as u8);
        for (kind, index) in &self.indices {
            out.push(kind.tag());
            out.push(index.tracked as u8);
            out.extend_from_slice(&index.bucket_width().to_le_bytes());
            out.extend_from_slice(&(index.dims() as u32).to_le_bytes());
            out.extend_from_slice(&(index.tables.len() as u32).to_le_bytes());
            for table in &index.tables {
                out.extend_from_slice(&table.function.b.to_le_bytes());
                for a in &table.function.a {
                    out.extend_from_slice(&a.to_le_bytes());
                }
                out.extend_from_slice(&(table.buckets.len() as u32).to_le_bytes());
                for (key, postings) in &table.buckets {
                    out.extend_from_slice(&key.to_le_bytes());
                    out.extend_from_slice(&(postings.len() as u32).to_le_bytes());
                    for p in postings {
                        out.extend_from_slice(&p.doc.to_le_bytes());
                        if index.tracked {
                            out.extend_from_slice(&p.track.unwrap_or(u32::MAX).to_le_bytes());
                        }
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != INDEX_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let seed = r.u64()?;
        let geometry = GridGeometry {
            frame_width: r.u32()?,
            frame_height: r.u32()?,
            tile_size: r.u32()?,
            frames_per_document: r.u32()?,
            tree_depth: r.u32()?,
        };
        geometry
            .validate()
            .map_err(|e| Error::Format(e.to_string()))?;
        let feature_set = FeatureSet::from_tag(r.u8()?)
            .ok_or_else(|| Error::Format("unknown feature set".into()))?;
        let documents = r.u32()?;
        let count = r.u8()?;
        let mut indices = BTreeMap::new();
        for _ in 0..count {
            let kind = FeatureKind::from_tag(r.u8()?)
                .ok_or_else(|| Error::Format("unknown feature tag".into()))?;
            let tracked = r.u8()? != 0;
            let width = r.f64()?;
            let dims = r.u32()? as usize;
            let n = r.u32()?;
            if n == 0 {
                return Err(Error::Format(format!("{kind} index without tables")));
            }
            let mut tables = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let b = r.f64()?;
                let a = (0..dims).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                let mut table = super::HashTable::new(StableHashFunction { a, b, r: width });
                let buckets = r.u32()?;
                for _ in 0..buckets {
                    let key = r.u64()?;
                    let entries = r.u32()?;
                    let mut set = BTreeSet::new();
                    for _ in 0..entries {
                        let doc = r.u32()?;
                        let track = if tracked { Some(r.u32()?) } else { None };
                        set.insert(Posting { doc, track });
                    }
                    table.buckets.insert(key, set);
                }
                tables.push(table);
            }
            indices.insert(
                kind,
                LshIndex {
                    kind,
                    tracked,
                    tables,
                },
            );
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(IndexSet {
            seed,
            geometry,
            feature_set,
            documents,
            indices,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
