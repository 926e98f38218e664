use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::StableHashFunction;
use crate::error::{Error, Result};
use crate::feature::FeatureKind;
use crate::geometry::AtomCoord;
use crate::tree::FeatureTree;

/// A stored reference: document id, plus the track id for airborne entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Posting {
    pub doc: u32,
    pub track: Option<u32>,
}

impl Posting {
    pub fn doc(doc: u32) -> Self {
        Posting { doc, track: None }
    }

    pub fn tracked(doc: u32, track: u32) -> Self {
        Posting {
            doc,
            track: Some(track),
        }
    }
}

/// Bucket `(j, u, v)`: hash value plus tree position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BucketKey {
    pub hash: i64,
    pub u: u32,
    pub v: u32,
}

impl BucketKey {
    /// Packs the triple into 64 bits: hash in the high word, then 16 bits each
    /// of `u` and `v`. Hash values are saturated to the `i32` range.
    pub fn mix(&self) -> u64 {
        let h = self.hash.clamp(i32::MIN as i64, i32::MAX as i64) as i32 as u32 as u64;
        (h << 32) | ((self.u as u64 & 0xffff) << 16) | (self.v as u64 & 0xffff)
    }

    pub fn unmix(key: u64) -> BucketKey {
        BucketKey {
            hash: (key >> 32) as u32 as i32 as i64,
            u: ((key >> 16) & 0xffff) as u32,
            v: (key & 0xffff) as u32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HashTable {
    pub function: StableHashFunction,
    pub buckets: BTreeMap<u64, BTreeSet<Posting>>,
}

impl HashTable {
    pub fn new(function: StableHashFunction) -> Self {
        HashTable {
            function,
            buckets: BTreeMap::new(),
        }
    }

    fn key(&self, coords: &[f64], u: u32, v: u32) -> Result<u64> {
        let hash = self.function.hash(coords)?;
        Ok(BucketKey { hash, u, v }.mix())
    }
}

/// All `n` tables of one feature.
#[derive(Clone, Debug, PartialEq)]
pub struct LshIndex {
    pub kind: FeatureKind,
    /// Whether postings carry track ids.
    pub tracked: bool,
    pub tables: Vec<HashTable>,
}

impl LshIndex {
    /// Draws `tables` hash functions for trees of `nodes` nodes. Every table
    /// gets its own ChaCha stream derived from `seed`, the feature and the
    /// table number.
    pub fn new(
        kind: FeatureKind,
        nodes: usize,
        r: f64,
        tables: u32,
        seed: u64,
        tracked: bool,
    ) -> Result<Self> {
        if tables == 0 {
            return Err(Error::Argument("an index needs at least one table".into()));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Argument(format!("bucket width {r} for {kind}")));
        }
        let dims = nodes * kind.dims();
        let tables = (0..tables)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((kind.tag() as u64) << 32) | i as u64);
                HashTable::new(StableHashFunction::random(dims, r, &mut rng))
            })
            .collect();
        Ok(LshIndex {
            kind,
            tracked,
            tables,
        })
    }

    pub fn dims(&self) -> usize {
        self.tables[0].function.dims()
    }

    pub fn bucket_width(&self) -> f64 {
        self.tables[0].function.r
    }

    fn coords(&self, tree: &FeatureTree) -> Result<Vec<f64>> {
        if tree.kind != self.kind {
            return Err(Error::MixedFeatures {
                expected: self.kind,
                actual: tree.kind,
            });
        }
        Ok(tree.flatten())
    }

    /// Adds `coord.t` (and the tree's track id, when tracked) to bucket
    /// `(h_i(tree), u, v)` of every table. Re-inserting is a no-op.
    pub fn insert(&mut self, tree: &FeatureTree, coord: AtomCoord) -> Result<()> {
        let coords = self.coords(tree)?;
        let posting = Posting {
            doc: coord.t,
            track: if self.tracked { tree.track_id } else { None },
        };
        for table in &mut self.tables {
            let key = table.key(&coords, coord.u, coord.v)?;
            table.buckets.entry(key).or_default().insert(posting);
        }
        Ok(())
    }

    /// The `n` bucket keys a lookup touches, one per table.
    pub fn probe_keys(&self, tree: &FeatureTree, u: u32, v: u32) -> Result<Vec<u64>> {
        let coords = self.coords(tree)?;
        self.tables.iter().map(|t| t.key(&coords, u, v)).collect()
    }

    /// Union over all tables of the bucket contents at `(h_i(tree), u, v)`.
    pub fn lookup(&self, tree: &FeatureTree, u: u32, v: u32) -> Result<BTreeSet<Posting>> {
        let keys = self.probe_keys(tree, u, v)?;
        let mut out = BTreeSet::new();
        for (table, key) in self.tables.iter().zip(keys) {
            if let Some(bucket) = table.buckets.get(&key) {
                out.extend(bucket.iter().copied());
            }
        }
        Ok(out)
    }

    pub fn entry_count(&self) -> usize {
        self.tables
            .iter()
            .flat_map(|t| t.buckets.values())
            .map(BTreeSet::len)
            .sum()
    }

    pub fn bucket_count(&self) -> usize {
        self.tables.iter().map(|t| t.buckets.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::FeatureVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn activity_tree(value: f64, u: u32, v: u32, t: u32) -> FeatureTree {
        FeatureTree::leaf(FeatureVector::Activity(value), AtomCoord::new(u, v, t))
    }

    fn index() -> LshIndex {
        LshIndex::new(FeatureKind::Activity, 1, 0.25, 8, 42, false).unwrap()
    }

    #[test]
    fn key_mix_round_trips() {
        for &(hash, u, v) in &[(0, 0, 0), (-5, 3, 9), (123_456, 65_535, 1), (-1, 0, 65_535)] {
            let k = BucketKey { hash, u, v };
            assert_eq!(BucketKey::unmix(k.mix()), k);
        }
    }

    #[test]
    fn self_retrieval_and_shared_buckets() {
        let mut idx = index();
        let t = activity_tree(0.4, 2, 3, 7);
        idx.insert(&t, t.anchor).unwrap();
        assert!(idx.lookup(&t, 2, 3).unwrap().contains(&Posting::doc(7)));

        let t2 = activity_tree(0.4, 2, 3, 9);
        idx.insert(&t2, t2.anchor).unwrap();
        let got = idx.lookup(&t, 2, 3).unwrap();
        assert_eq!(got, [Posting::doc(7), Posting::doc(9)].into_iter().collect());
    }

    #[test]
    fn empty_index_and_other_positions_return_nothing() {
        let mut idx = index();
        let t = activity_tree(0.4, 2, 3, 7);
        assert!(idx.lookup(&t, 2, 3).unwrap().is_empty());
        idx.insert(&t, t.anchor).unwrap();
        assert!(idx.lookup(&t, 3, 2).unwrap().is_empty());
    }

    #[test]
    fn insertion_is_idempotent() {
        let mut idx = index();
        let t = activity_tree(0.4, 0, 0, 1);
        idx.insert(&t, t.anchor).unwrap();
        let once = idx.entry_count();
        idx.insert(&t, t.anchor).unwrap();
        assert_eq!(idx.entry_count(), once);
        assert_eq!(once, 8);
    }

    #[test]
    fn random_insertions_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut idx = LshIndex::new(FeatureKind::Motion, 5, 0.5, 8, 11, false).unwrap();
        let mut inserted = Vec::new();
        for i in 0..1000u32 {
            let nodes: Vec<FeatureVector> = (0..5)
                .map(|_| {
                    let mut h = [0u32; 9];
                    for b in h.iter_mut() {
                        *b = rng.gen_range(0..20);
                    }
                    FeatureVector::Motion(h)
                })
                .collect();
            let coord = AtomCoord::new(rng.gen_range(0..6), rng.gen_range(0..6), i / 10);
            let tree = FeatureTree {
                kind: FeatureKind::Motion,
                depth: 2,
                nodes,
                anchor: coord,
                track_id: None,
            };
            idx.insert(&tree, coord).unwrap();
            inserted.push(tree);
        }
        assert!(idx.entry_count() <= 8 * 1000);
        for tree in &inserted {
            let c = tree.anchor;
            assert!(idx.lookup(tree, c.u, c.v).unwrap().contains(&Posting::doc(c.t)));
        }
    }

    #[test]
    fn lookup_probes_one_bucket_per_table() {
        let idx = index();
        let t = activity_tree(0.3, 1, 1, 0);
        assert_eq!(idx.probe_keys(&t, 1, 1).unwrap().len(), 8);
    }

    #[test]
    fn wrong_feature_rejected() {
        let mut idx = index();
        let t = FeatureTree::leaf(FeatureVector::Persistence(3), AtomCoord::new(0, 0, 0));
        assert!(idx.insert(&t, t.anchor).is_err());
        assert!(LshIndex::new(FeatureKind::Activity, 1, 0.0, 8, 1, false).is_err());
        assert!(LshIndex::new(FeatureKind::Activity, 1, 0.2, 0, 1, false).is_err());
    }

    #[test]
    fn tracked_postings_carry_track_ids() {
        let mut idx = LshIndex::new(FeatureKind::Displacement, 1, 3.0, 4, 5, true).unwrap();
        let t = FeatureTree::leaf(
            FeatureVector::Displacement { dx: 4.0, dy: 0.0 },
            AtomCoord::new(1, 2, 3),
        )
        .with_track(17);
        idx.insert(&t, t.anchor).unwrap();
        assert_eq!(
            idx.lookup(&t, 1, 2).unwrap(),
            [Posting::tracked(3, 17)].into_iter().collect()
        );
    }
}
