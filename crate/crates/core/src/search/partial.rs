//! Index hits per action component.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::query::CompiledComponent;
use crate::error::{Error, Result};
use crate::lsh::{IndexSet, Posting};

/// A matching tree position: document, anchor and (airborne) track id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub t: u32,
    pub u: u32,
    pub v: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<u32>,
}

/// `M(q)`: the matching locations of every component, grouped by document.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PartialMatchSet {
    pub documents: u32,
    /// `by_component[α][τ]` holds the locations of component `α` in document `τ`.
    pub by_component: Vec<BTreeMap<u32, Vec<Location>>>,
}

impl PartialMatchSet {
    pub fn new(documents: u32, components: usize) -> Self {
        PartialMatchSet {
            documents,
            by_component: vec![BTreeMap::new(); components],
        }
    }

    /// A set whose only content is the indicator matrix `m[τ][α]`; every hit
    /// is a single location at the origin.
    pub fn from_indicator(m: &[Vec<bool>]) -> Self {
        let comps = m.first().map_or(0, Vec::len);
        let mut set = PartialMatchSet::new(m.len() as u32, comps);
        for (t, row) in m.iter().enumerate() {
            for (a, &hit) in row.iter().enumerate() {
                if hit {
                    set.add(a, Location { t: t as u32, u: 0, v: 0, track: None });
                }
            }
        }
        set
    }

    pub fn add(&mut self, component: usize, loc: Location) {
        let list = self.by_component[component].entry(loc.t).or_default();
        if let Err(pos) = list.binary_search(&loc) {
            list.insert(pos, loc);
        }
        self.documents = self.documents.max(loc.t + 1);
    }

    pub fn components(&self) -> usize {
        self.by_component.len()
    }

    pub fn locations(&self, document: u32, component: usize) -> &[Location] {
        self.by_component[component]
            .get(&document)
            .map_or(&[], Vec::as_slice)
    }

    /// `m_{τ,α}`.
    pub fn hit(&self, document: u32, component: usize) -> bool {
        !self.locations(document, component).is_empty()
    }

    /// `φ_{τ,α}`: the track id with the most locations, ties to the smallest id.
    pub fn dominant_track(&self, document: u32, component: usize) -> Option<u32> {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for l in self.locations(document, component) {
            if let Some(t) = l.track {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut best: Option<(u32, usize)> = None;
        for (id, n) in counts {
            if best.is_none_or(|(_, bn)| n > bn) {
                best = Some((id, n));
            }
        }
        best.map(|(id, _)| id)
    }

    pub fn is_empty(&self) -> bool {
        self.by_component.iter().all(BTreeMap::is_empty)
    }

    pub fn total_locations(&self) -> usize {
        self.by_component
            .iter()
            .flat_map(|m| m.values())
            .map(Vec::len)
            .sum()
    }

    /// Documents with at least one hit for any component.
    pub fn documents_with_hits(&self) -> BTreeSet<u32> {
        self.by_component
            .iter()
            .flat_map(|m| m.keys().copied())
            .collect()
    }
}

/// Lookup statistics of one partial-match pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProbeStats {
    /// Individual tree lookups.
    pub lookups: usize,
    /// Buckets touched across all tables.
    pub buckets: usize,
}

/// Looks every query tree up in its feature index. A location matches a
/// component when it is returned for every constrained feature at that anchor.
pub fn partial_matches(
    components: &[CompiledComponent],
    index: &IndexSet,
) -> Result<(PartialMatchSet, ProbeStats)> {
    let mut set = PartialMatchSet::new(index.documents, components.len());
    let mut stats = ProbeStats::default();
    for (a, comp) in components.iter().enumerate() {
        for (anchor, trees) in comp.anchors.iter().zip(&comp.trees) {
            let mut common: Option<BTreeSet<Posting>> = None;
            for tree in trees {
                let idx = index.index(tree.kind).ok_or_else(|| {
                    Error::IndexMismatch(format!("archive has no {} index", tree.kind))
                })?;
                let hits = idx.lookup(tree, anchor.0, anchor.1)?;
                stats.lookups += 1;
                stats.buckets += idx.tables.len();
                // Tracked and untracked postings only meet on the document id.
                let hits: BTreeSet<Posting> = if idx.tracked {
                    hits
                } else {
                    hits.into_iter().map(|p| Posting::doc(p.doc)).collect()
                };
                common = Some(match common {
                    None => hits,
                    Some(c) => c.intersection(&hits).copied().collect(),
                });
            }
            for p in common.unwrap_or_default() {
                set.add(
                    a,
                    Location {
                        t: p.doc,
                        u: anchor.0,
                        v: anchor.1,
                        track: p.track,
                    },
                );
            }
        }
    }
    set.documents = set.documents.max(index.documents);
    Ok((set, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_round_trip() {
        let m = vec![vec![true, false], vec![false, false], vec![true, true]];
        let s = PartialMatchSet::from_indicator(&m);
        assert_eq!(s.documents, 3);
        for (t, row) in m.iter().enumerate() {
            for (a, &hit) in row.iter().enumerate() {
                assert_eq!(s.hit(t as u32, a), hit);
            }
        }
        assert_eq!(s.documents_with_hits(), [0, 2].into_iter().collect());
    }

    #[test]
    fn dominant_track_prefers_count_then_smaller_id() {
        let mut s = PartialMatchSet::new(1, 1);
        for (u, track) in [(0, 7), (1, 7), (2, 3), (3, 3), (4, 9)] {
            s.add(0, Location { t: 0, u, v: 0, track: Some(track) });
        }
        assert_eq!(s.dominant_track(0, 0), Some(3));
        s.add(0, Location { t: 0, u: 5, v: 0, track: Some(9) });
        s.add(0, Location { t: 0, u: 6, v: 0, track: Some(9) });
        assert_eq!(s.dominant_track(0, 0), Some(9));
        assert_eq!(s.dominant_track(1, 0), None);
    }
}
