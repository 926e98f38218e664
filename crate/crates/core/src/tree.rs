//! Partially overlapping pyramidal feature trees.
//!
//! A depth-`k` tree anchored at atom `(u, v)` covers the `k×k` atom block
//! starting there. Level `l` (1-based) holds `l×l` nodes; node `(i, j)` of
//! level `l` has the children `(i, j)`, `(i+1, j)`, `(i, j+1)`, `(i+1, j+1)`
//! of level `l+1`. Nodes are stored root first, level by level, row-major
//! within a level, so the leaves come last.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{aggregate, FeatureKind, FeatureVector};
use crate::geometry::{node_count, AtomCoord, GridGeometry};

/// Row-major `cols×rows` grid of one feature over the atoms of a document.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomGrid {
    pub kind: FeatureKind,
    pub cols: u32,
    pub rows: u32,
    pub values: Vec<FeatureVector>,
}

impl AtomGrid {
    pub fn filled(kind: FeatureKind, cols: u32, rows: u32) -> Self {
        AtomGrid {
            kind,
            cols,
            rows,
            values: vec![kind.empty(); cols as usize * rows as usize],
        }
    }

    pub fn for_geometry(kind: FeatureKind, geometry: &GridGeometry) -> Self {
        Self::filled(kind, geometry.atoms_per_row(), geometry.atoms_per_col())
    }

    pub fn get(&self, u: u32, v: u32) -> &FeatureVector {
        &self.values[v as usize * self.cols as usize + u as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, value: FeatureVector) {
        let i = v as usize * self.cols as usize + u as usize;
        self.values[i] = value;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTree {
    pub kind: FeatureKind,
    pub depth: u32,
    pub nodes: Vec<FeatureVector>,
    /// Top-left leaf.
    pub anchor: AtomCoord,
    /// Set for airborne displacement trees.
    pub track_id: Option<u32>,
}

pub(crate) fn level_offset(level: u32) -> usize {
    node_count(level - 1)
}

pub(crate) fn node_index(level: u32, i: u32, j: u32) -> usize {
    level_offset(level) + (j * level + i) as usize
}

impl FeatureTree {
    /// Builds the tree anchored at `anchor` whose leaves are read from `leaf(i, j)`.
    pub fn from_leaves(
        kind: FeatureKind,
        depth: u32,
        anchor: AtomCoord,
        mut leaf: impl FnMut(u32, u32) -> FeatureVector,
    ) -> Result<FeatureTree> {
        let mut nodes = vec![kind.empty(); node_count(depth)];
        for j in 0..depth {
            for i in 0..depth {
                let value = leaf(i, j);
                if value.kind() != kind {
                    return Err(Error::MixedFeatures {
                        expected: kind,
                        actual: value.kind(),
                    });
                }
                nodes[node_index(depth, i, j)] = value;
            }
        }
        for level in (1..depth).rev() {
            for j in 0..level {
                for i in 0..level {
                    let c = children_indices(level, i, j);
                    let children = c.map(|n| nodes[n].clone());
                    nodes[node_index(level, i, j)] = aggregate(kind, &children)?;
                }
            }
        }
        Ok(FeatureTree {
            kind,
            depth,
            nodes,
            anchor,
            track_id: None,
        })
    }

    /// A single-node tree.
    pub fn leaf(value: FeatureVector, anchor: AtomCoord) -> FeatureTree {
        FeatureTree {
            kind: value.kind(),
            depth: 1,
            nodes: vec![value],
            anchor,
            track_id: None,
        }
    }

    pub fn with_track(mut self, track_id: u32) -> Self {
        self.track_id = Some(track_id);
        self
    }

    pub fn root(&self) -> &FeatureVector {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> &[FeatureVector] {
        &self.nodes[level_offset(self.depth)..]
    }

    /// Flattened hashing coordinates, histograms L1-normalized per node.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nodes.len() * self.kind.dims());
        for n in &self.nodes {
            n.push_hash_coords(&mut out);
        }
        out
    }

    /// Indices of the four children of node `index`, `None` for leaves.
    pub fn children_of(&self, index: usize) -> Option<[usize; 4]> {
        let mut level = 1;
        while level_offset(level + 1) <= index {
            level += 1;
        }
        if level >= self.depth {
            return None;
        }
        let within = (index - level_offset(level)) as u32;
        Some(children_indices(level, within % level, within / level))
    }
}

fn children_indices(level: u32, i: u32, j: u32) -> [usize; 4] {
    let next = level + 1;
    [
        node_index(next, i, j),
        node_index(next, i + 1, j),
        node_index(next, i, j + 1),
        node_index(next, i + 1, j + 1),
    ]
}

/// Builds the `(U-k+1)(V-k+1)` overlapping trees of one document.
pub fn build_trees(
    grid: &AtomGrid,
    geometry: &GridGeometry,
    document: u32,
) -> Result<Vec<FeatureTree>> {
    if grid.cols != geometry.atoms_per_row() || grid.rows != geometry.atoms_per_col() {
        return Err(Error::dimension(
            format!("{}x{}", geometry.atoms_per_row(), geometry.atoms_per_col()),
            format!("{}x{}", grid.cols, grid.rows),
        ));
    }
    if grid.values.len() != grid.cols as usize * grid.rows as usize {
        return Err(Error::dimension(
            grid.cols as usize * grid.rows as usize,
            grid.values.len(),
        ));
    }
    let k = geometry.tree_depth;
    geometry
        .anchors()
        .map(|(u, v)| {
            FeatureTree::from_leaves(grid.kind, k, AtomCoord::new(u, v, document), |i, j| {
                grid.get(u + i, v + j).clone()
            })
        })
        .collect()
}
