//! Spatio-temporal tiling of a `W×H×F` video into documents, atoms and trees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tiling of a video: `B×B` tiles, `A` frames per document, depth-`k` trees.
///
/// Trailing partial tiles (`W mod B`, `H mod B`) are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridGeometry {
    pub frame_width: u32,
    pub frame_height: u32,
    pub tile_size: u32,
    pub frames_per_document: u32,
    pub tree_depth: u32,
}

/// Position of an atom: tile column `u`, tile row `v`, document `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomCoord {
    pub u: u32,
    pub v: u32,
    pub t: u32,
}

impl AtomCoord {
    pub fn new(u: u32, v: u32, t: u32) -> Self {
        AtomCoord { u, v, t }
    }
}

/// Builds a geometry, rejecting tilings in which no full tree fits.
pub fn plan_grid(
    frame_width: u32,
    frame_height: u32,
    tile_size: u32,
    frames_per_document: u32,
    tree_depth: u32,
) -> Result<GridGeometry> {
    let g = GridGeometry {
        frame_width,
        frame_height,
        tile_size,
        frames_per_document,
        tree_depth,
    };
    g.validate()?;
    Ok(g)
}

impl GridGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.tile_size == 0 || self.frames_per_document == 0 || self.tree_depth == 0 {
            return Err(Error::Geometry(
                "tile size, frames per document and tree depth must be >= 1".into(),
            ));
        }
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err(Error::Geometry("frame dimensions must be >= 1".into()));
        }
        let span = self.tile_size as u64 * self.tree_depth as u64;
        if (self.frame_width as u64) < span || (self.frame_height as u64) < span {
            return Err(Error::Geometry(format!(
                "a {}x{} frame cannot hold a depth-{} tree of {}px tiles",
                self.frame_width, self.frame_height, self.tree_depth, self.tile_size
            )));
        }
        Ok(())
    }

    /// `U = floor(W / B)`.
    pub fn atoms_per_row(&self) -> u32 {
        self.frame_width / self.tile_size
    }

    /// `V = floor(H / B)`.
    pub fn atoms_per_col(&self) -> u32 {
        self.frame_height / self.tile_size
    }

    pub fn atom_count(&self) -> usize {
        self.atoms_per_row() as usize * self.atoms_per_col() as usize
    }

    /// Anchors per row, `U - k + 1`.
    pub fn anchors_per_row(&self) -> u32 {
        self.atoms_per_row() + 1 - self.tree_depth
    }

    /// Anchors per column, `V - k + 1`.
    pub fn anchors_per_col(&self) -> u32 {
        self.atoms_per_col() + 1 - self.tree_depth
    }

    pub fn trees_per_document(&self) -> usize {
        self.anchors_per_row() as usize * self.anchors_per_col() as usize
    }

    /// `M = Σ_{l=1..k} l²`.
    pub fn nodes_per_tree(&self) -> usize {
        node_count(self.tree_depth)
    }

    pub fn document_of_frame(&self, frame: u64) -> u32 {
        (frame / self.frames_per_document as u64) as u32
    }

    /// Number of complete documents in a video of `frames` frames.
    pub fn documents_in(&self, frames: u64) -> u32 {
        (frames / self.frames_per_document as u64) as u32
    }

    /// The atom containing pixel `(x, y)`, or `None` inside a dropped partial tile.
    pub fn atom_of_pixel(&self, x: f64, y: f64) -> Option<(u32, u32)> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let u = (x / self.tile_size as f64).floor() as u64;
        let v = (y / self.tile_size as f64).floor() as u64;
        if u < self.atoms_per_row() as u64 && v < self.atoms_per_col() as u64 {
            Some((u as u32, v as u32))
        } else {
            None
        }
    }

    /// All tree anchors `(u, v)` in row-major order.
    pub fn anchors(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let cols = self.anchors_per_row();
        (0..self.anchors_per_col()).flat_map(move |v| (0..cols).map(move |u| (u, v)))
    }

    pub fn first_frame_of(&self, document: u32) -> u64 {
        document as u64 * self.frames_per_document as u64
    }

    pub fn last_frame_of(&self, document: u32) -> u64 {
        self.first_frame_of(document + 1) - 1
    }
}

pub fn node_count(depth: u32) -> usize {
    (1..=depth as usize).map(|l| l * l).sum()
}
