//! Per-atom feature values and the per-feature aggregation operators.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COLOR_BINS: usize = 16;
pub const HUE_BINS: usize = 8;
pub const SATURATION_BINS: usize = 4;
pub const LIGHTNESS_BINS: usize = 4;
pub const MOTION_BINS: usize = 9;
/// Index of the "idle" bin in a motion histogram.
pub const IDLE_BIN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Activity,
    BlobSize,
    Color,
    Persistence,
    Motion,
    Displacement,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::Activity,
        FeatureKind::BlobSize,
        FeatureKind::Color,
        FeatureKind::Persistence,
        FeatureKind::Motion,
        FeatureKind::Displacement,
    ];

    pub const CCTV: [FeatureKind; 5] = [
        FeatureKind::Activity,
        FeatureKind::BlobSize,
        FeatureKind::Color,
        FeatureKind::Persistence,
        FeatureKind::Motion,
    ];

    /// Number of coordinates one node contributes to a flattened tree.
    pub fn dims(self) -> usize {
        match self {
            FeatureKind::Activity | FeatureKind::BlobSize | FeatureKind::Persistence => 1,
            FeatureKind::Color => COLOR_BINS,
            FeatureKind::Motion => MOTION_BINS,
            FeatureKind::Displacement => 2,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            FeatureKind::Activity => 0,
            FeatureKind::BlobSize => 1,
            FeatureKind::Color => 2,
            FeatureKind::Persistence => 3,
            FeatureKind::Motion => 4,
            FeatureKind::Displacement => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<FeatureKind> {
        FeatureKind::ALL.iter().copied().find(|k| k.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Activity => "activity",
            FeatureKind::BlobSize => "blob_size",
            FeatureKind::Color => "color",
            FeatureKind::Persistence => "persistence",
            FeatureKind::Motion => "motion",
            FeatureKind::Displacement => "displacement",
        }
    }

    /// The value an atom with no content carries.
    pub fn empty(self) -> FeatureVector {
        match self {
            FeatureKind::Activity => FeatureVector::Activity(0.0),
            FeatureKind::BlobSize => FeatureVector::BlobSize(0.0),
            FeatureKind::Color => FeatureVector::Color([0; COLOR_BINS]),
            FeatureKind::Persistence => FeatureVector::Persistence(0),
            FeatureKind::Motion => FeatureVector::Motion([0; MOTION_BINS]),
            FeatureKind::Displacement => FeatureVector::Displacement { dx: 0.0, dy: 0.0 },
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown feature `{s}`")))
    }
}

/// One feature value for one node.
///
/// Histograms are kept as raw counts; they are only L1-normalized when a
/// tree is flattened for hashing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureVector {
    /// Proportion of active pixel-samples, in `[0, 1]`.
    Activity(f64),
    /// Pixel count of the largest overlapping blob.
    BlobSize(f64),
    /// 8 hue + 4 saturation + 4 lightness counts.
    Color([u32; COLOR_BINS]),
    /// Accumulated consecutive active frames.
    Persistence(u32),
    /// 8 directions (E, NE, N, NW, W, SW, S, SE) + idle.
    Motion([u32; MOTION_BINS]),
    /// Mean current-to-next frame displacement in pixels/frame.
    Displacement { dx: f64, dy: f64 },
}

impl FeatureVector {
    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureVector::Activity(_) => FeatureKind::Activity,
            FeatureVector::BlobSize(_) => FeatureKind::BlobSize,
            FeatureVector::Color(_) => FeatureKind::Color,
            FeatureVector::Persistence(_) => FeatureKind::Persistence,
            FeatureVector::Motion(_) => FeatureKind::Motion,
            FeatureVector::Displacement { .. } => FeatureKind::Displacement,
        }
    }

    /// Appends this node's hashing coordinates to `out`.
    pub fn push_hash_coords(&self, out: &mut Vec<f64>) {
        match self {
            FeatureVector::Activity(x) | FeatureVector::BlobSize(x) => out.push(*x),
            FeatureVector::Persistence(x) => out.push(*x as f64),
            FeatureVector::Color(h) => push_normalized(h, out),
            FeatureVector::Motion(h) => push_normalized(h, out),
            FeatureVector::Displacement { dx, dy } => {
                out.push(*dx);
                out.push(*dy);
            }
        }
    }

    pub fn activity(&self) -> Option<f64> {
        match self {
            FeatureVector::Activity(x) => Some(*x),
            _ => None,
        }
    }
}

fn push_normalized(hist: &[u32], out: &mut Vec<f64>) {
    let total: u64 = hist.iter().map(|&c| c as u64).sum();
    if total == 0 {
        out.extend(std::iter::repeat_n(0.0, hist.len()));
    } else {
        out.extend(hist.iter().map(|&c| c as f64 / total as f64));
    }
}

/// Combines four children into their parent's value.
///
/// Activity is averaged, blob size takes the median of the non-zero children
/// (zero when all are zero), histograms are summed bin-wise and persistence
/// takes the maximum.
pub fn aggregate(kind: FeatureKind, children: &[FeatureVector; 4]) -> Result<FeatureVector> {
    if let Some(bad) = children.iter().find(|c| c.kind() != kind) {
        return Err(Error::MixedFeatures {
            expected: kind,
            actual: bad.kind(),
        });
    }
    Ok(match kind {
        FeatureKind::Activity => {
            let sum: f64 = children.iter().filter_map(FeatureVector::activity).sum();
            FeatureVector::Activity(sum / 4.0)
        }
        FeatureKind::BlobSize => {
            let sizes: Vec<f64> = children
                .iter()
                .filter_map(|c| match c {
                    FeatureVector::BlobSize(s) => Some(*s),
                    _ => None,
                })
                .collect();
            FeatureVector::BlobSize(median_of_nonzero(&sizes))
        }
        FeatureKind::Color => {
            let mut sum = [0u32; COLOR_BINS];
            for c in children {
                if let FeatureVector::Color(h) = c {
                    for (s, x) in sum.iter_mut().zip(h) {
                        *s += x;
                    }
                }
            }
            FeatureVector::Color(sum)
        }
        FeatureKind::Persistence => FeatureVector::Persistence(
            children
                .iter()
                .map(|c| match c {
                    FeatureVector::Persistence(p) => *p,
                    _ => 0,
                })
                .max()
                .unwrap_or(0),
        ),
        FeatureKind::Motion => {
            let mut sum = [0u32; MOTION_BINS];
            for c in children {
                if let FeatureVector::Motion(h) = c {
                    for (s, x) in sum.iter_mut().zip(h) {
                        *s += x;
                    }
                }
            }
            FeatureVector::Motion(sum)
        }
        FeatureKind::Displacement => {
            let (mut dx, mut dy) = (0.0, 0.0);
            for c in children {
                if let FeatureVector::Displacement { dx: x, dy: y } = c {
                    dx += x;
                    dy += y;
                }
            }
            FeatureVector::Displacement {
                dx: dx / 4.0,
                dy: dy / 4.0,
            }
        }
    })
}

fn median_of_nonzero(values: &[f64]) -> f64 {
    let mut nz: Vec<f64> = values.iter().copied().filter(|&v| v != 0.0).collect();
    if nz.is_empty() {
        return 0.0;
    }
    nz.sort_by(f64::total_cmp);
    let mid = nz.len() / 2;
    if nz.len() % 2 == 1 {
        nz[mid]
    } else {
        (nz[mid - 1] + nz[mid]) / 2.0
    }
}
