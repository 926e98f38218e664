//! Tracklets, the pairwise matching cost and displacement features.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::detect::DetectionCandidate;
use super::gmm::{ColorModel, GmmParams};
use crate::error::{Error, Result};
use crate::feature::FeatureVector;
use crate::geometry::{AtomCoord, GridGeometry};
use crate::tree::FeatureTree;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackPoint {
    pub frame: u64,
    pub x: f64,
    pub y: f64,
}

/// A short track. Only the last `history` candidates are kept in full;
/// older points keep their position.
#[derive(Clone, Debug)]
pub struct Tracklet {
    pub id: u32,
    pub points: Vec<TrackPoint>,
    recent: VecDeque<DetectionCandidate>,
    history: usize,
    color_model: Option<ColorModel>,
}

impl Tracklet {
    pub fn new(
        id: u32,
        frame: u64,
        candidate: DetectionCandidate,
        history: usize,
        gmm: &GmmParams,
    ) -> Tracklet {
        let mut t = Tracklet {
            id,
            points: Vec::new(),
            recent: VecDeque::new(),
            history: history.max(1),
            color_model: None,
        };
        t.push(frame, candidate, gmm);
        t
    }

    /// Track built from bare positions, without shapes or colors.
    pub fn from_points(id: u32, points: Vec<TrackPoint>) -> Tracklet {
        Tracklet {
            id,
            points,
            recent: VecDeque::new(),
            history: 1,
            color_model: None,
        }
    }

    pub fn push(&mut self, frame: u64, candidate: DetectionCandidate, gmm: &GmmParams) {
        if let Some(last) = self.points.last() {
            assert!(frame > last.frame, "track frames must increase");
        }
        self.points.push(TrackPoint {
            frame,
            x: candidate.x,
            y: candidate.y,
        });
        self.recent.push_back(candidate);
        while self.recent.len() > self.history {
            self.recent.pop_front();
        }
        let samples: Vec<[u8; 3]> = self
            .recent
            .iter()
            .flat_map(|c| c.colors.iter().copied())
            .collect();
        self.color_model = ColorModel::fit(&samples, gmm);
    }

    pub fn last(&self) -> &DetectionCandidate {
        self.recent.back().expect("tracklet without candidates")
    }

    pub fn last_frame(&self) -> u64 {
        self.points.last().map_or(0, |p| p.frame)
    }

    pub fn color_model(&self) -> Option<&ColorModel> {
        self.color_model.as_ref()
    }

    /// Constant-acceleration extrapolation through the last three points to
    /// `frame`; the last position when fewer points exist.
    pub fn predict(&self, frame: u64) -> (f64, f64) {
        let n = self.points.len();
        let last = self.points[n - 1];
        if n < 3 {
            return (last.x, last.y);
        }
        let p = &self.points[n - 3..];
        let t = frame as f64;
        let ts: Vec<f64> = p.iter().map(|q| q.frame as f64).collect();
        let (mut x, mut y) = (0.0, 0.0);
        for i in 0..3 {
            let mut basis = 1.0;
            for j in 0..3 {
                if i != j {
                    basis *= (t - ts[j]) / (ts[i] - ts[j]);
                }
            }
            x += basis * p[i].x;
            y += basis * p[i].y;
        }
        (x, y)
    }

    /// Per-frame displacement at point `i`: forward difference, backward at
    /// the end, zero for a single point.
    pub fn displacement(&self, i: usize) -> (f64, f64) {
        let p = &self.points;
        let (a, b) = if i + 1 < p.len() {
            (p[i], p[i + 1])
        } else if i > 0 {
            (p[i - 1], p[i])
        } else {
            return (0.0, 0.0);
        };
        let dt = (b.frame - a.frame) as f64;
        ((b.x - a.x) / dt, (b.y - a.y) / dt)
    }
}

/// The five terms of the matching cost before weighting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostTerms {
    pub distance: f64,
    pub size: f64,
    pub shape: f64,
    pub color: f64,
    pub prediction: f64,
}

impl CostTerms {
    pub fn weighted(&self, w: &[f64; 5]) -> f64 {
        w[0] * self.distance
            + w[1] * self.size
            + w[2] * self.shape
            + w[3] * self.color
            + w[4] * self.prediction
    }
}

/// Cost terms for continuing `track` with candidate `m` seen at `frame`.
pub fn match_terms(track: &Tracklet, m: &DetectionCandidate, frame: u64) -> CostTerms {
    let l = track.last();
    let (px, py) = track.predict(frame);
    CostTerms {
        distance: ((l.x - m.x).powi(2) + (l.y - m.y).powi(2)).sqrt(),
        size: (l.size as f64 - m.size as f64).abs(),
        shape: shape_error(l, m),
        color: track
            .color_model()
            .map_or(0.0, |g| g.mean_negative_log_likelihood(&m.colors)),
        prediction: ((px - m.x).powi(2) + (py - m.y).powi(2)).sqrt(),
    }
}

pub fn match_cost(track: &Tracklet, m: &DetectionCandidate, frame: u64, weights: &[f64; 5]) -> f64 {
    match_terms(track, m, frame).weighted(weights)
}

/// Mean absolute difference of the two binary shapes after shifting `m` so
/// that the rounded centroids coincide, over the union of both boxes.
pub fn shape_error(l: &DetectionCandidate, m: &DetectionCandidate) -> f64 {
    let sx = (l.x - m.x).round() as i64;
    let sy = (l.y - m.y).round() as i64;
    let x0 = (l.min_x as i64).min(m.min_x as i64 + sx);
    let y0 = (l.min_y as i64).min(m.min_y as i64 + sy);
    let x1 = (l.min_x as i64 + l.width as i64).max(m.min_x as i64 + sx + m.width as i64);
    let y1 = (l.min_y as i64 + l.height as i64).max(m.min_y as i64 + sy + m.height as i64);
    let mut differ = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            if l.covers(x, y) != m.covers(x - sx, y - sy) {
                differ += 1;
            }
        }
    }
    differ as f64 / ((x1 - x0) * (y1 - y0)) as f64
}

/// One record of a tracklet dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackPointRecord {
    pub track_id: u32,
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
}

pub fn track_records(tracklets: &[Tracklet]) -> Vec<TrackPointRecord> {
    let mut out = Vec::new();
    for t in tracklets {
        for (i, p) in t.points.iter().enumerate() {
            let (dx, dy) = t.displacement(i);
            out.push(TrackPointRecord {
                track_id: t.id,
                frame: p.frame,
                x: p.x,
                y: p.y,
                dx,
                dy,
            });
        }
    }
    out.sort_by(|a, b| a.frame.cmp(&b.frame).then(a.track_id.cmp(&b.track_id)));
    out
}

/// Single-node displacement trees for document `document`: one per
/// `(track, atom)`, holding the mean per-frame displacement of the track's
/// points that fall in that atom during the document.
pub fn tracklet_features(
    tracklets: &[Tracklet],
    geometry: &GridGeometry,
    document: u32,
) -> Result<Vec<FeatureTree>> {
    if geometry.tree_depth != 1 {
        return Err(Error::Geometry(
            "displacement features need depth-1 trees".into(),
        ));
    }
    let first = geometry.first_frame_of(document);
    let last = geometry.last_frame_of(document);
    let mut sums: BTreeMap<(u32, u32, u32), (f64, f64, u32)> = BTreeMap::new();
    for t in tracklets {
        for (i, p) in t.points.iter().enumerate() {
            if p.frame < first || p.frame > last {
                continue;
            }
            let Some((u, v)) = geometry.atom_of_pixel(p.x, p.y) else {
                continue;
            };
            let (dx, dy) = t.displacement(i);
            let e = sums.entry((t.id, u, v)).or_insert((0.0, 0.0, 0));
            e.0 += dx;
            e.1 += dy;
            e.2 += 1;
        }
    }
    Ok(sums
        .into_iter()
        .map(|((id, u, v), (sx, sy, n))| {
            let value = FeatureVector::Displacement {
                dx: sx / n as f64,
                dy: sy / n as f64,
            };
            FeatureTree::leaf(value, AtomCoord::new(u, v, document)).with_track(id)
        })
        .collect())
}
