//! Query documents and their translation into feature trees.
//!
//! A query is a JSON document:
//!
//! ```json
//! {
//!   "version": 1,
//!   "components": [
//!     { "roi": { "x": 0, "y": 96, "w": 96, "h": 16 },
//!       "constraints": { "motion": { "directions": ["east"] } } }
//!   ],
//!   "weights": { "insertion": -1, "deletion": -2, "continuation": 1, "match": 3 },
//!   "threshold": 6.0
//! }
//! ```

use serde::{Deserialize, Serialize};

use super::DpWeights;
use crate::cctv::color_bins;
use crate::config::FeatureSet;
use crate::error::{Error, Result};
use crate::feature::{FeatureKind, FeatureVector, COLOR_BINS, IDLE_BIN, MOTION_BINS};
use crate::geometry::{AtomCoord, GridGeometry};
use crate::tree::{build_trees, AtomGrid, FeatureTree};

pub const QUERY_VERSION: u32 = 1;

/// Default share of an atom's flow samples that move, for motion constraints.
pub const DEFAULT_MOTION_COVERAGE: f64 = 0.5;

fn query_version() -> u32 {
    QUERY_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    #[serde(default = "query_version")]
    pub version: u32,
    pub components: Vec<ActionComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<DpWeights>,
    /// DP retrieval score threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Minimum log-value of a greedy segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
    /// When present, must equal the archive's geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GridGeometry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roi {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Roi {
    fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64
            && py >= self.y as f64
            && px < (self.x + self.w) as f64
            && py < (self.y + self.h) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionComponent {
    pub roi: Roi,
    pub constraints: Constraints,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<ActivityConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<SizeConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<ColorConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persistence: Option<PersistenceConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement: Option<DisplacementConstraint>,
}

impl Constraints {
    pub fn kinds(&self) -> Vec<FeatureKind> {
        let mut out = Vec::new();
        if self.activity.is_some() {
            out.push(FeatureKind::Activity);
        }
        if self.size.is_some() {
            out.push(FeatureKind::BlobSize);
        }
        if self.color.is_some() {
            out.push(FeatureKind::Color);
        }
        if self.persistence.is_some() {
            out.push(FeatureKind::Persistence);
        }
        if self.motion.is_some() {
            out.push(FeatureKind::Motion);
        }
        if self.displacement.is_some() {
            out.push(FeatureKind::Displacement);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityConstraint {
    /// Fraction of active pixel samples, `[0, 1]`.
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeConstraint {
    pub pixels: f64,
}

/// Either a single RGB color or a full 16-bin histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorConstraint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rgb: Option<[u8; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersistenceConstraint {
    pub min_frames: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    East,
    Northeast,
    North,
    Northwest,
    West,
    Southwest,
    South,
    Southeast,
}

impl Direction {
    pub fn bin(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConstraint {
    pub directions: Vec<Direction>,
    /// Share of the ROI's flow samples expected to move, `(0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplacementConstraint {
    /// Pixels per frame.
    pub dx: f64,
    pub dy: f64,
}

impl Query {
    /// Parses and validates a query; errors carry the offending field path.
    pub fn from_json(text: &str) -> Result<Query> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let query: Query = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::query(
                if path == "." { "$".into() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        query.validate()?;
        Ok(query)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("query serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != QUERY_VERSION {
            return Err(Error::query(
                "version",
                format!("unsupported version {}, expected {QUERY_VERSION}", self.version),
            ));
        }
        if self.components.is_empty() {
            return Err(Error::query("components", "at least one component is required"));
        }
        for (i, c) in self.components.iter().enumerate() {
            let at = |f: &str| format!("components[{i}].{f}");
            if c.roi.w == 0 || c.roi.h == 0 {
                return Err(Error::query(at("roi"), "width and height must be >= 1"));
            }
            let k = &c.constraints;
            if k.kinds().is_empty() {
                return Err(Error::query(at("constraints"), "at least one constraint is required"));
            }
            if let Some(a) = &k.activity {
                if !(0.0..=1.0).contains(&a.level) {
                    return Err(Error::query(at("constraints.activity.level"), "must be in [0, 1]"));
                }
            }
            if let Some(s) = &k.size {
                if !(s.pixels >= 0.0 && s.pixels.is_finite()) {
                    return Err(Error::query(at("constraints.size.pixels"), "must be >= 0"));
                }
            }
            if let Some(col) = &k.color {
                match (&col.rgb, &col.histogram) {
                    (Some(_), None) => {}
                    (None, Some(h)) => {
                        if h.len() != COLOR_BINS {
                            return Err(Error::query(
                                at("constraints.color.histogram"),
                                format!("expected {COLOR_BINS} bins, got {}", h.len()),
                            ));
                        }
                        if h.iter().any(|v| !(*v >= 0.0 && v.is_finite()))
                            || h.iter().sum::<f64>() <= 0.0
                        {
                            return Err(Error::query(
                                at("constraints.color.histogram"),
                                "bins must be non-negative with a positive total",
                            ));
                        }
                    }
                    _ => {
                        return Err(Error::query(
                            at("constraints.color"),
                            "give exactly one of rgb or histogram",
                        ))
                    }
                }
            }
            if let Some(m) = &k.motion {
                if m.directions.is_empty() {
                    return Err(Error::query(
                        at("constraints.motion.directions"),
                        "at least one direction is required",
                    ));
                }
                if let Some(cov) = m.coverage {
                    if !(cov > 0.0 && cov <= 1.0) {
                        return Err(Error::query(at("constraints.motion.coverage"), "must be in (0, 1]"));
                    }
                }
            }
            if let Some(d) = &k.displacement {
                if !(d.dx.is_finite() && d.dy.is_finite()) {
                    return Err(Error::query(at("constraints.displacement"), "must be finite"));
                }
            }
        }
        if let Some(w) = &self.weights {
            if !(w.r#match > 0.0) {
                return Err(Error::query("weights.match", "must be > 0"));
            }
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0) {
                return Err(Error::query("threshold", "must be > 0"));
            }
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::query("lambda", "must be >= 0"));
            }
        }
        if self.horizon == Some(0) {
            return Err(Error::query("horizon", "must be >= 1"));
        }
        Ok(())
    }
}

/// Query trees of one component: for every anchor whose block touches the
/// ROI, one tree per constrained feature.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledComponent {
    pub kinds: Vec<FeatureKind>,
    pub anchors: Vec<(u32, u32)>,
    /// `trees[a][f]` is the tree of feature `kinds[f]` at `anchors[a]`.
    pub trees: Vec<Vec<FeatureTree>>,
}

/// Atoms assigned to a ROI: those whose center lies inside it, or else the
/// atom under the ROI's center.
pub fn roi_atoms(roi: &Roi, geometry: &GridGeometry) -> Vec<(u32, u32)> {
    let b = geometry.tile_size as f64;
    let mut out = Vec::new();
    for v in 0..geometry.atoms_per_col() {
        for u in 0..geometry.atoms_per_row() {
            if roi.contains((u as f64 + 0.5) * b, (v as f64 + 0.5) * b) {
                out.push((u, v));
            }
        }
    }
    if out.is_empty() {
        let cx = roi.x as f64 + roi.w as f64 / 2.0;
        let cy = roi.y as f64 + roi.h as f64 / 2.0;
        out.extend(geometry.atom_of_pixel(cx, cy));
    }
    out
}

fn atom_value(kind: FeatureKind, c: &Constraints, g: &GridGeometry) -> FeatureVector {
    let samples = |frames: u32| (g.tile_size * g.tile_size * frames) as f64;
    match kind {
        FeatureKind::Activity => FeatureVector::Activity(c.activity.as_ref().unwrap().level),
        FeatureKind::BlobSize => FeatureVector::BlobSize(c.size.as_ref().unwrap().pixels),
        FeatureKind::Persistence => {
            FeatureVector::Persistence(c.persistence.as_ref().unwrap().min_frames)
        }
        FeatureKind::Color => {
            let col = c.color.as_ref().unwrap();
            let mut h = [0u32; COLOR_BINS];
            if let Some(rgb) = col.rgb {
                for b in color_bins(rgb) {
                    h[b] = 1000;
                }
            } else if let Some(hist) = &col.histogram {
                let total: f64 = hist.iter().sum();
                for (dst, v) in h.iter_mut().zip(hist) {
                    *dst = (v / total * 3000.0).round() as u32;
                }
            }
            FeatureVector::Color(h)
        }
        FeatureKind::Motion => {
            let m = c.motion.as_ref().unwrap();
            let total = samples(g.frames_per_document.saturating_sub(1).max(1));
            let coverage = m.coverage.unwrap_or(DEFAULT_MOTION_COVERAGE);
            let mut dirs: Vec<usize> = m.directions.iter().map(|d| d.bin()).collect();
            dirs.sort();
            dirs.dedup();
            let mut h = [0u32; MOTION_BINS];
            let share = (total * coverage / dirs.len() as f64).round() as u32;
            for d in dirs {
                h[d] = share;
            }
            let moving: u32 = h.iter().sum();
            h[IDLE_BIN] = (total as u32).saturating_sub(moving);
            FeatureVector::Motion(h)
        }
        FeatureKind::Displacement => {
            let d = c.displacement.as_ref().unwrap();
            FeatureVector::Displacement { dx: d.dx, dy: d.dy }
        }
    }
}

/// Value of an atom outside the ROI: nothing happening.
fn neutral_value(kind: FeatureKind, g: &GridGeometry) -> FeatureVector {
    match kind {
        FeatureKind::Motion => {
            let mut h = [0u32; MOTION_BINS];
            h[IDLE_BIN] = g.tile_size * g.tile_size * g.frames_per_document.saturating_sub(1).max(1);
            FeatureVector::Motion(h)
        }
        other => other.empty(),
    }
}

/// Builds the query trees of every component against an archive layout.
pub fn compile_query(
    query: &Query,
    geometry: &GridGeometry,
    feature_set: FeatureSet,
) -> Result<Vec<CompiledComponent>> {
    if let Some(g) = &query.geometry {
        if g != geometry {
            return Err(Error::IndexMismatch(format!(
                "query geometry {g:?} differs from archive geometry {geometry:?}"
            )));
        }
    }
    let k = geometry.tree_depth;
    query
        .components
        .iter()
        .enumerate()
        .map(|(i, comp)| {
            let kinds = comp.constraints.kinds();
            for kind in &kinds {
                if !feature_set.features().contains(kind) {
                    return Err(Error::query(
                        format!("components[{i}].constraints.{}", kind.name()),
                        format!("{feature_set} archives have no {kind} index"),
                    ));
                }
            }
            let roi = &comp.roi;
            if roi.x >= geometry.frame_width || roi.y >= geometry.frame_height {
                return Err(Error::query(
                    format!("components[{i}].roi"),
                    "region lies outside the frame",
                ));
            }
            let atoms = roi_atoms(roi, geometry);
            if atoms.is_empty() {
                return Err(Error::query(
                    format!("components[{i}].roi"),
                    "region does not cover any tile",
                ));
            }
            let anchors: Vec<(u32, u32)> = geometry
                .anchors()
                .filter(|&(u, v)| {
                    atoms
                        .iter()
                        .any(|&(au, av)| au >= u && au < u + k && av >= v && av < v + k)
                })
                .collect();
            let mut per_kind = Vec::with_capacity(kinds.len());
            for &kind in &kinds {
                let trees = if kind == FeatureKind::Displacement {
                    let value = atom_value(kind, &comp.constraints, geometry);
                    anchors
                        .iter()
                        .map(|&(u, v)| FeatureTree::leaf(value.clone(), AtomCoord::new(u, v, 0)))
                        .collect()
                } else {
                    let mut grid = AtomGrid::for_geometry(kind, geometry);
                    let neutral = neutral_value(kind, geometry);
                    for val in grid.values.iter_mut() {
                        *val = neutral.clone();
                    }
                    let value = atom_value(kind, &comp.constraints, geometry);
                    for &(u, v) in &atoms {
                        grid.set(u, v, value.clone());
                    }
                    let all = build_trees(&grid, geometry, 0)?;
                    let per_row = geometry.anchors_per_row();
                    anchors
                        .iter()
                        .map(|&(u, v)| all[(v * per_row + u) as usize].clone())
                        .collect()
                };
                per_kind.push(trees);
            }
            let trees = (0..anchors.len())
                .map(|a| per_kind.iter().map(|t: &Vec<FeatureTree>| t[a].clone()).collect())
                .collect();
            Ok(CompiledComponent {
                kinds,
                anchors,
                trees,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::plan_grid;

    const EAST: &str = r#"{"components":[{"roi":{"x":0,"y":0,"w":48,"h":16},
        "constraints":{"motion":{"directions":["east"]}}}]}"#;

    #[test]
    fn parses_minimal_query() {
        let q = Query::from_json(EAST).unwrap();
        assert_eq!(q.version, 1);
        assert_eq!(q.components[0].constraints.kinds(), vec![FeatureKind::Motion]);
        assert_eq!(Query::from_json(&q.to_json()).unwrap(), q);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = r#"{"components":[{"roi":{"x":0,"y":0,"w":"wide","h":16},"constraints":{}}]}"#;
        match Query::from_json(bad) {
            Err(Error::Query { path, .. }) => assert_eq!(path, "components[0].roi.w"),
            other => panic!("{other:?}"),
        }
        let empty = r#"{"components":[{"roi":{"x":0,"y":0,"w":8,"h":16},"constraints":{}}]}"#;
        match Query::from_json(empty) {
            Err(Error::Query { path, .. }) => assert_eq!(path, "components[0].constraints"),
            other => panic!("{other:?}"),
        }
        let dir = r#"{"components":[{"roi":{"x":0,"y":0,"w":8,"h":16},
            "constraints":{"motion":{"directions":["up"]}}}]}"#;
        match Query::from_json(dir) {
            Err(Error::Query { path, .. }) => {
                assert_eq!(path, "components[0].constraints.motion.directions[0]")
            }
            other => panic!("{other:?}"),
        }
        assert!(Query::from_json(r#"{"components":[]}"#).is_err());
        assert!(Query::from_json("{").is_err());
    }

    #[test]
    fn roi_atoms_use_tile_centers() {
        let g = plan_grid(64, 64, 16, 30, 2).unwrap();
        let roi = Roi { x: 0, y: 0, w: 48, h: 16 };
        assert_eq!(roi_atoms(&roi, &g), vec![(0, 0), (1, 0), (2, 0)]);
        let tiny = Roi { x: 20, y: 20, w: 2, h: 2 };
        assert_eq!(roi_atoms(&tiny, &g), vec![(1, 1)]);
    }

    #[test]
    fn compiled_trees_cover_touching_anchors() {
        let g = plan_grid(64, 64, 16, 30, 2).unwrap();
        let q = Query::from_json(EAST).unwrap();
        let c = &compile_query(&q, &g, FeatureSet::Cctv).unwrap()[0];
        // Atoms (0..3, 0) are touched by anchors (0..3, 0) of the 3×3 anchor grid.
        assert_eq!(c.anchors, vec![(0, 0), (1, 0), (2, 0)]);
        let FeatureVector::Motion(leaf) = &c.trees[0][0].leaves()[0] else {
            unreachable!()
        };
        let total = 16 * 16 * 29;
        assert_eq!(leaf[0] + leaf[IDLE_BIN], total);
        assert_eq!(leaf[0], (total as f64 * 0.5).round() as u32);
        let FeatureVector::Motion(below) = &c.trees[0][0].leaves()[2] else {
            unreachable!()
        };
        assert_eq!(below[IDLE_BIN], total);
    }

    #[test]
    fn geometry_and_feature_mismatches() {
        let g = plan_grid(64, 64, 16, 30, 2).unwrap();
        let mut q = Query::from_json(EAST).unwrap();
        q.geometry = Some(plan_grid(64, 64, 16, 15, 2).unwrap());
        assert!(matches!(
            compile_query(&q, &g, FeatureSet::Cctv),
            Err(Error::IndexMismatch(_))
        ));
        q.geometry = None;
        let air = plan_grid(64, 64, 16, 15, 1).unwrap();
        assert!(matches!(
            compile_query(&q, &air, FeatureSet::Airborne),
            Err(Error::Query { .. })
        ));
    }
}
