use super::{
    color_bins, connected_components, horn_schunck, ActivityMask, BackgroundModel, CctvParams,
    FlowField, Labeling, PersistenceAccumulator,
};
use crate::error::{Error, Result};
use crate::feature::{FeatureKind, FeatureVector, COLOR_BINS, IDLE_BIN, MOTION_BINS};
use crate::frame::{Frame, GrayFrame};
use crate::geometry::GridGeometry;
use crate::tree::{build_trees, AtomGrid, FeatureTree};

/// Motion bin of a flow vector: idle below `idle_threshold`, otherwise one
/// of eight 45° sectors centered on E, NE, N, NW, W, SW, S, SE (image y
/// grows downwards, so north is `-y`).
pub fn motion_bin(dx: f32, dy: f32, idle_threshold: f32) -> usize {
    if (dx * dx + dy * dy).sqrt() < idle_threshold {
        return IDLE_BIN;
    }
    let angle = (-dy as f64).atan2(dx as f64).to_degrees();
    ((angle / 45.0).round() as i64).rem_euclid(8) as usize
}

/// The five per-atom grids of one document.
#[derive(Clone, Debug, PartialEq)]
pub struct CctvAtomFeatures {
    pub activity: AtomGrid,
    pub blob_size: AtomGrid,
    pub color: AtomGrid,
    pub persistence: AtomGrid,
    pub motion: AtomGrid,
}

impl CctvAtomFeatures {
    pub fn grid(&self, kind: FeatureKind) -> Option<&AtomGrid> {
        match kind {
            FeatureKind::Activity => Some(&self.activity),
            FeatureKind::BlobSize => Some(&self.blob_size),
            FeatureKind::Color => Some(&self.color),
            FeatureKind::Persistence => Some(&self.persistence),
            FeatureKind::Motion => Some(&self.motion),
            FeatureKind::Displacement => None,
        }
    }

    /// Trees for every feature, grouped by feature in `FeatureKind::CCTV` order.
    pub fn trees(
        &self,
        geometry: &GridGeometry,
        document: u32,
    ) -> Result<Vec<(FeatureKind, Vec<FeatureTree>)>> {
        FeatureKind::CCTV
            .iter()
            .map(|&k| Ok((k, build_trees(self.grid(k).unwrap(), geometry, document)?)))
            .collect()
    }
}

/// Running per-atom statistics for the document being built.
#[derive(Clone, Debug)]
pub struct DocumentAccumulator {
    geometry: GridGeometry,
    idle_threshold: f32,
    active: Vec<u32>,
    blob_max: Vec<u32>,
    color: Vec<[u32; COLOR_BINS]>,
    persistence: Vec<u32>,
    motion: Vec<[u32; MOTION_BINS]>,
}

impl DocumentAccumulator {
    pub fn new(geometry: GridGeometry, idle_threshold: f32) -> Self {
        let n = geometry.atom_count();
        DocumentAccumulator {
            geometry,
            idle_threshold,
            active: vec![0; n],
            blob_max: vec![0; n],
            color: vec![[0; COLOR_BINS]; n],
            persistence: vec![0; n],
            motion: vec![[0; MOTION_BINS]; n],
        }
    }

    fn atom_index(&self, x: u32, y: u32) -> Option<usize> {
        let b = self.geometry.tile_size;
        let (u, v) = (x / b, y / b);
        if u < self.geometry.atoms_per_row() && v < self.geometry.atoms_per_col() {
            Some(v as usize * self.geometry.atoms_per_row() as usize + u as usize)
        } else {
            None
        }
    }

    /// Folds in one frame's mask, blobs and persistence counters (taken after
    /// the counters were updated with this frame's mask).
    pub fn add_frame(
        &mut self,
        frame: &Frame,
        mask: &ActivityMask,
        labeling: &Labeling,
        persistence: &[u32],
    ) -> Result<()> {
        self.check(frame.width, frame.height)?;
        self.check(mask.width, mask.height)?;
        self.check(labeling.width, labeling.height)?;
        if persistence.len() != mask.active.len() {
            return Err(Error::dimension(mask.active.len(), persistence.len()));
        }
        let w = frame.width;
        for y in 0..frame.height {
            for x in 0..w {
                let Some(a) = self.atom_index(x, y) else {
                    continue;
                };
                let p = (y * w + x) as usize;
                self.persistence[a] = self.persistence[a].max(persistence[p]);
                if !mask.active[p] {
                    continue;
                }
                self.active[a] += 1;
                if let Some(blob) = labeling.blob_at(x, y) {
                    self.blob_max[a] = self.blob_max[a].max(blob.size() as u32);
                }
                for bin in color_bins(frame.rgb(x, y)) {
                    self.color[a][bin] += 1;
                }
            }
        }
        Ok(())
    }

    pub fn add_flow(&mut self, flow: &FlowField) -> Result<()> {
        self.check(flow.width, flow.height)?;
        for y in 0..flow.height {
            for x in 0..flow.width {
                if let Some(a) = self.atom_index(x, y) {
                    let (dx, dy) = flow.at(x, y);
                    self.motion[a][motion_bin(dx, dy, self.idle_threshold)] += 1;
                }
            }
        }
        Ok(())
    }

    fn check(&self, width: u32, height: u32) -> Result<()> {
        if width != self.geometry.frame_width || height != self.geometry.frame_height {
            return Err(Error::dimension(
                format!(
                    "{}x{}",
                    self.geometry.frame_width, self.geometry.frame_height
                ),
                format!("{width}x{height}"),
            ));
        }
        Ok(())
    }

    pub fn finish(self) -> CctvAtomFeatures {
        let g = &self.geometry;
        let samples = g.frames_per_document as f64 * (g.tile_size as f64).powi(2);
        let grid = |kind, values: Vec<FeatureVector>| AtomGrid {
            kind,
            cols: g.atoms_per_row(),
            rows: g.atoms_per_col(),
            values,
        };
        CctvAtomFeatures {
            activity: grid(
                FeatureKind::Activity,
                self.active
                    .iter()
                    .map(|&c| FeatureVector::Activity(c as f64 / samples))
                    .collect(),
            ),
            blob_size: grid(
                FeatureKind::BlobSize,
                self.blob_max
                    .iter()
                    .map(|&s| FeatureVector::BlobSize(s as f64))
                    .collect(),
            ),
            color: grid(
                FeatureKind::Color,
                self.color.into_iter().map(FeatureVector::Color).collect(),
            ),
            persistence: grid(
                FeatureKind::Persistence,
                self.persistence
                    .into_iter()
                    .map(FeatureVector::Persistence)
                    .collect(),
            ),
            motion: grid(
                FeatureKind::Motion,
                self.motion.into_iter().map(FeatureVector::Motion).collect(),
            ),
        }
    }
}

/// Per-frame products of one document, as produced by the streaming stage.
pub struct DocumentInputs<'a> {
    pub frames: &'a [Frame],
    pub masks: &'a [ActivityMask],
    pub labelings: &'a [Labeling],
    /// Flow between consecutive frames of the document (`frames.len() - 1` fields).
    pub flows: &'a [FlowField],
    /// Persistence counters after each frame.
    pub persistence: &'a [Vec<u32>],
}

/// Per-atom activity, blob size, color, persistence and motion of one document.
pub fn extract_atom_features(
    geometry: &GridGeometry,
    inputs: &DocumentInputs<'_>,
    idle_threshold: f32,
) -> Result<CctvAtomFeatures> {
    let n = inputs.frames.len();
    if inputs.masks.len() != n || inputs.labelings.len() != n || inputs.persistence.len() != n {
        return Err(Error::dimension(
            format!("{n} per-frame products"),
            format!(
                "{} masks, {} labelings, {} persistence maps",
                inputs.masks.len(),
                inputs.labelings.len(),
                inputs.persistence.len()
            ),
        ));
    }
    let mut acc = DocumentAccumulator::new(*geometry, idle_threshold);
    for i in 0..n {
        acc.add_frame(
            &inputs.frames[i],
            &inputs.masks[i],
            &inputs.labelings[i],
            &inputs.persistence[i],
        )?;
    }
    for flow in inputs.flows {
        acc.add_flow(flow)?;
    }
    Ok(acc.finish())
}

/// Streaming CCTV feature extraction: feed frames in order, receive one
/// feature set per completed document. Holds one previous frame, never a
/// whole document.
pub struct CctvExtractor {
    geometry: GridGeometry,
    params: CctvParams,
    background: BackgroundModel,
    persistence: PersistenceAccumulator,
    previous: Option<GrayFrame>,
    document: DocumentAccumulator,
    frame_index: u64,
}

impl CctvExtractor {
    pub fn new(geometry: GridGeometry, params: CctvParams, background: BackgroundModel) -> Self {
        let (w, h) = background.dimensions();
        CctvExtractor {
            geometry,
            document: DocumentAccumulator::new(geometry, params.idle_threshold),
            params,
            background,
            persistence: PersistenceAccumulator::new(w, h),
            previous: None,
            frame_index: 0,
        }
    }

    pub fn frames_seen(&self) -> u64 {
        self.frame_index
    }

    pub fn push(&mut self, frame: &Frame) -> Result<Option<(u32, CctvAtomFeatures)>> {
        let a = self.geometry.frames_per_document as u64;
        let position = self.frame_index % a;
        let mask = self.background.subtract(frame)?;
        self.persistence.update(&mask)?;
        let labeling = connected_components(&mask);
        self.document
            .add_frame(frame, &mask, &labeling, &self.persistence.counts)?;
        let gray = frame.to_gray();
        if position > 0 {
            if let Some(prev) = &self.previous {
                let flow = horn_schunck(
                    prev,
                    &gray,
                    self.params.flow_smoothness,
                    self.params.flow_iterations,
                )?;
                self.document.add_flow(&flow)?;
            }
        }
        self.previous = Some(gray);
        self.frame_index += 1;
        if position + 1 == a {
            let done = std::mem::replace(
                &mut self.document,
                DocumentAccumulator::new(self.geometry, self.params.idle_threshold),
            );
            let doc = ((self.frame_index - 1) / a) as u32;
            return Ok(Some((doc, done.finish())));
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::plan_grid;

    #[test]
    fn motion_sectors() {
        assert_eq!(motion_bin(0.1, 0.1, 0.5), IDLE_BIN);
        assert_eq!(motion_bin(2.0, 0.0, 0.5), 0);
        assert_eq!(motion_bin(1.0, -1.0, 0.5), 1);
        assert_eq!(motion_bin(0.0, -2.0, 0.5), 2);
        assert_eq!(motion_bin(-2.0, 0.0, 0.5), 4);
        assert_eq!(motion_bin(0.0, 2.0, 0.5), 6);
        assert_eq!(motion_bin(1.0, 1.0, 0.5), 7);
        // 22° stays east, 23° goes north-east.
        let r = 2.0f32;
        let at = |deg: f32| (r * deg.to_radians().cos(), -r * deg.to_radians().sin());
        let (x, y) = at(22.0);
        assert_eq!(motion_bin(x, y, 0.5), 0);
        let (x, y) = at(23.0);
        assert_eq!(motion_bin(x, y, 0.5), 1);
    }

    fn geometry() -> GridGeometry {
        plan_grid(32, 32, 16, 4, 1).unwrap()
    }

    fn params() -> CctvParams {
        CctvParams {
            flow_iterations: 30,
            ..CctvParams::default()
        }
    }

    fn run(frames: &[Frame]) -> CctvAtomFeatures {
        let g = geometry();
        let bg = BackgroundModel::from_frame(&Frame::filled(32, 32, [40, 40, 40]), 0.05, 20.0);
        let mut ex = CctvExtractor::new(g, params(), bg);
        let mut out = None;
        for f in frames {
            if let Some((doc, feats)) = ex.push(f).unwrap() {
                assert_eq!(doc, 0);
                out = Some(feats);
            }
        }
        out.expect("one document")
    }

    fn square_frame(x0: i32, color: [u8; 3]) -> Frame {
        let mut f = Frame::filled(32, 32, [40, 40, 40]);
        for y in 2..14 {
            for x in x0..x0 + 8 {
                if (0..32).contains(&x) {
                    // Vertical stripes that travel with the square give the
                    // flow gradients inside it.
                    let shade = if (x - x0) % 3 == 0 { 30 } else { 0 };
                    let c = color.map(|v| v.saturating_sub(shade));
                    f.set_rgb(x as u32, y as u32, c);
                }
            }
        }
        f
    }

    #[test]
    fn static_document_is_empty_and_idle() {
        let frames = vec![Frame::filled(32, 32, [40, 40, 40]); 4];
        let feats = run(&frames);
        let g = geometry();
        let samples = g.tile_size * g.tile_size * (g.frames_per_document - 1);
        for v in 0..2 {
            for u in 0..2 {
                assert_eq!(*feats.activity.get(u, v), FeatureVector::Activity(0.0));
                assert_eq!(*feats.blob_size.get(u, v), FeatureVector::BlobSize(0.0));
                assert_eq!(*feats.color.get(u, v), FeatureVector::Color([0; 16]));
                let mut idle = [0; MOTION_BINS];
                idle[IDLE_BIN] = samples;
                assert_eq!(*feats.motion.get(u, v), FeatureVector::Motion(idle));
            }
        }
    }

    #[test]
    fn red_square_fills_hue_bin_zero() {
        let frames: Vec<Frame> = (0..4).map(|i| square_frame(2 + 2 * i, [255, 0, 0])).collect();
        let feats = run(&frames);
        let FeatureVector::Color(h) = feats.color.get(0, 0) else {
            unreachable!()
        };
        let hue_total: u32 = h[..8].iter().sum();
        assert!(hue_total > 0);
        assert_eq!(h[0], hue_total);
    }

    #[test]
    fn eastward_square_dominates_east_bin() {
        let frames: Vec<Frame> = (0..4)
            .map(|i| square_frame(2 + 2 * i, [220, 220, 90]))
            .collect();
        let feats = run(&frames);
        let FeatureVector::Motion(h) = feats.motion.get(0, 0) else {
            unreachable!()
        };
        let dominant = (0..8).max_by_key(|&b| h[b]).unwrap();
        assert_eq!(dominant, 0, "{h:?}");
        // Conservation: every flow sample lands in exactly one bin.
        assert_eq!(h.iter().sum::<u32>(), 16 * 16 * 3);
    }

    #[test]
    fn conservation_and_causality() {
        let frames: Vec<Frame> = (0..4).map(|i| square_frame(2 + 3 * i, [10, 200, 30])).collect();
        let feats = run(&frames);
        for v in 0..2 {
            for u in 0..2 {
                let FeatureVector::Activity(a) = *feats.activity.get(u, v) else {
                    unreachable!()
                };
                let FeatureVector::Color(c) = feats.color.get(u, v) else {
                    unreachable!()
                };
                let active = (a * (16.0 * 16.0 * 4.0)).round() as u32;
                assert_eq!(c[..8].iter().sum::<u32>(), active);
                assert_eq!(c[8..12].iter().sum::<u32>(), active);
                assert_eq!(c[12..].iter().sum::<u32>(), active);
            }
        }
    }

    #[test]
    fn streaming_matches_batch_extraction() {
        let g = geometry();
        let frames: Vec<Frame> = (0..4).map(|i| square_frame(1 + 3 * i, [200, 50, 50])).collect();
        let streamed = run(&frames);

        let mut bg =
            BackgroundModel::from_frame(&Frame::filled(32, 32, [40, 40, 40]), 0.05, 20.0);
        let mut acc = PersistenceAccumulator::new(32, 32);
        let (mut masks, mut labelings, mut pers, mut flows) = (vec![], vec![], vec![], vec![]);
        for f in &frames {
            let m = bg.subtract(f).unwrap();
            acc.update(&m).unwrap();
            labelings.push(connected_components(&m));
            pers.push(acc.counts.clone());
            masks.push(m);
        }
        for w in frames.windows(2) {
            flows.push(horn_schunck(&w[0].to_gray(), &w[1].to_gray(), 1.0, 30).unwrap());
        }
        let inputs = DocumentInputs {
            frames: &frames,
            masks: &masks,
            labelings: &labelings,
            flows: &flows,
            persistence: &pers,
        };
        let batch = extract_atom_features(&g, &inputs, 0.5).unwrap();
        assert_eq!(batch, streamed);
    }
}
