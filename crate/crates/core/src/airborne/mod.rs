//! Aerial footage: frame-differencing detections, greedy frame-to-frame
//! association into tracklets, and per-atom displacement features.

mod assign;
mod detect;
mod gmm;
mod tracklet;

pub use assign::greedy_assign;
pub use detect::{
    detect_bodies, detect_candidates, difference_mask, open3x3, size_filter, DetectionCandidate,
};
pub use gmm::{ColorModel, GmmParams};
pub use tracklet::{
    match_cost, match_terms, shape_error, track_records, tracklet_features, CostTerms,
    TrackPoint, TrackPointRecord, Tracklet,
};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirborneParams {
    /// Gray-level change that marks a pixel as moving.
    pub difference_threshold: f32,
    /// Frames between the two images that are differenced.
    pub frame_spacing: u32,
    /// Bodies with more pixels than this are discarded.
    pub max_body_size: usize,
    /// Weights of distance, size, shape, color and prediction.
    pub weights: [f64; 5],
    /// Pairs must cost less than this to be associated.
    pub gate: f64,
    /// Track points whose colors feed the mixture.
    pub color_history: usize,
    pub gmm_components: usize,
    pub gmm_iterations: u32,
    pub gmm_variance_floor: f64,
}

impl Default for AirborneParams {
    fn default() -> Self {
        AirborneParams {
            difference_threshold: 15.0,
            frame_spacing: 1,
            max_body_size: 150,
            weights: [1.0, 0.1, 50.0, 1.0, 1.0],
            gate: 100.0,
            color_history: 5,
            gmm_components: 3,
            gmm_iterations: 10,
            gmm_variance_floor: 100.0,
        }
    }
}

impl AirborneParams {
    /// Settings for pedestrians: lower threshold, ten-frame spacing.
    pub fn humans() -> Self {
        AirborneParams {
            difference_threshold: 10.0,
            frame_spacing: 10,
            ..AirborneParams::default()
        }
    }

    pub fn gmm(&self) -> GmmParams {
        GmmParams {
            components: self.gmm_components,
            iterations: self.gmm_iterations,
            variance_floor: self.gmm_variance_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("airborne weights must be non-negative".into()));
        }
        if self.frame_spacing == 0 || self.gmm_components == 0 {
            return Err(Error::Config(
                "frame spacing and mixture components must be >= 1".into(),
            ));
        }
        if !(self.gmm_variance_floor > 0.0) {
            return Err(Error::Config("mixture variance floor must be > 0".into()));
        }
        Ok(())
    }
}

/// Live association state: extends tracklets with the candidates of each
/// new detection step.
pub struct Tracker {
    params: AirborneParams,
    gmm: GmmParams,
    next_id: u32,
    active: Vec<Tracklet>,
    finished: Vec<Tracklet>,
}

impl Tracker {
    pub fn new(params: AirborneParams) -> Self {
        Tracker {
            gmm: params.gmm(),
            params,
            next_id: 0,
            active: Vec::new(),
            finished: Vec::new(),
        }
    }

    pub fn active(&self) -> &[Tracklet] {
        &self.active
    }

    /// Associates the candidates detected at `frame` with the live tracklets.
    /// Matched tracklets are extended, unmatched ones end, and unmatched
    /// candidates start new tracklets. Returns the chosen
    /// `(tracklet index, candidate index, cost)` triples.
    pub fn step(
        &mut self,
        frame: u64,
        candidates: Vec<DetectionCandidate>,
    ) -> Vec<(usize, usize, f64)> {
        let costs: Vec<Vec<f64>> = self
            .active
            .iter()
            .map(|t| {
                candidates
                    .iter()
                    .map(|m| match_cost(t, m, frame, &self.params.weights))
                    .collect()
            })
            .collect();
        let chosen = greedy_assign(&costs, self.params.gate);

        let mut next_for_track: Vec<Option<usize>> = vec![None; self.active.len()];
        let mut taken = vec![false; candidates.len()];
        for &(l, m, _) in &chosen {
            next_for_track[l] = Some(m);
            taken[m] = true;
        }
        let mut slots: Vec<Option<DetectionCandidate>> = candidates.into_iter().map(Some).collect();
        let mut still = Vec::with_capacity(self.active.len());
        for (t, next) in std::mem::take(&mut self.active).into_iter().zip(next_for_track) {
            match next {
                Some(m) => {
                    let mut t = t;
                    t.push(frame, slots[m].take().unwrap(), &self.gmm);
                    still.push(t);
                }
                None => self.finished.push(t),
            }
        }
        for (m, slot) in slots.into_iter().enumerate() {
            if !taken[m] {
                let c = slot.unwrap();
                still.push(Tracklet::new(
                    self.next_id,
                    frame,
                    c,
                    self.params.color_history,
                    &self.gmm,
                ));
                self.next_id += 1;
            }
        }
        self.active = still;
        chosen
    }

    /// All tracklets, ordered by id.
    pub fn finish(mut self) -> Vec<Tracklet> {
        self.finished.append(&mut self.active);
        self.finished.sort_by_key(|t| t.id);
        self.finished
    }
}

/// Counts of bodies seen before and after size filtering.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DetectionStats {
    pub bodies: usize,
    pub kept: usize,
}

/// Streaming detection plus association. Frame `n` is differenced against
/// frame `n + spacing`; the candidates are dated at the later frame.
pub struct AirbornePipeline {
    params: AirborneParams,
    window: VecDeque<Frame>,
    frame_index: u64,
    tracker: Tracker,
    pub stats: DetectionStats,
}

impl AirbornePipeline {
    pub fn new(params: AirborneParams) -> Self {
        AirbornePipeline {
            tracker: Tracker::new(params.clone()),
            params,
            window: VecDeque::new(),
            frame_index: 0,
            stats: DetectionStats::default(),
        }
    }

    pub fn push(&mut self, frame: Frame) -> Result<()> {
        self.window.push_back(frame);
        self.frame_index += 1;
        let spacing = self.params.frame_spacing as usize;
        if self.window.len() > spacing {
            let bodies = detect_bodies(
                &self.window[0],
                &self.window[spacing],
                self.params.difference_threshold,
            )?;
            self.stats.bodies += bodies.len();
            let kept = size_filter(bodies, self.params.max_body_size);
            self.stats.kept += kept.len();
            self.tracker.step(self.frame_index - 1, kept);
            self.window.pop_front();
        }
        Ok(())
    }

    pub fn frames_seen(&self) -> u64 {
        self.frame_index
    }

    pub fn finish(self) -> Vec<Tracklet> {
        self.tracker.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_with_dot(x0: u32, y0: u32) -> Frame {
        let mut f = Frame::filled(64, 64, [50, 50, 50]);
        for y in y0..y0 + 8 {
            for x in x0..x0 + 8 {
                f.set_rgb(x, y, [230, 200, 60]);
            }
        }
        f
    }

    #[test]
    fn tracker_follows_a_moving_dot() {
        let mut p = AirbornePipeline::new(AirborneParams::default());
        // Leading and trailing edges each yield a 4×8 body per step.
        for i in 0..12 {
            p.push(frame_with_dot(4 + 4 * i, 30)).unwrap();
        }
        let tracks = p.finish();
        let longest = tracks.iter().max_by_key(|t| t.points.len()).unwrap();
        assert!(longest.points.len() >= 10, "{}", longest.points.len());
        for w in longest.points.windows(2) {
            assert_eq!(w[1].frame - w[0].frame, 1);
        }
        let (dx, _) = longest.displacement(5);
        assert!((dx - 4.0).abs() < 0.5, "{dx}");
    }

    #[test]
    fn unmatched_tracks_end_and_candidates_seed() {
        let mut t = Tracker::new(AirborneParams::default());
        let c = |x: u32| DetectionCandidate::from_pixels(&[(x, 5), (x + 1, 5)], None);
        assert!(t.step(1, vec![c(5)]).is_empty());
        assert_eq!(t.step(2, vec![c(6)]).len(), 1);
        t.step(3, vec![]);
        assert!(t.active().is_empty());
        t.step(4, vec![c(40)]);
        let all = t.finish();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].points.len(), 2);
        assert_eq!(all[1].id, 1);
    }

    #[test]
    fn params_validate() {
        assert!(AirborneParams::default().validate().is_ok());
        assert!(AirborneParams::humans().validate().is_ok());
        let mut bad = AirborneParams::default();
        bad.weights[2] = -1.0;
        assert!(bad.validate().is_err());
    }
}
