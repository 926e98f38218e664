//! Scripted synthetic footage with known ground truth: a fixed-camera corpus
//! with planted route events and clutter, and an aerial scene with movers and
//! flicker noise.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ContainerWriter, Frame, FrameSource};
use crate::search::{
    ActionComponent, Constraints, Direction, DisplacementConstraint, MotionConstraint, Query, Roi,
    QUERY_VERSION,
};

fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Uniform in `[-1, 1)`, a pure function of its inputs.
fn hash_noise(seed: u64, a: u64, b: u64, c: u64) -> f64 {
    let h = mix64(seed ^ mix64(a ^ mix64(b ^ mix64(c))));
    (h >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Anything that can render frame `i` on demand.
pub trait Scene: Send + Sync {
    fn dimensions(&self) -> (u32, u32);
    fn frame_count(&self) -> u64;
    fn render(&self, index: u64) -> Frame;
}

/// Streams a scene as a frame source without touching disk.
pub struct SceneSource {
    scene: Arc<dyn Scene>,
    next: u64,
}

impl SceneSource {
    pub fn new(scene: Arc<dyn Scene>) -> Self {
        SceneSource { scene, next: 0 }
    }
}

impl FrameSource for SceneSource {
    fn dimensions(&self) -> (u32, u32) {
        self.scene.dimensions()
    }

    fn len_hint(&self) -> Option<u64> {
        Some(self.scene.frame_count())
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        if self.next >= self.scene.frame_count() {
            return Ok(None);
        }
        let f = self.scene.render(self.next);
        self.next += 1;
        Ok(Some(f))
    }
}

/// Writes every frame of a scene to a container file; returns the frame count.
pub fn write_scene(scene: &dyn Scene, path: &std::path::Path) -> Result<u32> {
    let (w, h) = scene.dimensions();
    let mut writer = ContainerWriter::create(path, w, h)?;
    for i in 0..scene.frame_count() {
        writer.push(&scene.render(i))?;
    }
    writer.finish()
}

/// A textured rectangle. `texture == 0` renders a flat color.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sprite {
    pub width: u32,
    pub height: u32,
    pub rgb: [u8; 3],
    pub texture: u64,
    pub contrast: f64,
}

impl Sprite {
    fn pixel(&self, lx: u32, ly: u32) -> [u8; 3] {
        if self.texture == 0 {
            return self.rgb;
        }
        let t = self.texture;
        let px = (t % 7) as f64;
        let py = ((t >> 8) % 7) as f64;
        let s = (lx as f64 * 0.9 + px).sin() * (ly as f64 * 0.8 + py).cos();
        let g = 0.5 * hash_noise(t, (lx / 3) as u64, (ly / 3) as u64, 1);
        let delta = self.contrast * (0.75 * s + 0.25 * g);
        [
            clamp_u8(self.rgb[0] as f64 + delta),
            clamp_u8(self.rgb[1] as f64 + delta),
            clamp_u8(self.rgb[2] as f64 + delta),
        ]
    }

    fn draw(&self, frame: &mut Frame, cx: f64, cy: f64) {
        let x0 = (cx - self.width as f64 / 2.0).round() as i64;
        let y0 = (cy - self.height as f64 / 2.0).round() as i64;
        for ly in 0..self.height {
            let y = y0 + ly as i64;
            if y < 0 || y >= frame.height as i64 {
                continue;
            }
            for lx in 0..self.width {
                let x = x0 + lx as i64;
                if x < 0 || x >= frame.width as i64 {
                    continue;
                }
                frame.set_rgb(x as u32, y as u32, self.pixel(lx, ly));
            }
        }
    }
}

/// Constant-speed motion along a polyline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start_frame: u64,
    pub waypoints: Vec<(f64, f64)>,
    /// Pixels per frame.
    pub speed: f64,
}

impl Trajectory {
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
            .sum()
    }

    /// Frames on screen, both ends included.
    pub fn duration(&self) -> u64 {
        (self.length() / self.speed).floor() as u64 + 1
    }

    pub fn end_frame(&self) -> u64 {
        self.start_frame + self.duration() - 1
    }

    pub fn position(&self, frame: u64) -> Option<(f64, f64)> {
        if frame < self.start_frame || frame > self.end_frame() {
            return None;
        }
        let mut left = (frame - self.start_frame) as f64 * self.speed;
        for w in self.waypoints.windows(2) {
            let len = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            if left <= len && len > 0.0 {
                let f = left / len;
                return Some((w[0].0 + f * (w[1].0 - w[0].0), w[0].1 + f * (w[1].1 - w[0].1)));
            }
            left -= len;
        }
        self.waypoints.last().copied()
    }

    /// Frame span of each polyline leg.
    pub fn leg_frames(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        let mut at = 0.0;
        for w in self.waypoints.windows(2) {
            let len = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            let a = self.start_frame + (at / self.speed).ceil() as u64;
            at += len;
            let b = self.start_frame + (at / self.speed).floor() as u64;
            out.push((a, b.min(self.end_frame())));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// The full three-leg route, in order.
    Route,
    /// One route leg traversed against its direction.
    WrongDirection,
    /// One route leg in the right direction, nothing else.
    PartialRoute,
    /// Motion away from the route regions.
    Elsewhere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedEvent {
    pub id: usize,
    pub kind: EventKind,
    pub sprite: Sprite,
    pub trajectory: Trajectory,
}

impl PlantedEvent {
    pub fn start_frame(&self) -> u64 {
        self.trajectory.start_frame
    }

    pub fn end_frame(&self) -> u64 {
        self.trajectory.end_frame()
    }

    /// Inclusive document range the event touches.
    pub fn documents(&self, frames_per_document: u32) -> (u32, u32) {
        let a = frames_per_document as u64;
        ((self.start_frame() / a) as u32, (self.end_frame() / a) as u32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CctvCorpusPlan {
    pub width: u32,
    pub height: u32,
    pub frames: u64,
    pub frames_per_document: u32,
    pub routes: usize,
    pub clutter: usize,
    /// Object speed, pixels per frame.
    pub speed: f64,
    /// Peak per-frame sensor noise, gray levels.
    pub noise: f64,
    pub seed: u64,
}

impl Default for CctvCorpusPlan {
    fn default() -> Self {
        CctvCorpusPlan {
            width: 256,
            height: 256,
            frames: 2000,
            frames_per_document: 30,
            routes: 10,
            clutter: 30,
            speed: 3.0,
            noise: 2.0,
            seed: 7,
        }
    }
}

/// Fixed-camera corpus. Every route runs east along the top region, south
/// down the right-hand region and west along the lower region.
#[derive(Clone, Debug)]
pub struct CctvCorpus {
    pub plan: CctvCorpusPlan,
    pub events: Vec<PlantedEvent>,
    /// The three route regions in traversal order.
    pub rois: [Roi; 3],
    legs: [[(f64, f64); 2]; 3],
    background: Vec<u8>,
}

impl CctvCorpus {
    pub fn generate(plan: CctvCorpusPlan) -> Result<CctvCorpus> {
        if plan.width < 128 || plan.height < 128 {
            return Err(Error::Argument("synthetic corpus needs at least 128x128 frames".into()));
        }
        if !(plan.speed > 0.5) {
            return Err(Error::Argument("object speed must exceed 0.5 px/frame".into()));
        }
        let sx = plan.width as f64 / 256.0;
        let sy = plan.height as f64 / 256.0;
        let p = |x: f64, y: f64| (x * sx, y * sy);
        let corners = [p(56.0, 40.0), p(168.0, 40.0), p(168.0, 136.0), p(56.0, 136.0)];
        let legs = [
            [corners[0], corners[1]],
            [corners[1], corners[2]],
            [corners[2], corners[3]],
        ];
        let r = |x: f64, y: f64, w: f64, h: f64| Roi {
            x: (x * sx) as u32,
            y: (y * sy) as u32,
            w: (w * sx) as u32,
            h: (h * sy) as u32,
        };
        let rois = [
            r(48.0, 32.0, 112.0, 16.0),
            r(160.0, 48.0, 16.0, 80.0),
            r(64.0, 128.0, 96.0, 16.0),
        ];

        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        let mut next_id = 0usize;
        let sprite = |rng: &mut ChaCha8Rng| {
            let rgb = [
                rng.gen_range(40..=215u8),
                rng.gen_range(40..=215u8),
                rng.gen_range(40..=215u8),
            ];
            Sprite {
                width: 12,
                height: 12,
                rgb,
                texture: rng.gen_range(1..u64::MAX),
                contrast: 60.0,
            }
        };

        let route_tmpl = Trajectory {
            start_frame: 0,
            waypoints: corners.to_vec(),
            speed: plan.speed,
        };
        let route_len = route_tmpl.duration();
        let leg_len = legs
            .iter()
            .map(|l| {
                Trajectory {
                    start_frame: 0,
                    waypoints: l.to_vec(),
                    speed: plan.speed,
                }
                .duration()
            })
            .max()
            .unwrap_or(1);

        let a = plan.frames_per_document as u64;
        let roi_clutter = plan.clutter.min(plan.routes.max(1));
        let slots = plan.routes as u64 + 1;
        let busy = plan.routes as u64 * route_len;
        if busy > plan.frames {
            return Err(Error::Argument(format!(
                "{} routes need {busy} frames, corpus has {}",
                plan.routes, plan.frames
            )));
        }
        let gap = (plan.frames - busy) / slots;
        let roi_clutter = if gap >= leg_len + a {
            roi_clutter
        } else {
            0
        };

        let mut events = Vec::new();
        let mut t = 0u64;
        for slot in 0..slots {
            if (slot as usize) < roi_clutter {
                // Alternate wrong-direction and single-leg clutter over the
                // three regions, centered in the gap.
                let leg = legs[slot as usize % 3];
                let kind = if slot % 2 == 0 {
                    EventKind::WrongDirection
                } else {
                    EventKind::PartialRoute
                };
                let waypoints = match kind {
                    EventKind::WrongDirection => vec![leg[1], leg[0]],
                    _ => vec![leg[0], leg[1]],
                };
                let start = t + (gap.saturating_sub(leg_len)) / 2;
                events.push(PlantedEvent {
                    id: next_id,
                    kind,
                    sprite: sprite(&mut rng),
                    trajectory: Trajectory {
                        start_frame: start,
                        waypoints,
                        speed: plan.speed,
                    },
                });
                next_id += 1;
            }
            t += gap;
            if slot < plan.routes as u64 {
                events.push(PlantedEvent {
                    id: next_id,
                    kind: EventKind::Route,
                    sprite: sprite(&mut rng),
                    trajectory: Trajectory {
                        start_frame: t,
                        ..route_tmpl.clone()
                    },
                });
                next_id += 1;
                t += route_len;
            }
        }

        // Remaining clutter moves through the lower band and right edge,
        // away from every route region, at any time.
        let lanes: [[(f64, f64); 2]; 6] = [
            [p(8.0, 200.0), p(248.0, 200.0)],
            [p(248.0, 232.0), p(8.0, 232.0)],
            [p(232.0, 8.0), p(232.0, 248.0)],
            [p(216.0, 248.0), p(216.0, 168.0)],
            [p(8.0, 248.0), p(120.0, 184.0)],
            [p(248.0, 184.0), p(140.0, 248.0)],
        ];
        for i in 0..plan.clutter - roi_clutter {
            let lane = lanes[i % lanes.len()];
            let tr = Trajectory {
                start_frame: 0,
                waypoints: lane.to_vec(),
                speed: plan.speed,
            };
            let latest = plan.frames.saturating_sub(tr.duration());
            let start = rng.gen_range(0..=latest);
            events.push(PlantedEvent {
                id: next_id,
                kind: EventKind::Elsewhere,
                sprite: sprite(&mut rng),
                trajectory: Trajectory {
                    start_frame: start,
                    ..tr
                },
            });
            next_id += 1;
        }
        events.sort_by_key(|e| (e.start_frame(), e.id));

        let (w, h) = (plan.width, plan.height);
        let mut background = vec![0u8; (w * h * 3) as usize];
        for y in 0..h {
            for x in 0..w {
                let base = 110.0
                    + 25.0 * (x as f64 / 23.0).sin() * (y as f64 / 31.0).cos()
                    + 8.0 * hash_noise(plan.seed, x as u64, y as u64, 0);
                let i = ((y * w + x) * 3) as usize;
                background[i] = clamp_u8(base + 10.0);
                background[i + 1] = clamp_u8(base);
                background[i + 2] = clamp_u8(base - 10.0);
            }
        }
        Ok(CctvCorpus {
            plan,
            events,
            rois,
            legs,
            background,
        })
    }

    pub fn routes(&self) -> impl Iterator<Item = &PlantedEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Route)
    }

    /// Inclusive document ranges of the planted routes.
    pub fn route_documents(&self) -> Vec<(u32, u32)> {
        self.routes()
            .map(|e| e.documents(self.plan.frames_per_document))
            .collect()
    }

    /// The route query: eastward, southward and westward motion in the three
    /// regions.
    pub fn route_query(&self) -> Query {
        let dirs = [Direction::East, Direction::South, Direction::West];
        let labels = ["east", "south", "west"];
        Query {
            version: QUERY_VERSION,
            components: self
                .rois
                .iter()
                .zip(dirs)
                .zip(labels)
                .map(|((roi, d), label)| ActionComponent {
                    roi: *roi,
                    constraints: Constraints {
                        motion: Some(MotionConstraint {
                            directions: vec![d],
                            coverage: None,
                        }),
                        ..Constraints::default()
                    },
                    label: Some(label.into()),
                })
                .collect(),
            weights: None,
            threshold: None,
            greedy_threshold: None,
            lambda: None,
            horizon: None,
            geometry: None,
        }
    }

    /// Start and end points of each route leg.
    pub fn legs(&self) -> &[[(f64, f64); 2]; 3] {
        &self.legs
    }
}

impl Scene for CctvCorpus {
    fn dimensions(&self) -> (u32, u32) {
        (self.plan.width, self.plan.height)
    }

    fn frame_count(&self) -> u64 {
        self.plan.frames
    }

    fn render(&self, index: u64) -> Frame {
        let (w, h) = (self.plan.width, self.plan.height);
        let mut pixels = self.background.clone();
        if self.plan.noise > 0.0 {
            for (i, p) in pixels.iter_mut().enumerate() {
                let n = hash_noise(self.plan.seed, index, i as u64, 2);
                *p = clamp_u8(*p as f64 + self.plan.noise * n);
            }
        }
        let mut frame = Frame::from_raw(w, h, pixels).expect("background has frame size");
        for e in &self.events {
            if let Some((x, y)) = e.trajectory.position(index) {
                e.sprite.draw(&mut frame, x, y);
            }
        }
        frame
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirborneScenePlan {
    pub width: u32,
    pub height: u32,
    pub frames: u64,
    pub frames_per_document: u32,
    /// Mover speed, pixels per frame.
    pub speed: f64,
    /// One-frame flicker patches per frame, on average.
    pub flicker_rate: f64,
    pub seed: u64,
}

impl Default for AirborneScenePlan {
    fn default() -> Self {
        AirborneScenePlan {
            width: 256,
            height: 256,
            frames: 180,
            frames_per_document: 15,
            speed: 4.0,
            flicker_rate: 0.5,
            seed: 11,
        }
    }
}

/// A rectangle whose brightness jumps for a single frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flicker {
    pub frame: u64,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub delta: f64,
}

impl Flicker {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && y >= self.y && x < self.x + self.w && y < self.y + self.h
    }
}

/// Aerial scene. Mover 0 flies the true route (east through region A, then
/// south through region B); movers 1 and 2 each cover one half of it at a
/// later time; movers 3 and 4 fly elsewhere, one of them on a curve.
#[derive(Clone, Debug)]
pub struct AirborneScene {
    pub plan: AirborneScenePlan,
    pub movers: Vec<PlantedEvent>,
    pub flickers: Vec<Flicker>,
    /// Region A then region B.
    pub rois: [Roi; 2],
    background: Vec<u8>,
}

impl AirborneScene {
    pub fn generate(plan: AirborneScenePlan) -> Result<AirborneScene> {
        if plan.width != 256 || plan.height != 256 {
            return Err(Error::Argument("the aerial scene is scripted for 256x256 frames".into()));
        }
        let a = plan.frames_per_document as u64;
        let v = plan.speed;
        let mover = |id: usize, rgb: [u8; 3], start: u64, waypoints: Vec<(f64, f64)>| PlantedEvent {
            id,
            kind: if id == 0 {
                EventKind::Route
            } else {
                EventKind::Elsewhere
            },
            sprite: Sprite {
                width: 7,
                height: 7,
                rgb,
                texture: 0x51_7e00 + id as u64,
                contrast: 45.0,
            },
            trajectory: Trajectory {
                start_frame: start,
                waypoints,
                speed: v,
            },
        };
        let arc: Vec<(f64, f64)> = (0..=24)
            .map(|i| {
                let th = std::f64::consts::PI * (0.15 + 0.7 * i as f64 / 24.0);
                (150.0 + 70.0 * th.cos(), 230.0 - 70.0 * th.sin() * 0.6)
            })
            .collect();
        let movers = vec![
            mover(0, [240, 240, 60], a, vec![(20.0, 56.0), (136.0, 56.0), (136.0, 190.0)]),
            mover(1, [240, 60, 60], 6 * a, vec![(20.0, 56.0), (136.0, 56.0), (250.0, 56.0)]),
            mover(2, [60, 240, 240], 7 * a, vec![(136.0, 10.0), (136.0, 190.0)]),
            mover(3, [250, 250, 250], 0, vec![(10.0, 240.0), (240.0, 120.0)]),
            mover(4, [60, 60, 240], 2 * a, arc),
        ];
        let rois = [
            Roi { x: 32, y: 48, w: 80, h: 16 },
            Roi { x: 128, y: 80, w: 16, h: 96 },
        ];

        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        let mut flickers = Vec::new();
        for f in 0..plan.frames {
            let mut budget = plan.flicker_rate;
            while budget > 0.0 {
                if rng.gen::<f64>() < budget.min(1.0) {
                    let w = rng.gen_range(14..=28u32);
                    let h = rng.gen_range(14..=28u32);
                    let x = rng.gen_range(0..plan.width - w);
                    let y = rng.gen_range(0..plan.height - h);
                    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    flickers.push(Flicker {
                        frame: f,
                        x,
                        y,
                        w,
                        h,
                        delta: sign * rng.gen_range(35.0..60.0),
                    });
                }
                budget -= 1.0;
            }
        }

        let mut background = vec![0u8; (plan.width * plan.height * 3) as usize];
        for y in 0..plan.height {
            for x in 0..plan.width {
                let base = 100.0
                    + 6.0 * hash_noise(plan.seed, (x / 2) as u64, (y / 2) as u64, 5)
                    + 4.0 * (x as f64 / 17.0).sin();
                let i = ((y * plan.width + x) * 3) as usize;
                background[i] = clamp_u8(base - 5.0);
                background[i + 1] = clamp_u8(base + 5.0);
                background[i + 2] = clamp_u8(base - 10.0);
            }
        }
        Ok(AirborneScene {
            plan,
            movers,
            flickers,
            rois,
            background,
        })
    }

    /// Whether `(x, y)` at `frame` lies on a mover, with `margin` pixels slack.
    pub fn near_mover(&self, frame: u64, x: f64, y: f64, margin: f64) -> bool {
        self.movers.iter().any(|m| {
            m.trajectory.position(frame).is_some_and(|(mx, my)| {
                let half = m.sprite.width.max(m.sprite.height) as f64 / 2.0 + margin;
                (x - mx).abs() <= half && (y - my).abs() <= half
            })
        })
    }

    /// Documents the true route spends in region A and region B.
    pub fn route_documents(&self) -> (u32, u32) {
        self.movers[0].documents(self.plan.frames_per_document)
    }

    /// East through region A, then south through region B.
    pub fn route_query(&self) -> Query {
        let v = self.plan.speed;
        let component = |roi: Roi, dx: f64, dy: f64| ActionComponent {
            roi,
            constraints: Constraints {
                displacement: Some(DisplacementConstraint { dx, dy }),
                ..Constraints::default()
            },
            label: None,
        };
        Query {
            version: QUERY_VERSION,
            components: vec![component(self.rois[0], v, 0.0), component(self.rois[1], 0.0, v)],
            weights: None,
            threshold: None,
            greedy_threshold: None,
            lambda: None,
            horizon: None,
            geometry: None,
        }
    }
}

impl Scene for AirborneScene {
    fn dimensions(&self) -> (u32, u32) {
        (self.plan.width, self.plan.height)
    }

    fn frame_count(&self) -> u64 {
        self.plan.frames
    }

    fn render(&self, index: u64) -> Frame {
        let (w, h) = (self.plan.width, self.plan.height);
        let mut pixels = self.background.clone();
        for fl in self.flickers.iter().filter(|f| f.frame == index) {
            for y in fl.y..fl.y + fl.h {
                for x in fl.x..fl.x + fl.w {
                    let i = ((y * w + x) * 3) as usize;
                    for c in 0..3 {
                        pixels[i + c] = clamp_u8(pixels[i + c] as f64 + fl.delta);
                    }
                }
            }
        }
        let mut frame = Frame::from_raw(w, h, pixels).expect("background has frame size");
        for m in &self.movers {
            if let Some((x, y)) = m.trajectory.position(index) {
                m.sprite.draw(&mut frame, x, y);
            }
        }
        frame
    }
}
