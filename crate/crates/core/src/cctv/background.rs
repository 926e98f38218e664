use crate::error::{Error, Result};
use crate::frame::Frame;

/// Per-pixel binary foreground flags, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivityMask {
    pub width: u32,
    pub height: u32,
    pub active: Vec<bool>,
}

impl ActivityMask {
    pub fn empty(width: u32, height: u32) -> Self {
        ActivityMask {
            width,
            height,
            active: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut m = ActivityMask::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                m.active[(y * width + x) as usize] = f(x, y);
            }
        }
        m
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.active[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Running-average background with a fixed learning rate.
#[derive(Clone, Debug)]
pub struct BackgroundModel {
    width: u32,
    height: u32,
    /// Interleaved RGB estimate.
    background: Vec<f32>,
    learning_rate: f32,
    threshold: f32,
}

/// Per-pixel, per-channel median of the first frames.
pub fn init_background(
    frames: &[Frame],
    learning_rate: f32,
    threshold: f32,
) -> Result<BackgroundModel> {
    let first = frames.first().ok_or(Error::Empty("background init frames"))?;
    for f in frames {
        first.same_size(f)?;
    }
    if !(learning_rate > 0.0 && learning_rate < 1.0) {
        return Err(Error::Argument(format!(
            "learning rate {learning_rate} outside (0, 1)"
        )));
    }
    let n = frames.len();
    let mut column = vec![0u8; n];
    let background = (0..first.pixels.len())
        .map(|i| {
            for (slot, f) in column.iter_mut().zip(frames) {
                *slot = f.pixels[i];
            }
            median_u8(&mut column)
        })
        .collect();
    Ok(BackgroundModel {
        width: first.width,
        height: first.height,
        background,
        learning_rate,
        threshold,
    })
}

pub(crate) fn median_u8(values: &mut [u8]) -> f32 {
    let mid = values.len() / 2;
    let odd = values.len() % 2 == 1;
    let (lower, upper, _) = values.select_nth_unstable(mid);
    let upper = *upper as f32;
    if odd {
        upper
    } else {
        let below = *lower.iter().max().unwrap() as f32;
        (below + upper) / 2.0
    }
}

impl BackgroundModel {
    pub fn from_frame(frame: &Frame, learning_rate: f32, threshold: f32) -> Self {
        BackgroundModel {
            width: frame.width,
            height: frame.height,
            background: frame.pixels.iter().map(|&p| p as f32).collect(),
            learning_rate,
            threshold,
        }
    }

    /// Wraps an interleaved RGB estimate computed elsewhere.
    pub fn from_estimate(
        width: u32,
        height: u32,
        background: Vec<f32>,
        learning_rate: f32,
        threshold: f32,
    ) -> Result<Self> {
        if background.len() != width as usize * height as usize * 3 {
            return Err(Error::Frames(format!(
                "background estimate has {} values for {width}x{height}",
                background.len()
            )));
        }
        Ok(BackgroundModel {
            width,
            height,
            background,
            learning_rate,
            threshold,
        })
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn learning_rate(&self) -> f32 {
        self.learning_rate
    }

    pub fn threshold(&self) -> f32 {
        self.threshold
    }

    /// Background RGB estimate at a pixel.
    pub fn at(&self, x: u32, y: u32) -> [f32; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [
            self.background[i],
            self.background[i + 1],
            self.background[i + 2],
        ]
    }

    /// Thresholds the max-channel difference, then blends the frame into
    /// the background on inactive pixels only.
    pub fn subtract(&mut self, frame: &Frame) -> Result<ActivityMask> {
        if frame.width != self.width || frame.height != self.height {
            return Err(Error::dimension(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", frame.width, frame.height),
            ));
        }
        let alpha = self.learning_rate;
        let mut active = Vec::with_capacity(frame.pixel_count());
        for (bg, px) in self
            .background
            .chunks_exact_mut(3)
            .zip(frame.pixels.chunks_exact(3))
        {
            let diff = (0..3)
                .map(|c| (px[c] as f32 - bg[c]).abs())
                .fold(0.0f32, f32::max);
            let is_active = diff > self.threshold;
            if !is_active {
                for c in 0..3 {
                    bg[c] = (1.0 - alpha) * bg[c] + alpha * px[c] as f32;
                }
            }
            active.push(is_active);
        }
        Ok(ActivityMask {
            width: self.width,
            height: self.height,
            active,
        })
    }
}

/// Per-pixel count of consecutive active frames.
#[derive(Clone, Debug)]
pub struct PersistenceAccumulator {
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u32>,
}

impl PersistenceAccumulator {
    pub fn new(width: u32, height: u32) -> Self {
        PersistenceAccumulator {
            width,
            height,
            counts: vec![0; width as usize * height as usize],
        }
    }

    pub fn update(&mut self, mask: &ActivityMask) -> Result<()> {
        if mask.active.len() != self.counts.len() {
            return Err(Error::dimension(self.counts.len(), mask.active.len()));
        }
        for (c, &a) in self.counts.iter_mut().zip(&mask.active) {
            *c = if a { *c + 1 } else { 0 };
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(v: u8) -> Frame {
        Frame::filled(4, 3, [v, v, v])
    }

    #[test]
    fn median_of_identical_frames_is_the_frame() {
        let mut f = Frame::new(6, 5);
        for (i, p) in f.pixels.iter_mut().enumerate() {
            *p = (i * 7 % 256) as u8;
        }
        let frames = vec![f.clone(); 500];
        let bg = init_background(&frames, 0.05, 20.0).unwrap();
        for y in 0..5 {
            for x in 0..6 {
                let rgb = f.rgb(x, y);
                assert_eq!(bg.at(x, y), rgb.map(|c| c as f32));
            }
        }
    }

    #[test]
    fn median_of_three_and_five() {
        let bg = init_background(&[gray(10), gray(200), gray(12)], 0.05, 20.0).unwrap();
        assert_eq!(bg.at(0, 0), [12.0; 3]);

        let values = [0u8, 0, 255, 255, 255];
        let mut reference = values.to_vec();
        reference.sort();
        let frames: Vec<Frame> = values.iter().map(|&v| gray(v)).collect();
        let bg = init_background(&frames, 0.05, 20.0).unwrap();
        assert_eq!(bg.at(2, 1), [reference[2] as f32; 3]);
    }

    #[test]
    fn empty_and_mismatched_init_rejected() {
        assert!(init_background(&[], 0.05, 20.0).is_err());
        let f = Frame::new(4, 4);
        let g = Frame::new(4, 5);
        assert!(init_background(&[f, g], 0.05, 20.0).is_err());
    }

    #[test]
    fn identical_frame_gives_empty_mask() {
        let f = gray(90);
        let mut bg = BackgroundModel::from_frame(&f, 0.05, 20.0);
        assert_eq!(bg.subtract(&f).unwrap().count(), 0);
    }

    #[test]
    fn brightened_pixel_is_the_only_active_one() {
        let f = gray(90);
        let mut bg = BackgroundModel::from_frame(&f, 0.05, 20.0);
        let mut g = f.clone();
        g.set_rgb(2, 1, [130, 90, 90]);
        let mask = bg.subtract(&g).unwrap();
        assert_eq!(mask.count(), 1);
        assert!(mask.get(2, 1));
        // Active pixels do not update the background.
        assert_eq!(bg.at(2, 1), [90.0; 3]);
    }

    #[test]
    fn slow_illumination_drift_is_absorbed() {
        // Oracle: simulate the running average in f64 and check that the
        // frame-to-background difference never exceeds the threshold.
        let (alpha, theta) = (0.05f64, 20.0f64);
        let mut reference_bg = 100.0;
        for n in 1..=100 {
            let diff = (100 + n) as f64 - reference_bg;
            assert!(diff <= theta);
            reference_bg += alpha * diff;
        }

        let mut bg = BackgroundModel::from_frame(&gray(100), alpha as f32, theta as f32);
        for n in 1..=100u32 {
            let mask = bg.subtract(&gray(100 + n as u8)).unwrap();
            assert_eq!(mask.count(), 0, "frame {n}");
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut bg = BackgroundModel::from_frame(&gray(1), 0.05, 20.0);
        assert!(bg.subtract(&Frame::new(5, 3)).is_err());
    }

    #[test]
    fn persistence_counts_and_resets() {
        let mut acc = PersistenceAccumulator::new(2, 1);
        let on = ActivityMask::from_fn(2, 1, |x, _| x == 0);
        let off = ActivityMask::empty(2, 1);
        let mut last = 0;
        for _ in 0..5 {
            acc.update(&on).unwrap();
            assert!(acc.counts[0] >= last);
            last = acc.counts[0];
        }
        assert_eq!(acc.counts, vec![5, 0]);
        acc.update(&off).unwrap();
        assert_eq!(acc.counts, vec![0, 0]);
    }
}
