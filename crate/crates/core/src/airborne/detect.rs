//! Moving-object candidates from frame differencing.

use crate::cctv::{connected_components, ActivityMask, Blob};
use crate::error::Result;
use crate::frame::{Frame, GrayFrame};

/// One detected body: centroid, binary shape inside its bounding box, pixel
/// count and the RGB samples of its pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionCandidate {
    pub x: f64,
    pub y: f64,
    pub min_x: u32,
    pub min_y: u32,
    pub width: u32,
    pub height: u32,
    /// Row-major over the bounding box.
    pub shape: Vec<bool>,
    pub size: usize,
    pub colors: Vec<[u8; 3]>,
}

impl DetectionCandidate {
    /// Candidate from a pixel list; colors are sampled from `frame` when given.
    pub fn from_pixels(pixels: &[(u32, u32)], frame: Option<&Frame>) -> DetectionCandidate {
        assert!(!pixels.is_empty(), "a candidate needs pixels");
        let min_x = pixels.iter().map(|p| p.0).min().unwrap();
        let max_x = pixels.iter().map(|p| p.0).max().unwrap();
        let min_y = pixels.iter().map(|p| p.1).min().unwrap();
        let max_y = pixels.iter().map(|p| p.1).max().unwrap();
        let (width, height) = (max_x - min_x + 1, max_y - min_y + 1);
        let mut shape = vec![false; (width * height) as usize];
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(x, y) in pixels {
            shape[((y - min_y) * width + (x - min_x)) as usize] = true;
            sx += x as f64;
            sy += y as f64;
        }
        let n = pixels.len() as f64;
        let colors = frame
            .map(|f| pixels.iter().map(|&(x, y)| f.rgb(x, y)).collect())
            .unwrap_or_default();
        DetectionCandidate {
            x: sx / n,
            y: sy / n,
            min_x,
            min_y,
            width,
            height,
            size: shape.iter().filter(|&&s| s).count(),
            shape,
            colors,
        }
    }

    pub fn covers(&self, x: i64, y: i64) -> bool {
        let (lx, ly) = (x - self.min_x as i64, y - self.min_y as i64);
        lx >= 0
            && ly >= 0
            && lx < self.width as i64
            && ly < self.height as i64
            && self.shape[(ly * self.width as i64 + lx) as usize]
    }
}

/// Pixels whose gray level changed by more than `threshold`.
pub fn difference_mask(a: &GrayFrame, b: &GrayFrame, threshold: f32) -> Result<ActivityMask> {
    a.same_size(b)?;
    Ok(ActivityMask::from_fn(a.width, a.height, |x, y| {
        (b.at(x, y) - a.at(x, y)).abs() > threshold
    }))
}

/// Morphological opening with a 3×3 square; pixels outside the frame count
/// as background.
pub fn open3x3(mask: &ActivityMask) -> ActivityMask {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let at = |m: &ActivityMask, x: i64, y: i64| {
        x >= 0 && y >= 0 && x < w && y < h && m.get(x as u32, y as u32)
    };
    let eroded = ActivityMask::from_fn(mask.width, mask.height, |x, y| {
        let (x, y) = (x as i64, y as i64);
        (-1..=1).all(|dy| (-1..=1).all(|dx| at(mask, x + dx, y + dy)))
    });
    ActivityMask::from_fn(mask.width, mask.height, |x, y| {
        let (x, y) = (x as i64, y as i64);
        (-1..=1).any(|dy| (-1..=1).any(|dx| at(&eroded, x + dx, y + dy)))
    })
}

/// Every 8-connected body of the opened difference image, before size filtering.
pub fn detect_bodies(a: &Frame, b: &Frame, threshold: f32) -> Result<Vec<DetectionCandidate>> {
    a.same_size(b)?;
    let mask = open3x3(&difference_mask(&a.to_gray(), &b.to_gray(), threshold)?);
    let labeling = connected_components(&mask);
    Ok(labeling
        .blobs
        .iter()
        .map(|blob: &Blob| {
            let pixels: Vec<(u32, u32)> = blob
                .pixels
                .iter()
                .map(|&i| (i % mask.width, i / mask.width))
                .collect();
            DetectionCandidate::from_pixels(&pixels, Some(b))
        })
        .collect())
}

/// Drops every body larger than `max_size` pixels.
pub fn size_filter(bodies: Vec<DetectionCandidate>, max_size: usize) -> Vec<DetectionCandidate> {
    bodies.into_iter().filter(|c| c.size <= max_size).collect()
}

pub fn detect_candidates(
    a: &Frame,
    b: &Frame,
    threshold: f32,
    max_size: usize,
) -> Result<Vec<DetectionCandidate>> {
    Ok(size_filter(detect_bodies(a, b, threshold)?, max_size))
}
