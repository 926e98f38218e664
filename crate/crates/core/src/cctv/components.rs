use super::ActivityMask;

/// One 8-connected foreground body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Blob {
    pub label: u32,
    /// Row-major pixel indices, ascending.
    pub pixels: Vec<u32>,
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
}

impl Blob {
    pub fn size(&self) -> usize {
        self.pixels.len()
    }
}

/// Label image plus the blobs it refers to. Label 0 is background; blob
/// `i` carries label `i + 1`.
#[derive(Clone, Debug)]
pub struct Labeling {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    pub blobs: Vec<Blob>,
}

impl Labeling {
    pub fn blob_at(&self, x: u32, y: u32) -> Option<&Blob> {
        match self.labels[y as usize * self.width as usize + x as usize] {
            0 => None,
            l => self.blobs.get(l as usize - 1),
        }
    }
}

/// 8-connected components, numbered in row-major order of their first pixel.
pub fn connected_components(mask: &ActivityMask) -> Labeling {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut labels = vec![0u32; mask.active.len()];
    let mut blobs = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.active.len() {
        if !mask.active[start] || labels[start] != 0 {
            continue;
        }
        let label = blobs.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(p) = stack.pop() {
            pixels.push(p as u32);
            let (x, y) = ((p as i64) % w, (p as i64) / w);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let n = (ny * w + nx) as usize;
                    if mask.active[n] && labels[n] == 0 {
                        labels[n] = label;
                        stack.push(n);
                    }
                }
            }
        }
        pixels.sort_unstable();
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (u32::MAX, u32::MAX, 0, 0);
        for &p in &pixels {
            let (x, y) = (p % mask.width, p / mask.width);
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        blobs.push(Blob {
            label,
            pixels,
            min_x,
            min_y,
            max_x,
            max_y,
        });
    }
    Labeling {
        width: mask.width,
        height: mask.height,
        labels,
        blobs,
    }
}
