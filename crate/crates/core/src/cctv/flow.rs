//! Horn–Schunck dense optical flow with Jacobi iterations.

use crate::error::{Error, Result};
use crate::frame::GrayFrame;

/// Per-pixel flow in pixels/frame, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub width: u32,
    pub height: u32,
    pub dx: Vec<f32>,
    pub dy: Vec<f32>,
}

impl FlowField {
    pub fn zero(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        FlowField {
            width,
            height,
            dx: vec![0.0; n],
            dy: vec![0.0; n],
        }
    }

    pub fn at(&self, x: u32, y: u32) -> (f32, f32) {
        let i = y as usize * self.width as usize + x as usize;
        (self.dx[i], self.dy[i])
    }
}

/// Flow from `prev` to `next`. `smoothness` is the regularization weight
/// (its square enters the update denominator); intensities are in gray levels.
pub fn horn_schunck(
    prev: &GrayFrame,
    next: &GrayFrame,
    smoothness: f32,
    iterations: u32,
) -> Result<FlowField> {
    prev.same_size(next)?;
    if iterations == 0 {
        return Err(Error::Argument("flow needs at least one iteration".into()));
    }
    let (w, h) = (prev.width as usize, prev.height as usize);
    let (ex, ey, et) = derivatives(prev, next);
    let alpha2 = smoothness * smoothness;
    let denom: Vec<f32> = ex
        .iter()
        .zip(&ey)
        .map(|(x, y)| 1.0 / (alpha2 + x * x + y * y))
        .collect();

    // Padded by one pixel on every side; the border replicates the edge.
    let pw = w + 2;
    let mut u = vec![0.0f32; pw * (h + 2)];
    let mut v = vec![0.0f32; pw * (h + 2)];
    let mut u_next = u.clone();
    let mut v_next = v.clone();
    for _ in 0..iterations {
        replicate_border(&mut u, w, h);
        replicate_border(&mut v, w, h);
        for y in 0..h {
            let row = (y + 1) * pw;
            for x in 0..w {
                let c = row + x + 1;
                let ub = local_average(&u, c, pw);
                let vb = local_average(&v, c, pw);
                let i = y * w + x;
                let t = (ex[i] * ub + ey[i] * vb + et[i]) * denom[i];
                u_next[c] = ub - ex[i] * t;
                v_next[c] = vb - ey[i] * t;
            }
        }
        std::mem::swap(&mut u, &mut u_next);
        std::mem::swap(&mut v, &mut v_next);
    }

    let mut out = FlowField::zero(prev.width, prev.height);
    for y in 0..h {
        let row = (y + 1) * pw + 1;
        out.dx[y * w..(y + 1) * w].copy_from_slice(&u[row..row + w]);
        out.dy[y * w..(y + 1) * w].copy_from_slice(&v[row..row + w]);
    }
    Ok(out)
}

#[inline(always)]
fn local_average(f: &[f32], c: usize, pw: usize) -> f32 {
    let edge = f[c - 1] + f[c + 1] + f[c - pw] + f[c + pw];
    let corner = f[c - pw - 1] + f[c - pw + 1] + f[c + pw - 1] + f[c + pw + 1];
    edge / 6.0 + corner / 12.0
}

fn replicate_border(f: &mut [f32], w: usize, h: usize) {
    let pw = w + 2;
    for y in 1..=h {
        f[y * pw] = f[y * pw + 1];
        f[y * pw + w + 1] = f[y * pw + w];
    }
    let (top, rest) = f.split_at_mut(pw);
    top.copy_from_slice(&rest[..pw]);
    let last = (h + 1) * pw;
    let (body, bottom) = f.split_at_mut(last);
    bottom.copy_from_slice(&body[last - pw..]);
}

/// First differences averaged over the 2×2×2 cube, clamped at the border.
fn derivatives(a: &GrayFrame, b: &GrayFrame) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let (w, h) = (a.width as usize, a.height as usize);
    let n = w * h;
    let (mut ex, mut ey, mut et) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for y in 0..h {
        let y1 = (y + 1).min(h - 1);
        for x in 0..w {
            let x1 = (x + 1).min(w - 1);
            let p = |f: &GrayFrame, xx: usize, yy: usize| f.data[yy * w + xx];
            let (a00, a10, a01, a11) = (p(a, x, y), p(a, x1, y), p(a, x, y1), p(a, x1, y1));
            let (b00, b10, b01, b11) = (p(b, x, y), p(b, x1, y), p(b, x, y1), p(b, x1, y1));
            let i = y * w + x;
            ex[i] = 0.25 * ((a10 - a00) + (a11 - a01) + (b10 - b00) + (b11 - b01));
            ey[i] = 0.25 * ((a01 - a00) + (a11 - a10) + (b01 - b00) + (b11 - b10));
            et[i] = 0.25 * ((b00 - a00) + (b10 - a10) + (b01 - a01) + (b11 - a11));
        }
    }
    (ex, ey, et)
}
