use crate::feature::{HUE_BINS, LIGHTNESS_BINS, SATURATION_BINS};

/// RGB to HSL: hue in degrees `[0, 360)`, saturation and lightness in `[0, 1]`.
pub fn rgb_to_hsl(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let l = (max + min) / 2.0;
    let d = max - min;
    if d == 0.0 {
        return (0.0, 0.0, l);
    }
    let s = d / (1.0 - (2.0 * l - 1.0).abs());
    let h = if max == r {
        60.0 * ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    (h.rem_euclid(360.0), s.min(1.0), l)
}

/// Bin indices into the 16-bin histogram: hue (centered 45° sectors, bin 0
/// at 0°), then saturation and lightness quartiles.
pub fn color_bins(rgb: [u8; 3]) -> [usize; 3] {
    let (h, s, l) = rgb_to_hsl(rgb);
    let hue = (h / (360.0 / HUE_BINS as f64)).round() as usize % HUE_BINS;
    let sat = ((s * SATURATION_BINS as f64) as usize).min(SATURATION_BINS - 1);
    let light = ((l * LIGHTNESS_BINS as f64) as usize).min(LIGHTNESS_BINS - 1);
    [hue, HUE_BINS + sat, HUE_BINS + SATURATION_BINS + light]
}
