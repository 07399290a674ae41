//! Pixel-level image operations on RGB rasters with values in `[0, 1]`.
//!
//! All operations return a new raster and leave clamping to the caller unless
//! noted.

use crate::classifier::Raster;

const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

fn luma(im: &Raster, y: usize, x: usize) -> f32 {
    (0..3).map(|c| LUMA[c] * im.get(y, x, c)).sum()
}

/// Apply the inverse affine map `src = A·(dst − centre) + centre + offset`
/// with bilinear sampling; uncovered pixels become `fill`.
fn warp(im: &Raster, a: [[f32; 2]; 2], offset: [f32; 2], fill: f32) -> Raster {
    let (h, w, ch) = (im.height(), im.width(), im.channels());
    let cy = (h as f32 - 1.0) / 2.0;
    let cx = (w as f32 - 1.0) / 2.0;
    let mut out = Raster::zeros(h, w, ch);
    for y in 0..h {
        for x in 0..w {
            let dy = y as f32 - cy;
            let dx = x as f32 - cx;
            let sy = a[0][0] * dy + a[0][1] * dx + cy + offset[0];
            let sx = a[1][0] * dy + a[1][1] * dx + cx + offset[1];
            for c in 0..ch {
                out.set(y, x, c, im.sample_bilinear(sy, sx, c, fill));
            }
        }
    }
    out
}

/// Rotate about the centre by `degrees` (counter-clockwise on screen); black fill.
pub fn rotate(im: &Raster, degrees: f32) -> Raster {
    if degrees == 0.0 {
        return im.clone();
    }
    let (s, c) = degrees.to_radians().sin_cos();
    // inverse rotation in (row, col) coordinates
    warp(im, [[c, s], [-s, c]], [0.0, 0.0], 0.0)
}

/// Shift by fractions of the width (`tx`) and height (`ty`); black fill.
pub fn translate(im: &Raster, tx: f32, ty: f32) -> Raster {
    if tx == 0.0 && ty == 0.0 {
        return im.clone();
    }
    let oy = -ty * im.height() as f32;
    let ox = -tx * im.width() as f32;
    warp(im, [[1.0, 0.0], [0.0, 1.0]], [oy, ox], 0.0)
}

/// Horizontal shear `x' = x + factor·(y − cy)`; black fill.
pub fn shear(im: &Raster, factor: f32) -> Raster {
    warp(im, [[1.0, 0.0], [-factor, 1.0]], [0.0, 0.0], 0.0)
}

/// Multiply every channel by `factor`.
pub fn brightness(im: &Raster, factor: f32) -> Raster {
    let mut out = im.clone();
    for v in out.data_mut() {
        *v *= factor;
    }
    out
}

/// Blend towards (factor < 1) or away from (factor > 1) the grayscale image.
pub fn saturation(im: &Raster, factor: f32) -> Raster {
    let mut out = im.clone();
    for y in 0..im.height() {
        for x in 0..im.width() {
            let g = luma(im, y, x);
            for c in 0..3 {
                out.set(y, x, c, g + factor * (im.get(y, x, c) - g));
            }
        }
    }
    out
}

/// Blend with a 3×3 smoothed copy (centre weight 5, border pixels kept):
/// factor < 1 blurs, factor > 1 sharpens.
pub fn sharpness(im: &Raster, factor: f32) -> Raster {
    let (h, w, ch) = (im.height(), im.width(), im.channels());
    let mut out = im.clone();
    if h < 3 || w < 3 {
        return out;
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            for c in 0..ch {
                let mut acc = 4.0 * im.get(y, x, c);
                for dy in 0..3 {
                    for dx in 0..3 {
                        acc += im.get(y + dy - 1, x + dx - 1, c);
                    }
                }
                let smooth = acc / 13.0;
                out.set(y, x, c, smooth + factor * (im.get(y, x, c) - smooth));
            }
        }
    }
    out
}

/// Stretch each channel so its minimum maps to 0 and maximum to 1.
pub fn auto_contrast(im: &Raster) -> Raster {
    let ch = im.channels();
    let mut lo = vec![f32::INFINITY; ch];
    let mut hi = vec![f32::NEG_INFINITY; ch];
    for px in im.data().chunks_exact(ch) {
        for c in 0..ch {
            lo[c] = lo[c].min(px[c]);
            hi[c] = hi[c].max(px[c]);
        }
    }
    let mut out = im.clone();
    for px in out.data_mut().chunks_exact_mut(ch) {
        for c in 0..ch {
            if hi[c] > lo[c] {
                px[c] = (px[c] - lo[c]) / (hi[c] - lo[c]);
            }
        }
    }
    out
}

/// Per-channel histogram equalization over 256 levels.
pub fn equalize(im: &Raster) -> Raster {
    let ch = im.channels();
    let n = im.height() * im.width();
    let mut out = im.clone();
    for c in 0..ch {
        let level = |v: f32| ((v.clamp(0.0, 1.0) * 255.0).round() as usize).min(255);
        let mut hist = [0usize; 256];
        for px in im.data().chunks_exact(ch) {
            hist[level(px[c])] += 1;
        }
        let mut cdf = [0usize; 256];
        let mut run = 0;
        for (i, &h) in hist.iter().enumerate() {
            run += h;
            cdf[i] = run;
        }
        let cdf_min = cdf.iter().copied().find(|&v| v > 0).unwrap_or(0);
        if n == cdf_min {
            continue;
        }
        let denom = (n - cdf_min) as f32;
        for px in out.data_mut().chunks_exact_mut(ch) {
            let l = level(px[c]);
            px[c] = (cdf[l] - cdf_min) as f32 / denom;
        }
    }
    out
}

/// Fill a `side×side` square with top-left corner `(top, left)` with mid gray.
pub fn cutout(im: &Raster, top: usize, left: usize, side: usize) -> Raster {
    let mut out = im.clone();
    for y in top..(top + side).min(im.height()) {
        for x in left..(left + side).min(im.width()) {
            for c in 0..im.channels() {
                out.set(y, x, c, 0.5);
            }
        }
    }
    out
}

/// Warm (factor > 1) or cool (factor < 1) the image by scaling red up and blue down.
pub fn color_temperature(im: &Raster, factor: f32) -> Raster {
    let mut out = im.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        px[0] *= factor;
        px[2] /= factor;
    }
    out
}
