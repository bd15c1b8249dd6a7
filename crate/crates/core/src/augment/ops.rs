use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AugmentError, ImageBuffer, CHANNELS};

pub const MAX_MAGNITUDE: u32 = 30;

/// Gray used for pixels uncovered by rotate, shear and translate.
pub const FILL_VALUE: u8 = 128;

const MAX_ROTATE_DEG: f64 = 30.0;
const MAX_SHEAR: f64 = 0.3;
const MAX_TRANSLATE_FRAC: f64 = 0.45;
const MAX_ENHANCE_DELTA: f64 = 0.9;
const MAX_SOLARIZE_ADD: f64 = 110.0;
const MAX_POSTERIZE_DROP: f64 = 4.0;

/// The 16 pool members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformOp {
    Identity,
    AutoContrast,
    Equalize,
    Invert,
    Rotate,
    Solarize,
    SolarizeAdd,
    Color,
    Posterize,
    Contrast,
    Brightness,
    Sharpness,
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
}

impl TransformOp {
    pub const ALL: [TransformOp; 16] = [
        TransformOp::Identity,
        TransformOp::AutoContrast,
        TransformOp::Equalize,
        TransformOp::Invert,
        TransformOp::Rotate,
        TransformOp::Solarize,
        TransformOp::SolarizeAdd,
        TransformOp::Color,
        TransformOp::Posterize,
        TransformOp::Contrast,
        TransformOp::Brightness,
        TransformOp::Sharpness,
        TransformOp::ShearX,
        TransformOp::ShearY,
        TransformOp::TranslateX,
        TransformOp::TranslateY,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformOp::Identity => "identity",
            TransformOp::AutoContrast => "auto-contrast",
            TransformOp::Equalize => "equalize",
            TransformOp::Invert => "invert",
            TransformOp::Rotate => "rotate",
            TransformOp::Solarize => "solarize",
            TransformOp::SolarizeAdd => "solarize-add",
            TransformOp::Color => "color",
            TransformOp::Posterize => "posterize",
            TransformOp::Contrast => "contrast",
            TransformOp::Brightness => "brightness",
            TransformOp::Sharpness => "sharpness",
            TransformOp::ShearX => "shear-x",
            TransformOp::ShearY => "shear-y",
            TransformOp::TranslateX => "translate-x",
            TransformOp::TranslateY => "translate-y",
        }
    }

    /// Whether the op's strength depends on the magnitude.
    pub fn uses_magnitude(self) -> bool {
        !matches!(
            self,
            TransformOp::Identity | TransformOp::AutoContrast | TransformOp::Equalize | TransformOp::Invert
        )
    }

    /// Whether a random sign is drawn per application.
    pub fn is_signed(self) -> bool {
        matches!(
            self,
            TransformOp::Rotate
                | TransformOp::ShearX
                | TransformOp::ShearY
                | TransformOp::TranslateX
                | TransformOp::TranslateY
                | TransformOp::Color
                | TransformOp::Contrast
                | TransformOp::Brightness
                | TransformOp::Sharpness
        )
    }

    /// Unsigned strength of the op at `magnitude`, in the op's own units:
    /// degrees for rotate, shear factor, fraction of the image side for
    /// translate, enhancement delta from 1 for the blend ops, bits dropped
    /// for posterize, solarize threshold, and additive offset for
    /// solarize-add. `None` for ops without a magnitude.
    pub fn parameter(self, magnitude: u32) -> Option<f64> {
        let level = magnitude as f64 / MAX_MAGNITUDE as f64;
        Some(match self {
            TransformOp::Rotate => level * MAX_ROTATE_DEG,
            TransformOp::ShearX | TransformOp::ShearY => level * MAX_SHEAR,
            TransformOp::TranslateX | TransformOp::TranslateY => level * MAX_TRANSLATE_FRAC,
            TransformOp::Color | TransformOp::Contrast | TransformOp::Brightness | TransformOp::Sharpness => {
                level * MAX_ENHANCE_DELTA
            }
            TransformOp::Posterize => (level * MAX_POSTERIZE_DROP).round(),
            TransformOp::Solarize => 256.0 - (level * 256.0).round(),
            TransformOp::SolarizeAdd => (level * MAX_SOLARIZE_ADD).round(),
            _ => return None,
        })
    }
}

impl fmt::Display for TransformOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformOp {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self, AugmentError> {
        TransformOp::ALL.into_iter().find(|op| op.name() == s).ok_or_else(|| AugmentError::UnknownOp(s.into()))
    }
}

/// Applies `op` at `magnitude`. Signed ops draw their sign from `rng`; other
/// ops leave the rng untouched.
pub fn apply_transform<R: Rng + ?Sized>(
    image: &ImageBuffer,
    op: TransformOp,
    magnitude: u32,
    rng: &mut R,
) -> Result<ImageBuffer, AugmentError> {
    if magnitude > MAX_MAGNITUDE {
        return Err(AugmentError::Magnitude(magnitude));
    }
    let sign = if op.is_signed() { if rng.random::<bool>() { 1.0 } else { -1.0 } } else { 1.0 };
    let param = op.parameter(magnitude).unwrap_or(0.0);
    let (h, w) = (image.height() as f64, image.width() as f64);
    Ok(match op {
        TransformOp::Identity => image.clone(),
        TransformOp::AutoContrast => auto_contrast(image),
        TransformOp::Equalize => equalize(image),
        TransformOp::Invert => map_samples(image, |v| 255 - v),
        TransformOp::Solarize => {
            let threshold = param as u32;
            map_samples(image, |v| if v as u32 >= threshold { 255 - v } else { v })
        }
        TransformOp::SolarizeAdd => {
            let add = param as u32;
            map_samples(image, |v| if v < 128 { (v as u32 + add).min(255) as u8 } else { v })
        }
        TransformOp::Posterize => {
            let mask = (0xFFu32 << param as u32) as u8;
            map_samples(image, |v| v & mask)
        }
        TransformOp::Color => {
            let gray = grayscale(image);
            blend(image, 1.0 + sign * param, |i, _| gray[i / CHANNELS])
        }
        TransformOp::Contrast => {
            let gray = grayscale(image);
            let mean = (gray.iter().sum::<f64>() / gray.len() as f64).round();
            blend(image, 1.0 + sign * param, |_, _| mean)
        }
        TransformOp::Brightness => blend(image, 1.0 + sign * param, |_, _| 0.0),
        TransformOp::Sharpness => {
            let smooth = smoothed(image);
            blend(image, 1.0 + sign * param, |i, _| smooth[i])
        }
        TransformOp::Rotate => {
            let theta = (sign * param).to_radians();
            let (s, c) = theta.sin_cos();
            // inverse rotation about the image center
            warp_affine(image, [c, s, -s, c])
        }
        TransformOp::ShearX => warp_affine(image, [1.0, sign * param, 0.0, 1.0]),
        TransformOp::ShearY => warp_affine(image, [1.0, 0.0, sign * param, 1.0]),
        TransformOp::TranslateX => translate(image, sign * param * w, 0.0),
        TransformOp::TranslateY => translate(image, 0.0, sign * param * h),
    })
}

fn map_samples(image: &ImageBuffer, f: impl Fn(u8) -> u8) -> ImageBuffer {
    ImageBuffer::new(image.height(), image.width(), image.data().iter().map(|v| f(*v)).collect())
        .expect("same shape")
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// ITU-R 601-2 luma per pixel.
fn grayscale(image: &ImageBuffer) -> Vec<f64> {
    image
        .data()
        .chunks_exact(CHANNELS)
        .map(|p| (p[0] as f64 * 299.0 + p[1] as f64 * 587.0 + p[2] as f64 * 114.0) / 1000.0)
        .collect()
}

/// `degenerate + factor·(image − degenerate)`, sample-wise.
fn blend(image: &ImageBuffer, factor: f64, degenerate: impl Fn(usize, u8) -> f64) -> ImageBuffer {
    let data = image
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let d = degenerate(i, *v);
            to_u8(d + factor * (*v as f64 - d))
        })
        .collect();
    ImageBuffer::new(image.height(), image.width(), data).expect("same shape")
}

/// 3x3 smoothing kernel `[1 1 1; 1 5 1; 1 1 1] / 13`; the one-pixel border keeps its values.
fn smoothed(image: &ImageBuffer) -> Vec<f64> {
    let (h, w) = (image.height() as usize, image.width() as usize);
    let src = image.data();
    let mut out: Vec<f64> = src.iter().map(|v| *v as f64).collect();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for dy in 0..3 {
                    for dx in 0..3 {
                        let weight = if dy == 1 && dx == 1 { 5.0 } else { 1.0 };
                        acc += weight * src[((y + dy - 1) * w + (x + dx - 1)) * CHANNELS + c] as f64;
                    }
                }
                out[(y * w + x) * CHANNELS + c] = (acc / 13.0).round();
            }
        }
    }
    out
}

fn auto_contrast(image: &ImageBuffer) -> ImageBuffer {
    let mut lo = [255u8; 3];
    let mut hi = [0u8; 3];
    for px in image.data().chunks_exact(CHANNELS) {
        for c in 0..CHANNELS {
            lo[c] = lo[c].min(px[c]);
            hi[c] = hi[c].max(px[c]);
        }
    }
    let data = image
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let c = i % CHANNELS;
            if hi[c] > lo[c] {
                to_u8((*v - lo[c]) as f64 * 255.0 / (hi[c] - lo[c]) as f64)
            } else {
                *v
            }
        })
        .collect();
    ImageBuffer::new(image.height(), image.width(), data).expect("same shape")
}

/// Per-channel histogram equalization with the usual lookup-table construction.
fn equalize(image: &ImageBuffer) -> ImageBuffer {
    let mut luts = [[0u8; 256]; 3];
    for (c, lut) in luts.iter_mut().enumerate() {
        let mut hist = [0u64; 256];
        for v in image.data().iter().skip(c).step_by(CHANNELS) {
            hist[*v as usize] += 1;
        }
        let used: Vec<u64> = hist.iter().copied().filter(|n| *n > 0).collect();
        let identity = |lut: &mut [u8; 256]| lut.iter_mut().enumerate().for_each(|(i, l)| *l = i as u8);
        if used.len() <= 1 {
            identity(lut);
            continue;
        }
        let step = (used.iter().sum::<u64>() - used[used.len() - 1]) / 255;
        if step == 0 {
            identity(lut);
            continue;
        }
        let mut n = step / 2;
        for (i, l) in lut.iter_mut().enumerate() {
            *l = (n / step).min(255) as u8;
            n += hist[i];
        }
    }
    let data = image.data().iter().enumerate().map(|(i, v)| luts[i % CHANNELS][*v as usize]).collect();
    ImageBuffer::new(image.height(), image.width(), data).expect("same shape")
}

/// Samples the source at `(sy, sx)` bilinearly; points outside the image take [`FILL_VALUE`].
fn sample(image: &ImageBuffer, sy: f64, sx: f64, out: &mut Vec<u8>) {
    let (h, w) = (image.height() as usize, image.width() as usize);
    const SLACK: f64 = 1e-9;
    if sy < -SLACK || sx < -SLACK || sy > (h - 1) as f64 + SLACK || sx > (w - 1) as f64 + SLACK {
        out.extend_from_slice(&[FILL_VALUE; CHANNELS]);
        return;
    }
    let sy = sy.clamp(0.0, (h - 1) as f64);
    let sx = sx.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (wy, wx) = (sy - y0 as f64, sx - x0 as f64);
    let src = image.data();
    let at = |y: usize, x: usize, c: usize| src[(y * w + x) * CHANNELS + c] as f64;
    for c in 0..CHANNELS {
        let top = at(y0, x0, c) * (1.0 - wx) + at(y0, x1, c) * wx;
        let bottom = at(y1, x0, c) * (1.0 - wx) + at(y1, x1, c) * wx;
        out.push(to_u8(top * (1.0 - wy) + bottom * wy));
    }
}

/// Output pixel `p` reads source `m·(p − center) + center`, with `m = [a b; c d]`
/// acting on `(x, y)`.
fn warp_affine(image: &ImageBuffer, m: [f64; 4]) -> ImageBuffer {
    let (h, w) = (image.height(), image.width());
    let (cy, cx) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
    let mut data = Vec::with_capacity(image.data().len());
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let sx = m[0] * dx + m[1] * dy + cx;
            let sy = m[2] * dx + m[3] * dy + cy;
            sample(image, sy, sx, &mut data);
        }
    }
    ImageBuffer::new(h, w, data).expect("same shape")
}

fn translate(image: &ImageBuffer, shift_x: f64, shift_y: f64) -> ImageBuffer {
    let (h, w) = (image.height(), image.width());
    let mut data = Vec::with_capacity(image.data().len());
    for y in 0..h {
        for x in 0..w {
            sample(image, y as f64 - shift_y, x as f64 - shift_x, &mut data);
        }
    }
    ImageBuffer::new(h, w, data).expect("same shape")
}
