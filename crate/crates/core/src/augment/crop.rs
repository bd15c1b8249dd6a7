use rand::Rng;

use super::{crop, resize_bilinear, AugmentError, ImageBuffer};

/// Sampling ranges for [`random_resized_crop`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropParams {
    /// Fraction of the source area, sampled uniformly.
    pub area_range: (f64, f64),
    /// Width / height, sampled log-uniformly.
    pub ratio_range: (f64, f64),
    pub out_height: u32,
    pub out_width: u32,
    pub max_attempts: u32,
}

impl Default for CropParams {
    fn default() -> Self {
        CropParams {
            area_range: (0.10, 1.0),
            ratio_range: (3.0 / 4.0, 4.0 / 3.0),
            out_height: 224,
            out_width: 224,
            max_attempts: 10,
        }
    }
}

/// Crop rectangle in source pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropSpec {
    pub top: u32,
    pub left: u32,
    pub crop_height: u32,
    pub crop_width: u32,
}

/// Outcome of [`sample_crop`]: the rectangle plus the draws that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropSample {
    pub spec: CropSpec,
    /// Area fraction and aspect ratio of the accepted draw; `None` on fallback.
    pub draw: Option<(f64, f64)>,
    pub attempts: u32,
}

impl CropSample {
    pub fn is_fallback(&self) -> bool {
        self.draw.is_none()
    }
}

/// `(round(sqrt(area·W·H / ratio)), round(sqrt(area·W·H·ratio)))` as `(height, width)`.
pub fn crop_size_for(height: u32, width: u32, area_fraction: f64, ratio: f64) -> (u32, u32) {
    let target = area_fraction * height as f64 * width as f64;
    ((target / ratio).sqrt().round() as u32, (target * ratio).sqrt().round() as u32)
}

/// Draws a crop rectangle: up to `max_attempts` tries at a random area and
/// aspect ratio, then a centered crop of the whole image with its aspect
/// ratio clamped into range.
pub fn sample_crop<R: Rng + ?Sized>(height: u32, width: u32, params: &CropParams, rng: &mut R) -> CropSample {
    let (log_lo, log_hi) = (params.ratio_range.0.ln(), params.ratio_range.1.ln());
    for attempt in 1..=params.max_attempts {
        let area = rng.random_range(params.area_range.0..=params.area_range.1);
        let ratio = rng.random_range(log_lo..=log_hi).exp();
        let (h, w) = crop_size_for(height, width, area, ratio);
        if (1..=height).contains(&h) && (1..=width).contains(&w) {
            let top = rng.random_range(0..=height - h);
            let left = rng.random_range(0..=width - w);
            return CropSample {
                spec: CropSpec { top, left, crop_height: h, crop_width: w },
                draw: Some((area, ratio)),
                attempts: attempt,
            };
        }
    }
    let in_ratio = width as f64 / height as f64;
    let (h, w) = if in_ratio < params.ratio_range.0 {
        (((width as f64 / params.ratio_range.0).round() as u32).clamp(1, height), width)
    } else if in_ratio > params.ratio_range.1 {
        (height, ((height as f64 * params.ratio_range.1).round() as u32).clamp(1, width))
    } else {
        (height, width)
    };
    CropSample {
        spec: CropSpec { top: (height - h) / 2, left: (width - w) / 2, crop_height: h, crop_width: w },
        draw: None,
        attempts: params.max_attempts,
    }
}

/// Samples a crop and bilinearly resizes it to the output size.
pub fn random_resized_crop<R: Rng + ?Sized>(
    image: &ImageBuffer,
    params: &CropParams,
    rng: &mut R,
) -> Result<(ImageBuffer, CropSample), AugmentError> {
    let sample = sample_crop(image.height(), image.width(), params, rng);
    let s = sample.spec;
    let region = crop(image, s.top, s.left, s.crop_height, s.crop_width)?;
    Ok((resize_bilinear(&region, params.out_height, params.out_width), sample))
}
