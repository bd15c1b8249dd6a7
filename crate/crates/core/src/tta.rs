//! Test-time augmentation: 3 scales × 5 crops × 2 flips = 30 views per image,
//! scored independently and merged by averaging per-view softmax outputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{crop, flip_horizontal, resize_bilinear, ImageBuffer};

/// Short-side lengths the image is resized to before cropping.
pub const SCALES: [u32; 3] = [256, 288, 352];
/// Side length of every view.
pub const CROP_SIZE: u32 = 224;
pub const VIEW_COUNT: usize = 30;

#[derive(Debug, Error, PartialEq)]
pub enum TtaError {
    #[error("no predictions to aggregate")]
    Empty,
    #[error("view {index} has {got} classes, expected {expected}")]
    ClassCountMismatch { index: usize, expected: usize, got: usize },
    #[error("view {0} is not a logit vector")]
    NotLogits(usize),
    #[error("view {0} contains non-finite logits")]
    NonFinite(usize),
    #[error("invalid view: {0}")]
    BadView(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CropPosition {
    Center,
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl CropPosition {
    pub const ALL: [CropPosition; 5] = [
        CropPosition::Center,
        CropPosition::TopLeft,
        CropPosition::TopRight,
        CropPosition::BottomLeft,
        CropPosition::BottomRight,
    ];

    /// `(top, left)` of a `crop`-sized window in a `height × width` image.
    /// Corners sit flush against the border; the center uses `floor((dim − crop) / 2)`.
    pub fn offset(self, height: u32, width: u32, crop: u32) -> (u32, u32) {
        let (dy, dx) = (height - crop, width - crop);
        match self {
            CropPosition::Center => (dy / 2, dx / 2),
            CropPosition::TopLeft => (0, 0),
            CropPosition::TopRight => (0, dx),
            CropPosition::BottomLeft => (dy, 0),
            CropPosition::BottomRight => (dy, dx),
        }
    }
}

/// One view: resize the short side to `scale_short_side`, take a 224×224
/// crop at `crop_position`, optionally mirror.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViewSpec {
    pub scale_short_side: u32,
    pub crop_position: CropPosition,
    pub flipped: bool,
}

/// All 30 views, ordered by scale, then position, unflipped first. The plan
/// depends on nothing but the fixed geometry.
pub fn plan_views(_height: u32, _width: u32) -> Vec<ViewSpec> {
    let mut views = Vec::with_capacity(VIEW_COUNT);
    for scale in SCALES {
        for position in CropPosition::ALL {
            for flipped in [false, true] {
                views.push(ViewSpec { scale_short_side: scale, crop_position: position, flipped });
            }
        }
    }
    views
}

/// `(height, width)` after scaling the short side to `short`. The long side
/// is `long·short/short_side` rounded half-up, in exact integer arithmetic.
pub fn scaled_size(height: u32, width: u32, short: u32) -> (u32, u32) {
    let scale_long = |long: u32, short_side: u32| -> u32 {
        let num = 2 * long as u64 * short as u64 + short_side as u64;
        (num / (2 * short_side as u64)) as u32
    };
    if height <= width {
        (short, scale_long(width, height))
    } else {
        (scale_long(height, width), short)
    }
}

pub fn materialize_view(image: &ImageBuffer, spec: &ViewSpec) -> Result<ImageBuffer, TtaError> {
    if spec.scale_short_side < CROP_SIZE {
        return Err(TtaError::BadView(format!("scale {} below crop size", spec.scale_short_side)));
    }
    let (h, w) = scaled_size(image.height(), image.width(), spec.scale_short_side);
    let resized = resize_bilinear(image, h, w);
    let (top, left) = spec.crop_position.offset(h, w, CROP_SIZE);
    let view = crop(&resized, top, left, CROP_SIZE, CROP_SIZE).map_err(|e| TtaError::BadView(e.to_string()))?;
    Ok(if spec.flipped { flip_horizontal(&view) } else { view })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorKind {
    Logits,
    Probabilities,
}

/// Per-class scores of one view or one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionVector {
    pub values: Vec<f64>,
    pub kind: VectorKind,
}

impl PredictionVector {
    pub fn logits(values: Vec<f64>) -> Self {
        PredictionVector { values, kind: VectorKind::Logits }
    }

    pub fn class_count(&self) -> usize {
        self.values.len()
    }

    /// Index of the largest value; ties resolve to the lowest index.
    pub fn argmax(&self) -> Option<usize> {
        argmax(&self.values)
    }
}

pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    values.iter().enumerate().fold(None, |best, (i, v)| match best {
        Some((_, b)) if *v <= b => best,
        _ => Some((i, *v)),
    }).map(|(i, _)| i)
}

/// Softmax with the maximum subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax each view's logits, then take the arithmetic mean over views.
pub fn aggregate_predictions(views: &[PredictionVector]) -> Result<PredictionVector, TtaError> {
    let first = views.first().ok_or(TtaError::Empty)?;
    let classes = first.class_count();
    let mut sum = vec![0.0; classes];
    for (index, view) in views.iter().enumerate() {
        if view.kind != VectorKind::Logits {
            return Err(TtaError::NotLogits(index));
        }
        if view.class_count() != classes {
            return Err(TtaError::ClassCountMismatch { index, expected: classes, got: view.class_count() });
        }
        if !view.values.iter().all(|v| v.is_finite()) {
            return Err(TtaError::NonFinite(index));
        }
        for (s, p) in sum.iter_mut().zip(softmax(&view.values)) {
            *s += p;
        }
    }
    let n = views.len() as f64;
    Ok(PredictionVector { values: sum.into_iter().map(|s| s / n).collect(), kind: VectorKind::Probabilities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn plan_has_thirty_distinct_ordered_views() {
        let views = plan_views(375, 500);
        assert_eq!(views.len(), 30);
        assert_eq!(views.iter().collect::<HashSet<_>>().len(), 30);
        assert_eq!(views, plan_views(1, 1));
        assert_eq!(views[0], ViewSpec { scale_short_side: 256, crop_position: CropPosition::Center, flipped: false });
        assert!(views[1].flipped);
        assert_eq!(views[29].scale_short_side, 352);
        assert!(views.windows(2).all(|w| w[0].scale_short_side <= w[1].scale_short_side));
    }

    #[test]
    fn scaled_size_rounds_half_up() {
        assert_eq!(scaled_size(375, 500, 256), (256, 341));
        assert_eq!(scaled_size(500, 375, 256), (341, 256));
        assert_eq!(scaled_size(375, 500, 288), (288, 384));
        assert_eq!(scaled_size(375, 500, 352), (352, 469));
        assert_eq!(scaled_size(100, 100, 256), (256, 256));
        // 3·255/2 = 382.5
        assert_eq!(scaled_size(2, 3, 255), (255, 383));
    }

    #[test]
    fn offsets_on_a_square_resize() {
        assert_eq!(CropPosition::Center.offset(256, 256, 224), (16, 16));
        assert_eq!(CropPosition::TopLeft.offset(256, 256, 224), (0, 0));
        assert_eq!(CropPosition::TopRight.offset(256, 256, 224), (0, 32));
        assert_eq!(CropPosition::BottomLeft.offset(256, 256, 224), (32, 0));
        assert_eq!(CropPosition::BottomRight.offset(256, 256, 224), (32, 32));
    }

    #[test]
    fn center_view_of_square_image() {
        let img = ImageBuffer::from_fn(256, 256, |y, x| [(x % 256) as u8, (y % 256) as u8, 0]);
        let spec = ViewSpec { scale_short_side: 256, crop_position: CropPosition::Center, flipped: false };
        let view = materialize_view(&img, &spec).unwrap();
        assert_eq!(view, crop(&img, 16, 16, 224, 224).unwrap());
    }

    #[test]
    fn flip_of_symmetric_center_crop_is_a_no_op() {
        let img = ImageBuffer::from_fn(300, 450, |y, x| {
            let d = (x as i32 - 224).abs().min((x as i32 - 225).abs()) as u32;
            [(d % 256) as u8, (y % 256) as u8, 50]
        });
        // the image is mirror-symmetric, so its resize is too
        assert_eq!(flip_horizontal(&img), img);
        let plain = ViewSpec { scale_short_side: 256, crop_position: CropPosition::Center, flipped: false };
        let flipped = ViewSpec { flipped: true, ..plain };
        let (h, w) = scaled_size(300, 450, 256);
        assert_eq!((w - 224) % 2, 0, "center crop must be symmetric");
        assert_eq!(materialize_view(&img, &plain).unwrap(), materialize_view(&img, &flipped).unwrap());
        assert_eq!(h, 256);
    }

    #[test]
    fn every_view_is_224() {
        let img = ImageBuffer::filled(375, 500, [1, 2, 3]);
        for spec in plan_views(375, 500) {
            let v = materialize_view(&img, &spec).unwrap();
            assert_eq!((v.height(), v.width()), (224, 224));
        }
    }

    #[test]
    fn identical_views_aggregate_to_their_softmax() {
        let logits = vec![1.5, -0.5, 3.0, 0.0];
        let views = vec![PredictionVector::logits(logits.clone()); 30];
        let agg = aggregate_predictions(&views).unwrap();
        for (a, b) in agg.values.iter().zip(softmax(&logits)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn symmetric_pair_averages_to_uniform() {
        let ln2 = 2f64.ln();
        let agg = aggregate_predictions(&[
            PredictionVector::logits(vec![ln2, 0.0]),
            PredictionVector::logits(vec![0.0, ln2]),
        ])
        .unwrap();
        assert!((agg.values[0] - 0.5).abs() < 1e-15);
        assert!((agg.values[1] - 0.5).abs() < 1e-15);
        assert_eq!(agg.kind, VectorKind::Probabilities);
    }

    #[test]
    fn aggregation_errors() {
        assert_eq!(aggregate_predictions(&[]), Err(TtaError::Empty));
        let err = aggregate_predictions(&[PredictionVector::logits(vec![0.0; 3]), PredictionVector::logits(vec![0.0; 2])]);
        assert_eq!(err, Err(TtaError::ClassCountMismatch { index: 1, expected: 3, got: 2 }));
        let probs = PredictionVector { values: vec![0.5, 0.5], kind: VectorKind::Probabilities };
        assert_eq!(aggregate_predictions(&[probs]), Err(TtaError::NotLogits(0)));
    }

    #[test]
    fn huge_logits_stay_finite() {
        let agg = aggregate_predictions(&[PredictionVector::logits(vec![1000.0, 999.0, -1000.0])]).unwrap();
        assert!(agg.values.iter().all(|v| v.is_finite()));
        assert!((agg.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
