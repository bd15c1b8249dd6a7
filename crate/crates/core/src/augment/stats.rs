use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use super::{AugmentError, ImageBuffer, Tensor, CHANNELS};

/// Floor applied to every channel's standard deviation.
pub const STD_EPSILON: f64 = 1e-6;

/// Per-channel mean and population standard deviation of intensities in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl ChannelStats {
    /// Mean 0, std 1: normalization reduces to scaling by 1/255.
    pub const IDENTITY: ChannelStats = ChannelStats { mean: [0.0; 3], std: [1.0; 3] };
}

/// Welford accumulator per channel; partial accumulators merge exactly
/// enough that iteration order changes the result only at rounding level.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChannelAccumulator {
    count: [u64; 3],
    mean: [f64; 3],
    m2: [f64; 3],
}

impl ChannelAccumulator {
    pub fn push(&mut self, channel: usize, value: f64) {
        self.count[channel] += 1;
        let delta = value - self.mean[channel];
        self.mean[channel] += delta / self.count[channel] as f64;
        self.m2[channel] += delta * (value - self.mean[channel]);
    }

    pub fn merge(&mut self, other: &ChannelAccumulator) {
        for c in 0..CHANNELS {
            let (na, nb) = (self.count[c] as f64, other.count[c] as f64);
            if other.count[c] == 0 {
                continue;
            }
            let n = na + nb;
            let delta = other.mean[c] - self.mean[c];
            self.mean[c] += delta * nb / n;
            self.m2[c] += other.m2[c] + delta * delta * na * nb / n;
            self.count[c] += other.count[c];
        }
    }

    pub fn push_tensor(&mut self, t: &Tensor) {
        for px in t.data.chunks_exact(CHANNELS) {
            for (c, v) in px.iter().enumerate() {
                self.push(c, *v);
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count.iter().all(|n| *n == 0)
    }

    /// Raw population statistics, without the epsilon floor.
    pub fn mean_std(&self) -> ([f64; 3], [f64; 3]) {
        let std = std::array::from_fn(|c| {
            if self.count[c] == 0 {
                0.0
            } else {
                (self.m2[c] / self.count[c] as f64).max(0.0).sqrt()
            }
        });
        (self.mean, std)
    }
}

/// Single pass over the dataset. Each image is accumulated separately and
/// merged, which keeps large datasets numerically stable.
pub fn compute_channel_stats<I>(images: I) -> Result<ChannelStats, AugmentError>
where
    I: IntoIterator,
    I::Item: Borrow<ImageBuffer>,
{
    let mut total = ChannelAccumulator::default();
    for img in images {
        let mut acc = ChannelAccumulator::default();
        for px in img.borrow().data().chunks_exact(CHANNELS) {
            for (c, v) in px.iter().enumerate() {
                acc.push(c, *v as f64 / 255.0);
            }
        }
        total.merge(&acc);
    }
    if total.is_empty() {
        return Err(AugmentError::EmptyDataset);
    }
    let (mean, std) = total.mean_std();
    Ok(ChannelStats { mean, std: std.map(|s| s.max(STD_EPSILON)) })
}

/// `(x/255 − mean[c]) / std[c]` per sample.
pub fn normalize(image: &ImageBuffer, stats: &ChannelStats) -> Tensor {
    let data = image
        .data()
        .chunks_exact(CHANNELS)
        .flat_map(|px| (0..CHANNELS).map(move |c| (px[c] as f64 / 255.0 - stats.mean[c]) / stats.std[c]))
        .collect();
    Tensor { height: image.height(), width: image.width(), data }
}
