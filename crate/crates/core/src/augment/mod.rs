//! Training-time image pre-processing: channel normalization, RandAugment
//! and random resized cropping.
//!
//! Everything here works on [`ImageBuffer`], an interleaved RGB8 grid. Output
//! of [`normalize`] is a [`Tensor`] of `f64` samples in the same layout.

mod crop;
mod ops;
mod policy;
mod resize;
mod stats;

use std::path::Path;

use thiserror::Error;

pub use crop::{crop_size_for, random_resized_crop, sample_crop, CropParams, CropSample, CropSpec};
pub use ops::{apply_transform, TransformOp, FILL_VALUE, MAX_MAGNITUDE};
pub use policy::{rand_augment, AugmentPolicy};
pub use resize::{crop, flip_horizontal, resize_bilinear};
pub use stats::{compute_channel_stats, normalize, ChannelAccumulator, ChannelStats, STD_EPSILON};

pub const CHANNELS: usize = 3;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("image dimensions must be at least 1x1 and match the buffer ({height}x{width}, {len} bytes)")]
    BadDimensions { height: u32, width: u32, len: usize },
    #[error("unknown transform `{0}`")]
    UnknownOp(String),
    #[error("magnitude {0} outside [0, 30]")]
    Magnitude(u32),
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("crop {height}x{width} at ({top}, {left}) does not fit a {image_height}x{image_width} image")]
    CropOutOfBounds { top: u32, left: u32, height: u32, width: u32, image_height: u32, image_width: u32 },
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

/// Row-major interleaved RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    height: u32,
    width: u32,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(height: u32, width: u32, data: Vec<u8>) -> Result<Self, AugmentError> {
        if height == 0 || width == 0 || data.len() != height as usize * width as usize * CHANNELS {
            return Err(AugmentError::BadDimensions { height, width, len: data.len() });
        }
        Ok(ImageBuffer { height, width, data })
    }

    pub fn filled(height: u32, width: u32, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(height as usize * width as usize * CHANNELS).collect();
        ImageBuffer::new(height, width, data).expect("non-empty")
    }

    /// Builds an image by evaluating `f(y, x)` at every pixel.
    pub fn from_fn(height: u32, width: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(height as usize * width as usize * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(y, x));
            }
        }
        ImageBuffer::new(height, width, data).expect("non-empty")
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, y: u32, x: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Largest per-sample absolute difference. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &ImageBuffer) -> u8 {
        assert_eq!((self.height, self.width), (other.height, other.width));
        self.data.iter().zip(&other.data).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0)
    }

    /// Reads a PNG or JPEG file, converting to RGB8.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, AugmentError> {
        let rgb = image::open(path)?.to_rgb8();
        let (w, h) = rgb.dimensions();
        ImageBuffer::new(h, w, rgb.into_raw())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), AugmentError> {
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )?;
        Ok(())
    }
}

/// Real-valued image in the same layout as [`ImageBuffer`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub height: u32,
    pub width: u32,
    pub data: Vec<f64>,
}
