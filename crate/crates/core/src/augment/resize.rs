use super::{AugmentError, ImageBuffer, CHANNELS};

/// Bilinear resize with half-pixel centers and edge clamping. No antialiasing
/// filter is applied when downscaling; same-size resizes are exact copies.
pub fn resize_bilinear(image: &ImageBuffer, out_height: u32, out_width: u32) -> ImageBuffer {
    let (in_h, in_w) = (image.height() as usize, image.width() as usize);
    if (out_height as usize, out_width as usize) == (in_h, in_w) {
        return image.clone();
    }
    let axis = |out: u32, input: usize| -> Vec<(usize, usize, f64)> {
        let scale = input as f64 / out as f64;
        (0..out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
                let lo = src.floor() as usize;
                let hi = (lo + 1).min(input - 1);
                (lo, hi, src - lo as f64)
            })
            .collect()
    };
    let rows = axis(out_height, in_h);
    let cols = axis(out_width, in_w);
    let src = image.data();
    let at = |y: usize, x: usize, c: usize| src[(y * in_w + x) * CHANNELS + c] as f64;

    let mut data = Vec::with_capacity(out_height as usize * out_width as usize * CHANNELS);
    for &(y0, y1, wy) in &rows {
        for &(x0, x1, wx) in &cols {
            for c in 0..CHANNELS {
                let top = at(y0, x0, c) * (1.0 - wx) + at(y0, x1, c) * wx;
                let bottom = at(y1, x0, c) * (1.0 - wx) + at(y1, x1, c) * wx;
                data.push((top * (1.0 - wy) + bottom * wy).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageBuffer::new(out_height, out_width, data).expect("resize output shape")
}

pub fn crop(image: &ImageBuffer, top: u32, left: u32, height: u32, width: u32) -> Result<ImageBuffer, AugmentError> {
    let fits = height >= 1
        && width >= 1
        && top as u64 + height as u64 <= image.height() as u64
        && left as u64 + width as u64 <= image.width() as u64;
    if !fits {
        return Err(AugmentError::CropOutOfBounds {
            top,
            left,
            height,
            width,
            image_height: image.height(),
            image_width: image.width(),
        });
    }
    let row_len = image.width() as usize * CHANNELS;
    let mut data = Vec::with_capacity(height as usize * width as usize * CHANNELS);
    for y in top..top + height {
        let start = y as usize * row_len + left as usize * CHANNELS;
        data.extend_from_slice(&image.data()[start..start + width as usize * CHANNELS]);
    }
    ImageBuffer::new(height, width, data)
}

pub fn flip_horizontal(image: &ImageBuffer) -> ImageBuffer {
    let row_len = image.width() as usize * CHANNELS;
    let data = image
        .data()
        .chunks_exact(row_len)
        .flat_map(|row| row.chunks_exact(CHANNELS).rev().flatten().copied())
        .collect();
    ImageBuffer::new(image.height(), image.width(), data).expect("same shape")
}
