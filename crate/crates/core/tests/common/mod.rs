#![allow(dead_code)]

use std::path::PathBuf;

use tuneflow::augment::ImageBuffer;

pub const BLESS_VAR: &str = "TUNEFLOW_BLESS";

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Deterministic 64×48 test card: gradients, a bright square and a diagonal.
pub fn test_card() -> ImageBuffer {
    ImageBuffer::from_fn(48, 64, |y, x| {
        let r = (x * 4) as u8;
        let g = (y * 5) as u8;
        let mut b = ((x + y) * 2) as u8;
        if (16..32).contains(&y) && (20..36).contains(&x) {
            b = 240;
        }
        if x == y {
            return [250, 250, 250];
        }
        [r, g, b]
    })
}

/// Compares `image` with the golden PNG `name`, rewriting it when the bless
/// variable is set.
pub fn check_golden(name: &str, image: &ImageBuffer) -> Result<(), String> {
    let path = fixture_dir().join(name);
    if std::env::var_os(BLESS_VAR).is_some() {
        image.save_png(&path).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let golden = ImageBuffer::open(&path).map_err(|e| format!("{}: {e} (set {BLESS_VAR}=1 to create)", path.display()))?;
    if (golden.height(), golden.width()) != (image.height(), image.width()) {
        return Err(format!("{name}: golden is {}x{}", golden.width(), golden.height()));
    }
    if golden != *image {
        return Err(format!("{name} differs from golden (max diff {})", golden.max_abs_diff(image)));
    }
    Ok(())
}
