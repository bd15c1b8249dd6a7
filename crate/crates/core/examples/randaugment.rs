//! Applies RandAugment policies to a generated test card and writes the
//! results as PNGs.
//!
//! cargo run --example randaugment -- [out_dir]

use std::path::PathBuf;

use tuneflow::augment::{apply_transform, rand_augment, AugmentPolicy, ImageBuffer, TransformOp};
use tuneflow::seed::rng_from;

fn card() -> ImageBuffer {
    ImageBuffer::from_fn(96, 128, |y, x| {
        let band = (x / 16) as u8;
        let stripe = if (y / 12) % 2 == 0 { 40 } else { 0 };
        [band * 31 + stripe, (y * 5 / 2) as u8, if x > y { 200 } else { 60 }]
    })
}

fn main() -> anyhow::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("tuneflow-randaugment"));
    std::fs::create_dir_all(&dir)?;
    let image = card();
    image.save_png(dir.join("original.png"))?;

    let mut rng = rng_from(0);
    for op in TransformOp::ALL {
        let out = apply_transform(&image, op, 20, &mut rng)?;
        out.save_png(dir.join(format!("op-{}.png", op.name())))?;
    }
    for (n, m, seed) in [(1, 6, 1), (2, 14, 2), (3, 30, 3)] {
        let policy = AugmentPolicy::new(n, m)?;
        let ops = policy.draw_ops(&mut rng_from(seed));
        let out = rand_augment(&image, &policy, &mut rng_from(seed))?;
        let names: Vec<&str> = ops.iter().map(|o| o.name()).collect();
        println!("N={n} M={m} seed={seed}: first draws {names:?}, max change {}", out.max_abs_diff(&image));
        out.save_png(dir.join(format!("randaugment-n{n}-m{m}.png")))?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}
