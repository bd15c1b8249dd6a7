//! Statistics of random resized crops drawn from a 500x375 image.

use tuneflow::augment::{random_resized_crop, sample_crop, CropParams, ImageBuffer};
use tuneflow::seed::rng_from;

fn main() -> anyhow::Result<()> {
    let (h, w) = (375, 500);
    let params = CropParams::default();
    let mut rng = rng_from(11);
    let draws = 20_000;
    let (mut fallbacks, mut area, mut log_ratio, mut attempts) = (0, 0.0, 0.0, 0u64);
    for _ in 0..draws {
        let s = sample_crop(h, w, &params, &mut rng);
        attempts += s.attempts as u64;
        match s.draw {
            Some((a, r)) => {
                area += a;
                log_ratio += r.ln();
            }
            None => fallbacks += 1,
        }
    }
    let accepted = (draws - fallbacks) as f64;
    println!("{draws} draws on {w}x{h}: {fallbacks} fallbacks, {:.2} attempts each", attempts as f64 / draws as f64);
    println!("accepted mean area {:.3}, geometric mean ratio {:.3}", area / accepted, (log_ratio / accepted).exp());

    let image = ImageBuffer::filled(h, w, [90, 140, 200]);
    let (out, sample) = random_resized_crop(&image, &params, &mut rng)?;
    println!("one crop: {:?} resized to {}x{}", sample.spec, out.width(), out.height());
    Ok(())
}
