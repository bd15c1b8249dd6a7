//! The 30 test-time views of one image, scored by the toy worker model and
//! averaged.

use tuneflow::augment::ImageBuffer;
use tuneflow::executor::worker::toy_logits;
use tuneflow::tta::{aggregate_predictions, materialize_view, plan_views, scaled_size, PredictionVector};

fn main() -> anyhow::Result<()> {
    let image = ImageBuffer::from_fn(375, 500, |y, x| [(x / 2) as u8, (y / 2) as u8, 128]);
    let mut views = Vec::new();
    for spec in plan_views(image.height(), image.width()) {
        let (h, w) = scaled_size(image.height(), image.width(), spec.scale_short_side);
        let view = materialize_view(&image, &spec)?;
        let logits = toy_logits(&view);
        println!("{:>3} {:>12?} flip={:<5} resized {w}x{h} logits {:?}", spec.scale_short_side, spec.crop_position, spec.flipped,
            logits.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
        views.push(PredictionVector::logits(logits));
    }
    let averaged = aggregate_predictions(&views)?;
    println!("{} views -> {:?} (class {:?})", views.len(), averaged.values, averaged.argmax());
    Ok(())
}
