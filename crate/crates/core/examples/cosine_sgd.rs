//! Cosine annealing driving momentum SGD on a small quadratic bowl.

use tuneflow::optim::{cosine_lr, sgd_momentum_step, OptimizerConfig};

fn main() -> anyhow::Result<()> {
    let epochs = 50;
    let cfg = OptimizerConfig::new(0.1, 5e-4, epochs)?;
    let curvature = [1.0, 10.0];
    let mut params = vec![3.0, -2.0];
    let mut velocity = vec![0.0; 2];
    for epoch in 0..=epochs {
        let lr = cosine_lr(epoch, &cfg)?;
        if epoch % 10 == 0 {
            let loss: f64 = params.iter().zip(curvature).map(|(p, c)| 0.5 * c * p * p).sum();
            println!("epoch {epoch:>3} lr {lr:.5} loss {loss:.3e}");
        }
        if epoch == epochs {
            break;
        }
        let grads: Vec<f64> = params.iter().zip(curvature).map(|(p, c)| c * p).collect();
        sgd_momentum_step(&mut params, &grads, &mut velocity, lr, &cfg)?;
    }
    Ok(())
}
