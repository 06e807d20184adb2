//! Compare the hand-written reverse pass with central finite differences.
//!
//! cargo run --release --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmformer::transformer::{forward, loss_and_gradients, ModelParams, ModelShape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shape = ModelShape {
        n_features: 13,
        d_model: 8,
        n_heads: 2,
        d_ff: 16,
        n_layers: 2,
    };
    let mut params = ModelParams::init(shape, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inputs = loop {
        let x: Vec<f64> = (0..3 * 13).map(|_| rng.gen_range(-2.0..2.0)).collect();
        // Stay away from ReLU kinks, where the loss has no derivative.
        if forward(&params, &x).relu_margin() > 1e-3 {
            break x;
        }
    };
    let labels = [0, 1, 1];
    let (loss, analytic) = loss_and_gradients(&params, &inputs, &labels)?;
    println!("loss {loss:.6}");

    let eps = 1e-4;
    for (name, span) in params.layout.named() {
        let (mut diff, mut norm) = (0.0f64, 0.0f64);
        for i in span.range() {
            let orig = params.values[i];
            params.values[i] = orig + eps;
            let up = loss_and_gradients(&params, &inputs, &labels)?.0;
            params.values[i] = orig - eps;
            let down = loss_and_gradients(&params, &inputs, &labels)?.0;
            params.values[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            diff += (analytic[i] - numeric).powi(2);
            norm += analytic[i].powi(2).max(numeric * numeric);
        }
        println!("{name:<18} {:>5} values  relative error {:.2e}", span.len(), diff.sqrt() / norm.sqrt().max(1e-12));
    }
    Ok(())
}
