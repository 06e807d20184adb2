//! Train the encoder classifier on a synthetic split and save the weights.
//!
//! cargo run --release --example transformer_classifier

use swarmformer::data::{stratified_split, synthesize_dataset, Scaler};
use swarmformer::transformer::{accuracy, predict, train, ModelParams, TransformerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = synthesize_dataset(600, 0.05, 3)?;
    let (train_set, test) = stratified_split(&data, 0.2, 3)?;
    let scaler = Scaler::fit(&train_set)?;
    let (train_set, test) = (scaler.transform(&train_set)?, scaler.transform(&test)?);

    let cfg = TransformerConfig {
        n_layers: 2,
        d_model: 32,
        n_heads: 4,
        d_ff: 64,
        learning_rate: 1e-3,
        batch_size: 32,
        epochs: 20,
        seed: 3,
    };
    let (params, report) = train(&cfg, &train_set, Some(&test))?;
    for (epoch, (loss, acc)) in report.epoch_loss.iter().zip(&report.val_accuracy).enumerate() {
        println!("epoch {:>2}  loss {loss:.4}  test accuracy {acc:.3}", epoch + 1);
    }
    println!("{} steps in {:.1} s", report.steps, report.wall_seconds);

    let pred = predict(&params, &test);
    println!("first rows: labels {:?}", &pred.labels[..8]);
    println!("            p(1)   {:?}", pred.probabilities[..8].iter().map(|p| format!("{:.2}", p[1])).collect::<Vec<_>>());

    let mut bytes = Vec::new();
    params.save(&mut bytes, "example")?;
    let (restored, tag) = ModelParams::load(bytes.as_slice())?;
    println!("reloaded {} bytes ({tag}), accuracy {:.3}", bytes.len(), accuracy(&restored, &test));
    Ok(())
}
