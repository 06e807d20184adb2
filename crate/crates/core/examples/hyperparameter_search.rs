//! Swarm search over learning rate, depth, width and head count, followed by
//! a retrain of the best configuration.
//!
//! cargo run --release --example hyperparameter_search

use swarmformer::data::{stratified_split, synthesize_dataset, Scaler};
use swarmformer::pso::SwarmConfig;
use swarmformer::search::{search, HyperSearchSpec};
use swarmformer::transformer::accuracy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = synthesize_dataset(400, 0.05, 5)?;
    let (train_set, test) = stratified_split(&data, 0.2, 5)?;
    let scaler = Scaler::fit(&train_set)?;
    let (train_set, test) = (scaler.transform(&train_set)?, scaler.transform(&test)?);
    let (fit, val) = stratified_split(&train_set, 0.25, 6)?;

    let spec = HyperSearchSpec {
        d_model_menu: vec![8, 16, 32],
        fitness_epochs: 4,
        epochs: 10,
        swarm: SwarmConfig {
            n_particles: 4,
            max_iters: 3,
            seed: 5,
            ..SwarmConfig::default()
        },
        seed: 5,
        ..HyperSearchSpec::default()
    };
    let outcome = search(&spec, &fit, &val)?;
    let r = &outcome.result;
    for e in &r.log {
        println!(
            "iter {} particle {}  lr {:.2e}  layers {}  d_model {:>2}  heads {}  val acc {:.3}",
            e.iteration, e.particle, e.hyper.learning_rate, e.hyper.n_layers, e.hyper.d_model, e.hyper.n_heads, e.accuracy
        );
    }
    println!("best-so-far validation accuracy per iteration: {:?}", r.history);
    println!("best config: {:?}", r.best_config);
    println!("retrained model, test accuracy {:.3}", accuracy(&outcome.model, &test));
    Ok(())
}
