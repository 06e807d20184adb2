//! Decision tree, random forest and boosted trees on one split.
//!
//! cargo run --release --example tree_baselines

use swarmformer::baselines::{BoostParams, BoostedTrees, DecisionTree, ForestParams, RandomForest, TreeParams};
use swarmformer::data::{stratified_split, synthesize_dataset};
use swarmformer::eval::EvaluationReport;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = synthesize_dataset(1000, 0.05, 11)?;
    let (train_set, test) = stratified_split(&data, 0.2, 11)?;

    let tree = DecisionTree::fit(&train_set, &TreeParams::default())?;
    println!("tree: {} leaves, depth {}", tree.n_leaves(), tree.depth());

    let forest = RandomForest::fit(
        &train_set,
        &ForestParams {
            seed: 11,
            ..ForestParams::default()
        },
    )?;
    let boosted = BoostedTrees::fit(&train_set, &BoostParams::default())?;
    let rounds = boosted.trees().len();
    println!(
        "boosting log loss: {:.4} at the prior, {:.4} after {rounds} rounds",
        boosted.staged_log_loss(&train_set, 0),
        boosted.staged_log_loss(&train_set, rounds)
    );

    for (name, pred) in [
        ("decision_tree", tree.predict(&test)),
        ("random_forest", forest.predict(&test)),
        ("boosted_trees", boosted.predict(&test)),
    ] {
        let report = EvaluationReport::from_predictions(name, "test", test.targets(), &pred, 11, "")?;
        let m = report.metrics;
        println!(
            "{name:<14} accuracy {:.3}  macro f1 {:.3}  confusion {:?}",
            m.accuracy,
            m.macro_avg.f1,
            report.confusion.counts()
        );
    }
    Ok(())
}
