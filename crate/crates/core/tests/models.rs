//! Behavioral checks of the classifiers on constructed data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmformer::baselines::{BoostParams, BoostedTrees, DecisionTree, ForestParams, RandomForest, TreeParams};
use swarmformer::data::{load_csv, stratified_split, synthesize_dataset, write_csv, Dataset, Scaler, HEART_FEATURES};
use swarmformer::transformer::{
    accuracy, forward, loss_and_gradients, positional_encoding, train, ModelParams, ModelShape, TransformerConfig,
};

fn accuracy_of(pred: &[u8], data: &Dataset) -> f64 {
    pred.iter().zip(data.targets()).filter(|(a, b)| a == b).count() as f64 / data.n_rows() as f64
}

/// 40 rows whose label is the sign of `x0 + x1`, kept at least 0.5 from the boundary.
fn separable(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    while y.len() < 40 {
        let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        if (a + b).abs() < 0.5 {
            continue;
        }
        let label = u8::from(a + b > 0.0);
        // Keep the classes balanced.
        if y.iter().filter(|&&v| v == label).count() == 20 {
            continue;
        }
        x.extend([a, b, rng.gen_range(-1.0..1.0)]);
        y.push(label);
    }
    Dataset::new(vec!["a".into(), "b".into(), "noise".into()], x, y).unwrap()
}

fn small_config() -> TransformerConfig {
    TransformerConfig {
        n_layers: 1,
        d_model: 16,
        n_heads: 2,
        d_ff: 32,
        learning_rate: 1e-2,
        batch_size: 8,
        epochs: 30,
        seed: 3,
    }
}

#[test]
fn transformer_fits_separable_rows() {
    let data = separable(1);
    let (params, report) = train(&small_config(), &data, None).unwrap();
    assert_eq!(accuracy(&params, &data), 1.0);
    assert_eq!(report.steps, 30 * 5);
    assert!(report.epoch_loss.last().unwrap() < &report.epoch_loss[0]);
}

#[test]
fn full_batch_takes_one_step_per_epoch() {
    let data = separable(2);
    let cfg = TransformerConfig {
        epochs: 1,
        batch_size: data.n_rows(),
        ..small_config()
    };
    let (_, report) = train(&cfg, &data, Some(&data)).unwrap();
    assert_eq!(report.steps, 1);
    assert_eq!(report.epoch_loss.len(), 1);
    assert_eq!(report.val_accuracy.len(), 1);
}

#[test]
fn training_is_bit_reproducible() {
    let data = separable(4);
    let cfg = TransformerConfig {
        epochs: 5,
        ..small_config()
    };
    let (p1, r1) = train(&cfg, &data, None).unwrap();
    let (p2, r2) = train(&cfg, &data, None).unwrap();
    assert_eq!(r1.epoch_loss, r2.epoch_loss);
    assert_eq!(p1.values, p2.values);
}

#[test]
fn duplicated_batch_gives_same_loss_and_gradients() {
    let shape = ModelShape {
        n_features: 5,
        d_model: 8,
        n_heads: 2,
        d_ff: 16,
        n_layers: 2,
    };
    let params = ModelParams::init(shape, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> = (0..3 * 5).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y = [0u8, 1, 1];
    let x2: Vec<f64> = x.chunks(5).flat_map(|r| r.iter().chain(r).copied()).collect();
    let y2: Vec<u8> = y.iter().flat_map(|&v| [v, v]).collect();
    let (l1, g1) = loss_and_gradients(&params, &x, &y).unwrap();
    let (l2, g2) = loss_and_gradients(&params, &x2, &y2).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    for (a, b) in g1.iter().zip(&g2) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn permuting_features_with_embeddings_keeps_logits() {
    let shape = ModelShape {
        n_features: 6,
        d_model: 8,
        n_heads: 2,
        d_ff: 16,
        n_layers: 2,
    };
    let (t, d) = (shape.n_features, shape.d_model);
    let params = ModelParams::init(shape, 21);
    let perm = [3usize, 0, 5, 1, 4, 2];
    let pe = positional_encoding(t, d);

    // Move each feature's lift to its new position, and fold the positional
    // encoding difference into the shift so every token keeps its value.
    let mut moved = params.clone();
    let (scale, shift) = (params.layout.emb_scale, params.layout.emb_shift);
    for (i, &src) in perm.iter().enumerate() {
        for k in 0..d {
            let s = params.tensor(scale)[src * d + k];
            let b = params.tensor(shift)[src * d + k] + pe[src * d + k] - pe[i * d + k];
            moved.tensor_mut(scale)[i * d + k] = s;
            moved.tensor_mut(shift)[i * d + k] = b;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x: Vec<f64> = (0..4 * t).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let x_perm: Vec<f64> = x.chunks(t).flat_map(|r| perm.iter().map(move |&s| r[s])).collect();
    let a = forward(&params, &x);
    let b = forward(&moved, &x_perm);
    for (u, v) in a.logits().iter().zip(b.logits()) {
        assert!((u - v).abs() < 1e-12, "{u} vs {v}");
    }
}

#[test]
fn baselines_learn_noiseless_rule() {
    let data = synthesize_dataset(1000, 0.0, 42).unwrap();
    let (train_set, test) = stratified_split(&data, 0.2, 42).unwrap();
    let scaler = Scaler::fit(&train_set).unwrap();
    let (train_set, test) = (scaler.transform(&train_set).unwrap(), scaler.transform(&test).unwrap());
    let tree = DecisionTree::fit(&train_set, &TreeParams::default()).unwrap();
    let forest = RandomForest::fit(&train_set, &ForestParams::default()).unwrap();
    let boosted = BoostedTrees::fit(&train_set, &BoostParams::default()).unwrap();
    for (name, acc) in [
        ("tree", accuracy_of(&tree.predict(&test), &test)),
        ("forest", accuracy_of(&forest.predict(&test), &test)),
        ("boosted", accuracy_of(&boosted.predict(&test), &test)),
    ] {
        assert!(acc >= 0.9, "{name} reached only {acc}");
    }
}

#[test]
fn forest_median_beats_single_tree_median() {
    let mut forest_acc = Vec::new();
    let mut tree_acc = Vec::new();
    for seed in 0..10 {
        let data = synthesize_dataset(400, 0.1, 100 + seed).unwrap();
        let (train_set, test) = stratified_split(&data, 0.25, seed).unwrap();
        let tree = DecisionTree::fit(&train_set, &TreeParams::default()).unwrap();
        let params = ForestParams {
            n_trees: 50,
            seed,
            ..ForestParams::default()
        };
        let forest = RandomForest::fit(&train_set, &params).unwrap();
        tree_acc.push(accuracy_of(&tree.predict(&test), &test));
        forest_acc.push(accuracy_of(&forest.predict(&test), &test));
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[4] + v[5]) / 2.0
    };
    let (f, t) = (median(&mut forest_acc), median(&mut tree_acc));
    assert!(f >= t, "forest median {f} below tree median {t}");
}

#[test]
fn csv_round_trip_is_exact() {
    let data = synthesize_dataset(50, 0.1, 9).unwrap();
    let scaled = Scaler::fit(&data).unwrap().transform(&data).unwrap();
    for d in [&data, &scaled] {
        let mut buf = Vec::new();
        write_csv(d, &mut buf).unwrap();
        let back = load_csv(buf.as_slice(), &HEART_FEATURES).unwrap();
        assert_eq!(&back, d);
    }
}
