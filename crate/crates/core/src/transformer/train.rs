use std::time::Instant;

use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamState};
use super::model::{loss_and_gradients, predict};
use super::params::ModelParams;
use super::{TrainError, TransformerConfig};
use crate::data::Dataset;
use crate::rng::{derive_seed, seeded, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss of each epoch (row-weighted over its minibatches).
    pub epoch_loss: Vec<f64>,
    /// Validation accuracy after each epoch; empty when no validation set was given.
    pub val_accuracy: Vec<f64>,
    /// Optimizer steps taken.
    pub steps: usize,
    pub wall_seconds: f64,
}

pub fn accuracy(params: &ModelParams, data: &Dataset) -> f64 {
    if data.n_rows() == 0 {
        return 0.0;
    }
    let pred = predict(params, data);
    let hits = pred.labels.iter().zip(data.targets()).filter(|(a, b)| a == b).count();
    hits as f64 / data.n_rows() as f64
}

/// Train from a seeded initialization with Adam on shuffled minibatches.
///
/// The final partial batch of each epoch is kept. Identical inputs give
/// bit-identical results.
pub fn train(
    cfg: &TransformerConfig,
    train_set: &Dataset,
    val: Option<&Dataset>,
) -> Result<(ModelParams, TrainReport), TrainError> {
    let issues = cfg.issues();
    if !issues.is_empty() {
        return Err(TrainError::InvalidConfig(issues));
    }
    if train_set.class_counts().contains(&0) {
        return Err(TrainError::SingleClass);
    }
    let width = train_set.n_features();
    if let Some(v) = val {
        if v.n_features() != width {
            return Err(TrainError::Shape("validation width differs from training width".into()));
        }
    }
    let start = Instant::now();
    let mut params = ModelParams::init(cfg.shape(width), derive_seed(cfg.seed, &[stream::INIT]));
    let mut adam = AdamState::new(params.layout.total());
    let mut rng = seeded(derive_seed(cfg.seed, &[stream::SHUFFLE]));
    let mut order: Vec<usize> = (0..train_set.n_rows()).collect();
    let mut report = TrainReport {
        epoch_loss: Vec::with_capacity(cfg.epochs),
        val_accuracy: Vec::with_capacity(cfg.epochs),
        steps: 0,
        wall_seconds: 0.0,
    };
    let mut inputs = Vec::with_capacity(cfg.batch_size * width);
    let mut labels = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            inputs.clear();
            labels.clear();
            for &i in batch {
                inputs.extend_from_slice(train_set.row(i));
                labels.push(train_set.targets()[i]);
            }
            let (loss, grads) = loss_and_gradients(&params, &inputs, &labels).map_err(|e| match e {
                TrainError::NonFiniteLoss => TrainError::Diverged {
                    epoch,
                    step: report.steps,
                },
                other => other,
            })?;
            adam_step(&mut params.values, &grads, &mut adam, cfg.learning_rate);
            report.steps += 1;
            if !params.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    step: report.steps,
                });
            }
            total += loss * batch.len() as f64;
        }
        report.epoch_loss.push(total / train_set.n_rows() as f64);
        if let Some(v) = val {
            report.val_accuracy.push(accuracy(&params, v));
        }
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((params, report))
}
