//! Gradient-boosted trees with logistic loss.
//!
//! Each round fits a regression tree to the residuals `y − p` with
//! variance-reduction splits and sets every leaf to the Newton step
//! `Σ(y − p) / Σ p(1 − p)`. No λ/γ regularization.

use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use super::BaselineError;
use crate::data::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Shrinkage applied to every tree's output.
    pub eta: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 3,
            min_leaf: 1,
            eta: 0.1,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedTrees {
    initial_score: f64,
    trees: Vec<DecisionTree>,
    eta: f64,
}

impl BoostedTrees {
    pub fn fit(train: &Dataset, params: &BoostParams) -> Result<Self, BaselineError> {
        if train.n_rows() == 0 {
            return Err(BaselineError::EmptyDataset);
        }
        if !(params.eta.is_finite() && params.eta >= 0.0) {
            return Err(BaselineError::InvalidParameter(format!(
                "eta must be a finite non-negative number, got {}",
                params.eta
            )));
        }
        let [n0, n1] = train.class_counts();
        if n0 == 0 || n1 == 0 {
            return Err(BaselineError::SingleClass);
        }
        let initial_score = (n1 as f64 / n0 as f64).ln();
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            min_leaf: params.min_leaf,
        };
        let mut scores = vec![initial_score; train.n_rows()];
        let mut trees = Vec::with_capacity(params.n_trees);
        let mut residual = vec![0.0; train.n_rows()];
        let mut hessian = vec![0.0; train.n_rows()];
        for _ in 0..params.n_trees {
            for (i, (&s, &y)) in scores.iter().zip(train.targets()).enumerate() {
                let p = sigmoid(s);
                residual[i] = y as f64 - p;
                hessian[i] = p * (1.0 - p);
            }
            let tree = DecisionTree::fit_newton(train, &residual, &hessian, &tree_params);
            for (s, row) in scores.iter_mut().zip(train.rows()) {
                *s += params.eta * tree.value(row);
            }
            trees.push(tree);
        }
        Ok(Self {
            initial_score,
            trees,
            eta: params.eta,
        })
    }

    /// Log-odds of class 1 in the training set.
    pub fn initial_score(&self) -> f64 {
        self.initial_score
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Raw score after the first `k` trees (clamped to the ensemble size).
    pub fn staged_score(&self, row: &[f64], k: usize) -> f64 {
        self.trees[..k.min(self.trees.len())]
            .iter()
            .fold(self.initial_score, |s, t| s + self.eta * t.value(row))
    }

    pub fn staged_probability(&self, row: &[f64], k: usize) -> f64 {
        sigmoid(self.staged_score(row, k))
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        self.staged_probability(row, self.trees.len())
    }

    /// Class 1 when the probability exceeds 0.5.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        u8::from(self.probability(row) > 0.5)
    }

    pub fn staged_predict(&self, data: &Dataset, k: usize) -> Vec<u8> {
        data.rows().map(|r| u8::from(self.staged_probability(r, k) > 0.5)).collect()
    }

    pub fn predict(&self, data: &Dataset) -> Vec<u8> {
        data.rows().map(|r| self.predict_row(r)).collect()
    }

    /// Mean logistic loss on `data` after `k` trees.
    pub fn staged_log_loss(&self, data: &Dataset, k: usize) -> f64 {
        let total: f64 = data
            .rows()
            .zip(data.targets())
            .map(|(r, &y)| {
                let s = self.staged_score(r, k);
                // log(1 + e^s) − y·s, computed without overflow.
                let softplus = if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
                softplus - y as f64 * s
            })
            .sum();
        total / data.n_rows() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize_dataset;

    fn one_d(xs: &[f64], ys: &[u8]) -> Dataset {
        Dataset::new(vec!["x".into()], xs.to_vec(), ys.to_vec()).unwrap()
    }

    #[test]
    fn zero_rounds_predict_majority() {
        let d = one_d(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1, 1, 1, 0, 1]);
        let m = BoostedTrees::fit(&d, &BoostParams { n_trees: 0, ..BoostParams::default() }).unwrap();
        assert!((m.initial_score() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(m.predict(&d), vec![1; 5]);
    }

    #[test]
    fn zero_eta_never_moves() {
        let d = synthesize_dataset(80, 0.1, 2).unwrap();
        let m = BoostedTrees::fit(&d, &BoostParams { n_trees: 5, eta: 0.0, ..BoostParams::default() }).unwrap();
        for r in d.rows() {
            for k in 0..=5 {
                assert_eq!(m.staged_score(r, k), m.initial_score());
            }
        }
    }

    #[test]
    fn stumps_separate_one_dimensional_data() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<u8> = (0..20).map(|i| u8::from(i >= 8)).collect();
        let d = one_d(&xs, &ys);
        let params = BoostParams {
            n_trees: 20,
            max_depth: 1,
            min_leaf: 1,
            eta: 0.3,
        };
        let m = BoostedTrees::fit(&d, &params).unwrap();
        assert_eq!(m.predict(&d), ys);
    }

    #[test]
    fn full_stage_equals_prediction() {
        let d = synthesize_dataset(100, 0.05, 4).unwrap();
        let m = BoostedTrees::fit(&d, &BoostParams { n_trees: 12, ..BoostParams::default() }).unwrap();
        assert_eq!(m.staged_predict(&d, 12), m.predict(&d));
    }

    #[test]
    fn training_loss_does_not_increase() {
        for seed in 0..4 {
            let d = synthesize_dataset(150, 0.1, seed).unwrap();
            let m = BoostedTrees::fit(&d, &BoostParams { n_trees: 25, eta: 0.3, ..BoostParams::default() }).unwrap();
            let losses: Vec<f64> = (0..=25).map(|k| m.staged_log_loss(&d, k)).collect();
            for w in losses.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{losses:?}");
            }
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let d = one_d(&[1.0, 2.0], &[1, 1]);
        assert_eq!(BoostedTrees::fit(&d, &BoostParams::default()), Err(BaselineError::SingleClass));
    }
}
