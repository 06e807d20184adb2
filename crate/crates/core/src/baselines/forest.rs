//! Bagged random forest.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, FeatureSampler, TreeParams};
use super::BaselineError;
use crate::data::Dataset;
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features considered at each split.
    pub m_try: usize,
    /// Draw each tree's rows with replacement. Disabling it is mostly useful
    /// for tests.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            m_try: 4,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    tree_seeds: Vec<u64>,
    m_try: usize,
}

impl RandomForest {
    /// Trees are fitted in parallel; tree `t` draws everything from
    /// `derive_seed(params.seed, [t])`, so the thread count does not matter.
    pub fn fit(train: &Dataset, params: &ForestParams) -> Result<Self, BaselineError> {
        let n = train.n_rows();
        if n == 0 {
            return Err(BaselineError::EmptyDataset);
        }
        if params.n_trees == 0 {
            return Err(BaselineError::InvalidParameter("n_trees must be at least 1".into()));
        }
        if params.m_try == 0 || params.m_try > train.n_features() {
            return Err(BaselineError::InvalidParameter(format!(
                "m_try must be in 1..={}, got {}",
                train.n_features(),
                params.m_try
            )));
        }
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
        };
        let tree_seeds: Vec<u64> = (0..params.n_trees as u64)
            .map(|t| derive_seed(params.seed, &[t]))
            .collect();
        let trees = tree_seeds
            .par_iter()
            .map(|&seed| {
                let mut rng = seeded(seed);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let sampler = FeatureSampler {
                    rng: &mut rng,
                    m_try: params.m_try,
                };
                DecisionTree::fit_classifier(train, rows, &tree_params, Some(sampler))
            })
            .collect();
        Ok(Self {
            trees,
            tree_seeds,
            m_try: params.m_try,
        })
    }

    /// Assemble a forest from already fitted trees.
    pub fn from_trees(trees: Vec<DecisionTree>, m_try: usize) -> Self {
        let tree_seeds = vec![0; trees.len()];
        Self {
            trees,
            tree_seeds,
            m_try,
        }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn tree_seeds(&self) -> &[u64] {
        &self.tree_seeds
    }

    pub fn m_try(&self) -> usize {
        self.m_try
    }

    /// Votes for class 0 and class 1.
    pub fn votes(&self, row: &[f64]) -> [usize; 2] {
        let ones = self.trees.iter().filter(|t| t.predict_row(row) == 1).count();
        [self.trees.len() - ones, ones]
    }

    /// Majority vote; ties go to class 0.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let v = self.votes(row);
        u8::from(v[1] > v[0])
    }

    pub fn predict(&self, data: &Dataset) -> Vec<u8> {
        data.rows().map(|r| self.predict_row(r)).collect()
    }
}
