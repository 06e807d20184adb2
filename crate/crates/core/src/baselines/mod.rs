//! Tree baselines: a CART decision tree, a bagged random forest and a
//! gradient-boosted ensemble with logistic loss.

mod boosted;
mod forest;
mod tree;

pub use boosted::{BoostParams, BoostedTrees};
pub use forest::{ForestParams, RandomForest};
pub use tree::{gini, DecisionTree, Node, TreeParams};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("training set has no rows")]
    EmptyDataset,
    #[error("training set contains a single class")]
    SingleClass,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
