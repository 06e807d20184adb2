//! Tabular heart-disease-schema data: ingestion, splitting, standardization,
//! correlation analysis and a synthetic generator.

mod correlation;
mod csv_io;
mod scaler;
mod split;
mod synthetic;

pub use correlation::{pearson, pearson_matrix, CorrelationMatrix};
pub use csv_io::{load_csv, load_csv_available, write_csv};
pub use scaler::Scaler;
pub use split::{stratified_split, stratified_split_indices};
pub use synthetic::{synthesize_dataset, synthetic_rule};

use thiserror::Error;

/// Canonical feature order. Loaded files are reordered to match it.
pub const HEART_FEATURES: [&str; 13] = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg", "thalachh", "exang", "oldpeak",
    "slope", "ca", "thal",
];

/// Name of the label column (1 = heart disease, 0 = none).
pub const TARGET_COLUMN: &str = "target";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column \"{0}\"")]
    MissingColumn(String),
    #[error("row {row}: column \"{column}\" is not a finite number")]
    NonNumericCell { row: usize, column: String },
    #[error("row {row}: target must be 0 or 1, found {value:?}")]
    InvalidTarget { row: usize, value: String },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("class {class} has too few rows to appear on both sides of the split")]
    ClassTooSmall { class: u8 },
    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rows of numeric features plus a binary target.
///
/// Features are stored row-major. Values are immutable once constructed;
/// transformations return new datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    features: Vec<f64>,
    targets: Vec<u8>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<f64>,
        targets: Vec<u8>,
    ) -> Result<Self, DataError> {
        let width = feature_names.len();
        if width == 0 {
            return Err(DataError::Shape("dataset needs at least one feature".into()));
        }
        if features.len() != width * targets.len() {
            return Err(DataError::Shape(format!(
                "{} feature values for {} rows of width {}",
                features.len(),
                targets.len(),
                width
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonNumericCell {
                row: pos / width,
                column: feature_names[pos % width].clone(),
            });
        }
        if let Some(row) = targets.iter().position(|&t| t > 1) {
            return Err(DataError::InvalidTarget {
                row,
                value: targets[row].to_string(),
            });
        }
        Ok(Self {
            feature_names,
            features,
            targets,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Row-major feature matrix.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn targets(&self) -> &[u8] {
        &self.targets
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_features();
        &self.features[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Number of rows labelled 0 and 1.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.targets.iter().filter(|&&t| t == 1).count();
        [self.targets.len() - ones, ones]
    }

    /// New dataset made of the given rows, in the given order. Indices may repeat.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features());
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            features,
            targets,
        }
    }

    pub(crate) fn with_features(&self, features: Vec<f64>) -> Dataset {
        debug_assert_eq!(features.len(), self.features.len());
        Dataset {
            feature_names: self.feature_names.clone(),
            features,
            targets: self.targets.clone(),
        }
    }
}
