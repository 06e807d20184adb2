use super::{DataError, Dataset};

/// Per-column standardization `(x − mean) / std` using the population
/// standard deviation.
///
/// A column whose training values are all equal is flagged constant and maps
/// to zero instead of being divided by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    means: Vec<f64>,
    stds: Vec<f64>,
    constant: Vec<bool>,
}

impl Scaler {
    pub fn fit(train: &Dataset) -> Result<Self, DataError> {
        let n = train.n_rows();
        if n == 0 {
            return Err(DataError::EmptyDataset);
        }
        let width = train.n_features();
        let mut means = Vec::with_capacity(width);
        let mut stds = Vec::with_capacity(width);
        let mut constant = Vec::with_capacity(width);
        for j in 0..width {
            let col = train.column(j);
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                means.push(first);
                stds.push(0.0);
                constant.push(true);
                continue;
            }
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            means.push(mean);
            stds.push(var.sqrt());
            constant.push(false);
        }
        Ok(Self {
            means,
            stds,
            constant,
        })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Population standard deviations; 0 for constant columns.
    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn is_constant(&self, column: usize) -> bool {
        self.constant[column]
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if self.constant[j] {
                0.0
            } else {
                (*v - self.means[j]) / self.stds[j]
            };
        }
    }

    pub fn transform(&self, d: &Dataset) -> Result<Dataset, DataError> {
        self.check_width(d)?;
        let mut features = d.features().to_vec();
        for row in features.chunks_exact_mut(d.n_features()) {
            self.transform_row(row);
        }
        Ok(d.with_features(features))
    }

    /// Undo [`Scaler::transform`]. Constant columns come back as their training value.
    pub fn inverse_transform(&self, d: &Dataset) -> Result<Dataset, DataError> {
        self.check_width(d)?;
        let mut features = d.features().to_vec();
        for row in features.chunks_exact_mut(d.n_features()) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * self.stds[j] + self.means[j];
            }
        }
        Ok(d.with_features(features))
    }

    fn check_width(&self, d: &Dataset) -> Result<(), DataError> {
        if d.n_features() != self.means.len() {
            return Err(DataError::Shape(format!(
                "scaler fitted on {} columns, dataset has {}",
                self.means.len(),
                d.n_features()
            )));
        }
        Ok(())
    }
}
