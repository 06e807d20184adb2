use std::io::Write;

use super::{DataError, Dataset, TARGET_COLUMN};

/// Symmetric matrix of Pearson coefficients over every feature plus the target.
///
/// Constant columns correlate 0 with everything else and 1 with themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    names: Vec<String>,
    values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size() + j]
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `n` off-diagonal pairs with the largest `|r|`, strongest first.
    /// Ties keep row-major order.
    pub fn strongest_pairs(&self, n: usize) -> Vec<(usize, usize, f64)> {
        let k = self.size();
        let mut pairs: Vec<(usize, usize, f64)> = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, self.get(i, j)))
            .collect();
        pairs.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()));
        pairs.truncate(n);
        pairs
    }

    /// CSV with a header row and a leading name column.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), DataError> {
        let mut writer = csv::Writer::from_writer(sink);
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        writer.write_record(&header)?;
        for (i, name) in self.names.iter().enumerate() {
            let mut record = vec![name.clone()];
            record.extend((0..self.size()).map(|j| format!("{:.6}", self.get(i, j))));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

// Summing a sorted copy makes the result independent of row order.
fn order_free_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Pearson coefficient, or `None` when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson inputs differ in length");
    let n = x.len() as f64;
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if x.is_empty() || constant(x) || constant(y) {
        return None;
    }
    let mx = order_free_sum(x.to_vec()) / n;
    let my = order_free_sum(y.to_vec()) / n;
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxy = order_free_sum(dx.iter().zip(&dy).map(|(a, b)| a * b).collect());
    let sxx = order_free_sum(dx.iter().map(|a| a * a).collect());
    let syy = order_free_sum(dy.iter().map(|b| b * b).collect());
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson_matrix(d: &Dataset) -> Result<CorrelationMatrix, DataError> {
    if d.n_rows() < 2 {
        return Err(DataError::TooFewRows {
            needed: 2,
            found: d.n_rows(),
        });
    }
    let mut columns: Vec<Vec<f64>> = (0..d.n_features()).map(|j| d.column(j)).collect();
    columns.push(d.targets().iter().map(|&t| t as f64).collect());
    let mut names = d.feature_names().to_vec();
    names.push(TARGET_COLUMN.to_string());

    let k = columns.len();
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        values[i * k + i] = 1.0;
        for j in i + 1..k {
            let r = pearson(&columns[i], &columns[j]).unwrap_or(0.0);
            values[i * k + j] = r;
            values[j * k + i] = r;
        }
    }
    Ok(CorrelationMatrix { names, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_correlations() {
        let x = [1.0, 4.0, 2.0, 8.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &x), Some(1.0));
        assert_eq!(pearson(&x, &neg), Some(-1.0));
    }

    #[test]
    fn three_point_value() {
        // Oracle: mean-centred x = (−1,0,1), y = (−4/3,−1/3,5/3);
        // sxy = 3, sxx = 2, syy = 14/3 → r = 3/√(28/3).
        let expected = 3.0 / (28.0f64 / 3.0).sqrt();
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - expected).abs() < 1e-12);
        assert!((r - 0.9820).abs() < 5e-5);
    }

    #[test]
    fn constant_column_convention() {
        let d = Dataset::new(
            vec!["a".into(), "flat".into()],
            vec![1.0, 3.0, 2.0, 3.0, 4.0, 3.0],
            vec![0, 0, 1],
        )
        .unwrap();
        let m = pearson_matrix(&d).unwrap();
        assert_eq!(m.size(), 3);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 2), 0.0);
        assert_eq!(m.names()[2], "target");
    }

    #[test]
    fn needs_two_rows() {
        let d = Dataset::new(vec!["a".into()], vec![1.0], vec![1]).unwrap();
        assert!(matches!(pearson_matrix(&d), Err(DataError::TooFewRows { .. })));
    }
}
