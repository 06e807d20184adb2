use serde::{Deserialize, Serialize};

/// Hyperparameters of the encoder classifier and its training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self {
            n_layers: 2,
            d_model: 512,
            n_heads: 8,
            d_ff: 2048,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 50,
            seed: 0,
        }
    }
}

impl TransformerConfig {
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("n_layers", self.n_layers),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
        ] {
            if v < 1 {
                out.push(format!("{name} must be at least 1"));
            }
        }
        if self.n_heads >= 1 && !self.d_model.is_multiple_of(self.n_heads) {
            out.push(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            out.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        out
    }

    pub fn shape(&self, n_features: usize) -> ModelShape {
        ModelShape {
            n_features,
            d_model: self.d_model,
            n_heads: self.n_heads,
            d_ff: self.d_ff,
            n_layers: self.n_layers,
        }
    }
}

/// Architecture-only view of a config: everything that fixes tensor shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub n_features: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub n_layers: usize,
}

impl ModelShape {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(TransformerConfig::default().issues().is_empty());
    }

    #[test]
    fn zero_layers_rejected() {
        let cfg = TransformerConfig {
            n_layers: 0,
            ..Default::default()
        };
        assert_eq!(cfg.issues(), vec!["n_layers must be at least 1".to_string()]);
    }

    #[test]
    fn head_divisibility() {
        let cfg = TransformerConfig {
            d_model: 12,
            n_heads: 8,
            learning_rate: -1.0,
            ..Default::default()
        };
        assert_eq!(cfg.issues().len(), 2);
    }
}
