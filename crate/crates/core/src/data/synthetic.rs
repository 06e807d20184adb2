use rand::Rng;

use super::{DataError, Dataset, HEART_FEATURES};
use crate::rng::seeded;

/// Label produced by the generating rule for a row in canonical column order.
///
/// The score `1.5·[cp ≥ 2] − 1.5·[ca ≥ 2] − exang + [thal = 2] + 0.75` is
/// never zero on the generator's support, so the rule is unambiguous. About
/// 63% of generated rows are positive.
pub fn synthetic_rule(row: &[f64]) -> u8 {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    let (cp, exang, ca, thal) = (row[2], row[8], row[11], row[12]);
    let score = 1.5 * ind(cp >= 2.0) - 1.5 * ind(ca >= 2.0) - exang + ind(thal == 2.0) + 0.75;
    u8::from(score > 0.0)
}

/// Desk-scale stand-in for clinical data.
///
/// Features are drawn independently within the ranges of the heart-disease
/// schema; the label is [`synthetic_rule`] flipped with probability `noise`,
/// so the best achievable accuracy is `1 − noise`.
pub fn synthesize_dataset(n_rows: usize, noise: f64, seed: u64) -> Result<Dataset, DataError> {
    if n_rows < 20 {
        return Err(DataError::TooFewRows {
            needed: 20,
            found: n_rows,
        });
    }
    if !(0.0..=0.5).contains(&noise) {
        return Err(DataError::InvalidParameter(format!(
            "label noise must lie in [0, 0.5], got {noise}"
        )));
    }
    let mut rng = seeded(seed);
    let mut features = Vec::with_capacity(n_rows * HEART_FEATURES.len());
    let mut targets = Vec::with_capacity(n_rows);
    let mut row = [0.0; 13];
    for _ in 0..n_rows {
        let mut int = |lo: i32, hi: i32| rng.gen_range(lo..=hi) as f64;
        row[0] = int(29, 77); // age
        row[3] = int(94, 200); // trestbps
        row[4] = int(126, 564); // chol
        row[7] = int(71, 202); // thalachh
        row[2] = int(0, 3); // cp
        row[6] = int(0, 2); // restecg
        row[10] = int(0, 2); // slope
        row[11] = int(0, 4); // ca
        row[12] = int(0, 3); // thal
        row[1] = f64::from(u8::from(rng.gen_bool(0.68))); // sex
        row[5] = f64::from(u8::from(rng.gen_bool(0.15))); // fbs
        row[8] = f64::from(u8::from(rng.gen_bool(0.33))); // exang
        row[9] = f64::from(rng.gen_range(0..=40u32)) / 10.0; // oldpeak
        let clean = synthetic_rule(&row);
        let label = if rng.gen::<f64>() < noise { 1 - clean } else { clean };
        features.extend_from_slice(&row);
        targets.push(label);
    }
    Dataset::new(
        HEART_FEATURES.iter().map(|s| s.to_string()).collect(),
        features,
        targets,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_labels_follow_the_rule() {
        let d = synthesize_dataset(200, 0.0, 1).unwrap();
        let hits = d
            .rows()
            .zip(d.targets())
            .filter(|(r, &t)| synthetic_rule(r) == t)
            .count();
        assert_eq!(hits, 200);
        let [neg, pos] = d.class_counts();
        assert!(neg > 0 && pos > 0);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(
            synthesize_dataset(200, 0.0, 1).unwrap(),
            synthesize_dataset(200, 0.0, 1).unwrap()
        );
        assert_ne!(
            synthesize_dataset(200, 0.0, 1).unwrap(),
            synthesize_dataset(200, 0.0, 2).unwrap()
        );
    }

    #[test]
    fn flip_fraction_matches_noise() {
        let d = synthesize_dataset(1000, 0.1, 3).unwrap();
        let flipped = d
            .rows()
            .zip(d.targets())
            .filter(|(r, &t)| synthetic_rule(r) != t)
            .count();
        let frac = flipped as f64 / 1000.0;
        assert!((frac - 0.1).abs() <= 0.03, "flip fraction {frac}");
    }

    #[test]
    fn values_stay_in_schema_ranges() {
        let d = synthesize_dataset(500, 0.05, 9).unwrap();
        let ranges = [
            (29.0, 77.0), (0.0, 1.0), (0.0, 3.0), (94.0, 200.0), (126.0, 564.0), (0.0, 1.0),
            (0.0, 2.0), (71.0, 202.0), (0.0, 1.0), (0.0, 4.0), (0.0, 2.0), (0.0, 4.0), (0.0, 3.0),
        ];
        for row in d.rows() {
            for (v, (lo, hi)) in row.iter().zip(ranges) {
                assert!(*v >= lo && *v <= hi);
            }
        }
    }

    #[test]
    fn rejects_tiny_requests() {
        assert!(matches!(
            synthesize_dataset(19, 0.0, 1),
            Err(DataError::TooFewRows { .. })
        ));
    }
}
