use rand::seq::SliceRandom;

use super::{DataError, Dataset};
use crate::rng::seeded;

/// Row indices of a stratified split, each side in ascending order.
///
/// Each class contributes `round(n_class * test_fraction)` rows to the test
/// side and must keep at least one row on each side.
pub fn stratified_split_indices(
    d: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidParameter(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = seeded(seed);
    let mut train = Vec::with_capacity(d.n_rows());
    let mut test = Vec::new();
    for class in 0..=1u8 {
        let mut members: Vec<usize> = (0..d.n_rows()).filter(|&i| d.targets()[i] == class).collect();
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        if n_test == 0 || n_test >= members.len() {
            return Err(DataError::ClassTooSmall { class });
        }
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Split into `(train, test)` preserving class proportions. Deterministic per seed.
pub fn stratified_split(
    d: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    let (train, test) = stratified_split_indices(d, test_fraction, seed)?;
    Ok((d.select(&train), d.select(&test)))
}
