//! Train/test splitting at trajectory granularity, so no window of the test
//! set shares samples with the training set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DataError;

/// Partitions trajectory indices `0..count` into `(train, test)`. The test
/// set gets `round(test_fraction * count)` trajectories, at least one; the
/// training set also keeps at least one. Deterministic in `seed`.
pub fn split_trajectories(
    count: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if count < 2 {
        return Err(DataError::Invalid(format!(
            "need at least 2 trajectories to split, got {count}"
        )));
    }
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(DataError::Invalid(format!(
            "test fraction must lie in [0, 1], got {test_fraction}"
        )));
    }
    let n_test = ((test_fraction * count as f64).round() as usize)
        .max(1)
        .min(count - 1);
    let mut indices: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let test: Vec<usize> = indices[..n_test].to_vec();
    let mut train: Vec<usize> = indices[n_test..].to_vec();
    let mut test = test;
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_a_partition() {
        let (train, test) = split_trajectories(10, 0.3, 1).unwrap();
        assert_eq!(test.len(), 3);
        assert_eq!(train.len(), 7);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn both_sides_nonempty_at_extremes() {
        let (train, test) = split_trajectories(5, 0.0, 0).unwrap();
        assert_eq!(test.len(), 1);
        assert_eq!(train.len(), 4);
        let (train, test) = split_trajectories(5, 1.0, 0).unwrap();
        assert_eq!(train.len(), 1);
        assert_eq!(test.len(), 4);
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(
            split_trajectories(20, 0.25, 9).unwrap(),
            split_trajectories(20, 0.25, 9).unwrap()
        );
        assert_ne!(
            split_trajectories(20, 0.25, 9).unwrap(),
            split_trajectories(20, 0.25, 10).unwrap()
        );
    }

    #[test]
    fn single_trajectory_rejected() {
        assert!(split_trajectories(1, 0.5, 0).is_err());
        assert!(split_trajectories(4, 1.5, 0).is_err());
    }
}
