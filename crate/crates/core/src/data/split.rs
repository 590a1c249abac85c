use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train_scenes: Vec<String>,
    pub test_scenes: Vec<String>,
    pub seed: u64,
}

/// Seeded shuffle; the first `train_count` scenes train, the rest test.
pub fn split_dataset(scenes: &[String], train_count: usize, seed: u64) -> Result<DatasetSplit> {
    if train_count == 0 || train_count >= scenes.len() {
        return Err(Error::BadCount { train: train_count, total: scenes.len() });
    }
    let mut order = scenes.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_scenes = order.split_off(train_count);
    Ok(DatasetSplit { train_scenes: order, test_scenes, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("scene_{i:02}")).collect()
    }

    #[test]
    fn sizes_and_disjointness() {
        for (total, train) in [(39, 31), (63, 51)] {
            let s = split_dataset(&names(total), train, 7).unwrap();
            assert_eq!((s.train_scenes.len(), s.test_scenes.len()), (train, total - train));
            assert!(s.train_scenes.iter().all(|x| !s.test_scenes.contains(x)));
        }
    }

    #[test]
    fn reproducible_from_seed() {
        assert_eq!(split_dataset(&names(20), 15, 3).unwrap(), split_dataset(&names(20), 15, 3).unwrap());
    }

    #[test]
    fn bad_counts() {
        assert!(matches!(split_dataset(&names(5), 0, 1), Err(Error::BadCount { .. })));
        assert!(matches!(split_dataset(&names(5), 5, 1), Err(Error::BadCount { .. })));
    }
}
