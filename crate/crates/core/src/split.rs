//! Train/valid/test partition in 8:1:1.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
    /// `None` for a split shipped with the data.
    pub seed: Option<u64>,
}

/// Sizes for `n` records: train and valid are rounded to nearest, test
/// takes the remainder.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (8 * n + 5) / 10;
    let valid = ((n + 5) / 10).min(n - train);
    (train, valid, n - train - valid)
}

pub fn split_dataset(ids: &[String], seed: u64) -> DatasetSplit {
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, valid, _) = split_sizes(ids.len());
    let test = shuffled.split_off(train + valid);
    let valid = shuffled.split_off(train);
    DatasetSplit { train: shuffled, valid, test, seed: Some(seed) }
}

/// Split from per-record labels ("train", "valid"/"val", "test"), keeping
/// the order of `ids`. Ids without a label go to train.
pub fn shipped_split(ids: &[String], labels: &BTreeMap<String, String>) -> DatasetSplit {
    let mut split = DatasetSplit { train: Vec::new(), valid: Vec::new(), test: Vec::new(), seed: None };
    for id in ids {
        match labels.get(id).map(String::as_str) {
            Some("valid" | "val" | "validation" | "dev") => split.valid.push(id.clone()),
            Some("test") => split.test.push(id.clone()),
            _ => split.train.push(id.clone()),
        }
    }
    split
}
