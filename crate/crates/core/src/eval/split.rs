use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{IntervalSample, Label};

use super::EvalError;

/// `train:test` proportion, e.g. 3:2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub test: u32,
}

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio { train: 3, test: 2 }
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.train, self.test)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_lists(labels: &[Label], rng: &mut ChaCha8Rng) -> [Vec<usize>; 2] {
    let mut lists = [Vec::new(), Vec::new()];
    for (i, l) in labels.iter().enumerate() {
        lists[l.as_u8() as usize].push(i);
    }
    for l in &mut lists {
        l.shuffle(rng);
    }
    lists
}

/// Stratified split over indices into `labels`.
///
/// The train total is `round(N · train / (train + test))`; classes get the
/// floor of their exact share and the remaining slots go to the largest
/// fractional parts (unsafe first on ties). Both index lists are sorted.
pub fn stratified_split_labels(
    labels: &[Label],
    ratio: SplitRatio,
    seed: u64,
) -> Result<Split, EvalError> {
    if labels.len() < 5 {
        return Err(EvalError::TooFewSamples {
            found: labels.len(),
            needed: 5,
        });
    }
    if let Some(first) = labels.first() {
        if labels.iter().all(|l| l == first) {
            return Err(EvalError::MissingClass(*first));
        }
    }
    let denom = u64::from(ratio.train) + u64::from(ratio.test);
    if ratio.train == 0 || ratio.test == 0 {
        return Err(EvalError::InvalidGrid(format!("split ratio {ratio}")));
    }
    let n = labels.len() as u64;
    let total_train = (n * u64::from(ratio.train) + denom / 2) / denom;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lists = class_lists(labels, &mut rng);
    let mut quota = [0u64; 2];
    let mut frac = [0u64; 2];
    for c in 0..2 {
        let exact = lists[c].len() as u64 * u64::from(ratio.train);
        quota[c] = exact / denom;
        frac[c] = exact % denom;
    }
    let mut remaining = total_train.saturating_sub(quota[0] + quota[1]);
    let order = if frac[1] > frac[0] { [1, 0] } else { [0, 1] };
    for c in order {
        if remaining > 0 && frac[c] > 0 {
            quota[c] += 1;
            remaining -= 1;
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..2 {
        let q = quota[c] as usize;
        train.extend_from_slice(&lists[c][..q]);
        test.extend_from_slice(&lists[c][q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

pub fn stratified_split(
    samples: &[IntervalSample],
    ratio: SplitRatio,
    seed: u64,
) -> Result<Split, EvalError> {
    let labels: Vec<Label> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| s.label().ok_or(EvalError::Unlabeled(i)))
        .collect::<Result<_, _>>()?;
    stratified_split_labels(&labels, ratio, seed)
}

/// Fold id for each position in `labels`. Each class is shuffled, the
/// classes are concatenated, and folds are dealt round-robin, so fold sizes
/// differ by at most one and every fold gets its share of each class.
pub fn fold_assignment(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if folds < 2 {
        return Err(EvalError::FoldTooSmall(format!(
            "{folds} folds; need at least 2"
        )));
    }
    if folds > labels.len() {
        return Err(EvalError::FoldTooSmall(format!(
            "{folds} folds for {} samples",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lists = class_lists(labels, &mut rng);
    let mut out = vec![0; labels.len()];
    for (pos, &i) in lists.iter().flatten().enumerate() {
        out[i] = pos % folds;
    }
    Ok(out)
}
