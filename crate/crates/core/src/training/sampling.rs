use rand::distributions::WeightedIndex;
use rand::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Result, TrainError};

/// Per-sample selection probabilities for informative sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWeights(Vec<f64>);

impl SampleWeights {
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `n` indices drawn with replacement, each with probability equal to its weight.
    pub fn draw(&self, n: usize, rng: &mut impl Rng) -> Vec<usize> {
        let dist = WeightedIndex::new(&self.0).expect("weights are normalized and non-negative");
        (0..n).map(|_| dist.sample(rng)).collect()
    }
}

/// Normalizes losses into weights; all-zero losses give the uniform distribution.
pub fn update_sample_weights(losses: &[f64]) -> Result<SampleWeights> {
    if losses.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if let Some((index, &value)) = losses.iter().enumerate().find(|(_, l)| !(l.is_finite() && **l >= 0.0)) {
        return Err(TrainError::InvalidLoss { index, value });
    }
    let total: f64 = losses.iter().sum();
    if total == 0.0 {
        return Ok(SampleWeights::uniform(losses.len()));
    }
    Ok(SampleWeights(losses.iter().map(|l| l / total).collect()))
}

/// Fisher–Yates permutation of `0..n`.
pub fn shuffle_epoch(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Shuffles each class separately and interleaves them round-robin, so every
/// window of `classes` consecutive draws covers as many classes as remain.
pub fn balanced_order(labels: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        queues[l].push(i);
    }
    for q in &mut queues {
        q.shuffle(rng);
    }
    let longest = queues.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest).flat_map(|k| queues.iter().filter_map(move |q| q.get(k).copied())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn weights_from_losses() {
        assert_eq!(update_sample_weights(&[1.0; 4]).unwrap().as_slice(), &[0.25; 4]);
        assert_eq!(update_sample_weights(&[3.0, 1.0]).unwrap().as_slice(), &[0.75, 0.25]);
        assert_eq!(update_sample_weights(&[0.0; 3]).unwrap(), SampleWeights::uniform(3));
        assert!(matches!(update_sample_weights(&[1.0, -0.5]), Err(TrainError::InvalidLoss { index: 1, .. })));
        assert!(update_sample_weights(&[f64::NAN]).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let n = rng.gen_range(1..50);
            let losses: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
            let w = update_sample_weights(&losses).unwrap();
            assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn single_item_shuffle() {
        assert_eq!(shuffle_epoch(1, &mut ChaCha8Rng::seed_from_u64(3)), vec![0]);
        let a = shuffle_epoch(9, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, shuffle_epoch(9, &mut ChaCha8Rng::seed_from_u64(3)));
    }

    #[test]
    fn all_24_permutations_equally_likely() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut freq: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..10_000 {
            *freq.entry(shuffle_epoch(4, &mut rng)).or_default() += 1;
        }
        assert_eq!(freq.len(), 24);
        for &c in freq.values() {
            assert!((c as f64 / 10_000.0 - 1.0 / 24.0).abs() <= 0.01);
        }
    }

    #[test]
    fn heavier_samples_drawn_more() {
        let w = update_sample_weights(&[9.0, 1.0]).unwrap();
        let draws = w.draw(10_000, &mut ChaCha8Rng::seed_from_u64(1));
        let zeros = draws.iter().filter(|&&i| i == 0).count() as f64 / 10_000.0;
        assert!((zeros - 0.9).abs() < 0.02);
    }

    #[test]
    fn balanced_order_interleaves() {
        let labels = [0, 0, 0, 1, 1, 2];
        let order = balanced_order(&labels, &mut ChaCha8Rng::seed_from_u64(5));
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        let first: Vec<usize> = order[..3].iter().map(|&i| labels[i]).collect();
        assert_eq!(first, vec![0, 1, 2]);
    }
}
