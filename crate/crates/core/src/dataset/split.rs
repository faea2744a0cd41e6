use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-class shuffled split of item indices. Each class contributes
/// `round(class_count · test_fraction)` items to the test side. Both index
/// lists come back sorted.
pub fn stratified_split_indices(labels: &[usize], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    assert!(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must lie in (0, 1)");
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// [`stratified_split_indices`] over items, preserving their relative order.
pub fn stratified_split<T: Clone>(
    items: &[T],
    label: impl Fn(&T) -> usize,
    test_fraction: f64,
    seed: u64,
) -> (Vec<T>, Vec<T>) {
    let labels: Vec<usize> = items.iter().map(label).collect();
    let (train, test) = stratified_split_indices(&labels, test_fraction, seed);
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| items[i].clone()).collect();
    (pick(train), pick(test))
}
