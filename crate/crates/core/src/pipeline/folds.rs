//! Deterministic stratified k-fold splitting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::MathError;

/// Partition indices into k disjoint test folds, stratified by class.
///
/// Per-fold class counts are obtained by dealing the class-sorted label
/// sequence round-robin over folds, so both fold sizes and per-fold
/// class counts differ by at most one from proportional allocation.
/// Identical (labels, k, seed) always produce identical folds.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, MathError> {
    if k < 2 {
        return Err(MathError::input(format!("k must be >= 2, got {k}")));
    }
    let n = labels.len();
    let mut members: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        if y > 1 {
            return Err(MathError::input(format!("label {y} is not 0/1")));
        }
        members[y as usize].push(i);
    }
    for (class, m) in members.iter().enumerate() {
        if m.len() < k {
            return Err(MathError::input(format!(
                "class {class} has {} members, fewer than k = {k}",
                m.len()
            )));
        }
    }

    // counts[fold][class] from dealing positions of the sorted label
    // sequence (all zeros, then all ones) to folds by position % k
    let n0 = members[0].len();
    let mut counts = vec![[0usize; 2]; k];
    for p in 0..n {
        let class = usize::from(p >= n0);
        counts[p % k][class] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    for class in 0..2 {
        let mut pool = members[class].clone();
        // Fisher-Yates on the seeded stream
        for i in (1..pool.len()).rev() {
            let j = (rng.gen::<u64>() % (i as u64 + 1)) as usize;
            pool.swap(i, j);
        }
        let mut cursor = 0;
        for (fold, count) in counts.iter().enumerate() {
            let take = count[class];
            folds[fold].extend_from_slice(&pool[cursor..cursor + take]);
            cursor += take;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}
