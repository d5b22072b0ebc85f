//! Stratified fold assignment.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use pomh_core::seed::Rng;

/// Fold index (`0..k`) of every row. Each class is shuffled, positives are
/// dealt first and negatives continue the round-robin, so fold sizes differ
/// by at most one and every fold holds `floor` or `ceil` of each class share.
pub fn stratified_folds(y: &[bool], k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need k >= 2 folds, got {k}")));
    }
    let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let mut neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    if pos.len() < k || neg.len() < k {
        return Err(Error::TooFewRows {
            needed: k,
            got: pos.len().min(neg.len()),
        });
    }
    pos.shuffle(rng);
    neg.shuffle(rng);
    let mut fold = vec![0; y.len()];
    for (j, &i) in pos.iter().chain(&neg).enumerate() {
        fold[i] = j % k;
    }
    Ok(fold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pomh_core::seed::rng;

    #[test]
    fn balanced_counts() {
        let y: Vec<bool> = (0..545).map(|i| i < 66).collect();
        let f = stratified_folds(&y, 5, &mut rng(1)).unwrap();
        for k in 0..5 {
            let n = f.iter().filter(|&&v| v == k).count();
            let d = (0..545).filter(|&i| f[i] == k && y[i]).count();
            assert_eq!(n, 109);
            assert!(d == 13 || d == 14);
        }
        let y: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let f = stratified_folds(&y, 5, &mut rng(2)).unwrap();
        for k in 0..5 {
            assert_eq!((0..10).filter(|&i| f[i] == k && y[i]).count(), 1);
        }
        assert!(stratified_folds(&y[..6], 5, &mut rng(2)).is_err());
    }
}
