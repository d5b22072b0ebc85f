//! Stratified k-fold partition of a cohort.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use pomh_core::manifest::ChildRecord;
use pomh_core::seed::{derive, rng, tag_str};
use pomh_learn::cv::stratified_folds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold of each child, aligned with the cohort order.
    pub fold_of: Vec<usize>,
    /// (children, dysgraphic) per fold.
    pub counts: Vec<(usize, usize)>,
}

impl FoldPlan {
    pub fn test_mask(&self, fold: usize) -> Vec<bool> {
        self.fold_of.iter().map(|&f| f == fold).collect()
    }

    pub fn train_mask(&self, fold: usize) -> Vec<bool> {
        self.fold_of.iter().map(|&f| f != fold).collect()
    }
}

pub fn make_folds(children: &[ChildRecord], k: usize, seed: u64) -> Result<FoldPlan> {
    let y: Vec<bool> = children.iter().map(|c| c.dysgraphia).collect();
    let fold_of = stratified_folds(&y, k, &mut rng(derive(seed, tag_str("folds")))).map_err(|e| {
        Error::Config(format!("cannot split {} children into {k} stratified folds: {e}", y.len()))
    })?;
    let mut counts = vec![(0, 0); k];
    for (&f, &yi) in fold_of.iter().zip(&y) {
        counts[f].0 += 1;
        counts[f].1 += yi as usize;
    }
    Ok(FoldPlan { k, fold_of, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cohort(n: usize, n_dys: usize) -> Vec<ChildRecord> {
        (0..n)
            .map(|i| ChildRecord::new(format!("c{i}"), 100, 3, i < n_dys))
            .collect()
    }

    #[test]
    fn full_size_cohort() {
        let plan = make_folds(&cohort(545, 66), 5, 1).unwrap();
        for &(n, d) in &plan.counts {
            assert_eq!(n, 109);
            assert!(d == 13 || d == 14);
        }
    }

    #[test]
    fn forced_stratification() {
        let plan = make_folds(&cohort(10, 5), 5, 3).unwrap();
        assert!(plan.counts.iter().all(|&(n, d)| n == 2 && d == 1));
        assert!(make_folds(&cohort(10, 4), 5, 3).is_err());
    }

    #[test]
    fn seeds_change_partition_not_counts() {
        let c = cohort(200, 24);
        let a = make_folds(&c, 5, 1).unwrap();
        let b = make_folds(&c, 5, 2).unwrap();
        assert_ne!(a.fold_of, b.fold_of);
        let mut ca = a.counts.clone();
        let mut cb = b.counts.clone();
        ca.sort();
        cb.sort();
        assert_eq!(ca, cb);
        let plan = make_folds(&c, 5, 1).unwrap();
        let total: usize = (0..5).map(|f| plan.test_mask(f).iter().filter(|&&m| m).count()).sum();
        assert_eq!(total, 200);
    }
}
