//! Quantile thresholds per symbol and positive-symbol proportions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use pomh_core::SymbolId;

/// 1-based rank `ceil(alpha * n)`, robust to representation error in the
/// product (e.g. `0.7 * 10`).
pub fn quantile_rank(alpha: f64, n: usize) -> usize {
    let x = alpha * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// Order statistic at rank `ceil(alpha * n)` of the training probabilities.
pub fn quantile_threshold(probs: &[f64], alpha: f64) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::InvalidParameter("no training probabilities".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1)")));
    }
    let mut sorted = probs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(sorted[quantile_rank(alpha, sorted.len()) - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingParams {
    pub alpha: f64,
    pub thresholds: BTreeMap<SymbolId, f64>,
}

impl CountingParams {
    pub fn fit(train_probs: &BTreeMap<SymbolId, Vec<f64>>, alpha: f64) -> Result<Self> {
        let thresholds = train_probs
            .iter()
            .filter(|(_, p)| !p.is_empty())
            .map(|(&s, p)| Ok((s, quantile_threshold(p, alpha)?)))
            .collect::<Result<_>>()?;
        Ok(CountingParams { alpha, thresholds })
    }

    /// Whether a symbol probability is counted positive; `None` if the
    /// symbol has no threshold.
    pub fn is_positive(&self, symbol: SymbolId, p: f64) -> Option<bool> {
        self.thresholds.get(&symbol).map(|&t| p >= t)
    }

    /// `(positives, counted)` over a child's symbol probabilities.
    pub fn count<'a>(&self, probs: impl IntoIterator<Item = (SymbolId, f64)> + 'a) -> (usize, usize) {
        probs
            .into_iter()
            .filter_map(|(s, p)| self.is_positive(s, p))
            .fold((0, 0), |(pos, n), v| (pos + v as usize, n + 1))
    }

    /// Positive-symbol proportion, `None` when nothing is counted.
    pub fn score<'a>(&self, probs: impl IntoIterator<Item = (SymbolId, f64)> + 'a) -> Option<f64> {
        let (pos, n) = self.count(probs);
        (n > 0).then(|| pos as f64 / n as f64)
    }
}

/// Share of positive votes, for first layers that emit binary votes.
pub fn vote_share(votes: &[bool]) -> Option<f64> {
    (!votes.is_empty()).then(|| votes.iter().filter(|&&v| v).count() as f64 / votes.len() as f64)
}
