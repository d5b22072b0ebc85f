//! ROC curves, trapezoidal AUC and the operating point nearest to (0, 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Predicted positive iff score > cutoff; `-inf` for the all-positive point
    /// (`null` in JSON).
    #[serde(with = "cutoff_json")]
    pub cutoff: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub accuracy: f64,
}

mod cutoff_json {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &f64, s: S) -> Result<S::Ok, S::Error> {
        c.is_finite().then_some(*c).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// Sorted by increasing cutoff.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub operating: RocPoint,
}

pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Evaluation("ROC needs both classes".into()));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Evaluation(format!("non-finite score {s}")));
    }
    let mut cutoffs: Vec<f64> = scores.iter().copied().chain([0.0, 1.0]).collect();
    cutoffs.sort_by(|a, b| a.total_cmp(b));
    cutoffs.dedup();

    // scores sorted once; counts above a cutoff by binary search
    let mut pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let mut neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    pos.sort_by(|a, b| a.total_cmp(b));
    neg.sort_by(|a, b| a.total_cmp(b));
    let above = |v: &[f64], c: f64| v.len() - v.partition_point(|&s| s <= c);
    let n = labels.len() as f64;
    let point = |c: f64| {
        let tp = above(&pos, c);
        let fp = above(&neg, c);
        RocPoint {
            cutoff: c,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            accuracy: (tp + (n_neg - fp)) as f64 / n,
        }
    };
    let mut points: Vec<RocPoint> = cutoffs.iter().map(|&c| point(c)).collect();
    if points[0].fpr < 1.0 || points[0].tpr < 1.0 {
        points.insert(0, point(f64::NEG_INFINITY));
    }
    // trapezoid over the curve from (0,0) to (1,1)
    let auc = points
        .windows(2)
        .map(|w| (w[0].fpr - w[1].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum();
    let operating = operating_point(&points);
    Ok(RocResult { points, auc, operating })
}

/// Point closest to (0, 1); ties go to the smaller false positive rate.
pub fn operating_point(points: &[RocPoint]) -> RocPoint {
    let dist = |p: &RocPoint| p.fpr * p.fpr + (1.0 - p.tpr) * (1.0 - p.tpr);
    *points
        .iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)).then(a.fpr.total_cmp(&b.fpr)))
        .expect("non-empty ROC")
}

/// Pairwise concordance with ties counted one half.
pub fn concordance(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}
