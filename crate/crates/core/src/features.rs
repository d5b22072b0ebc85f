//! Per-(child, symbol) feature rows and their dichotomized form.

use std::collections::BTreeMap;
use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::ChildRecord;
use crate::pomh::{DistanceKind, PomhFit};
use crate::reference::WidthEstimate;
use crate::stats::{mean, median, sample_sd};
use crate::trace::{total_pen_down_time, SymbolId};

/// Last grade of the first school cycle.
pub const CYCLE1_MAX_GRADE: u8 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub child_id: String,
    pub symbol: SymbolId,
    pub w_hat_x: usize,
    pub dist: f64,
    /// Pen-down writing time in seconds.
    pub total_time: f64,
    pub grade: u8,
    pub dysgraphia: bool,
    pub w_hat_y: usize,
    pub saturated_x: bool,
    pub saturated_y: bool,
}

/// Assemble the row for one written symbol; `None` if the child did not
/// write it (missing symbols are never zero-filled).
pub fn build_feature_row(
    child: &ChildRecord,
    symbol: SymbolId,
    fit: &PomhFit,
    w_est: &WidthEstimate,
    dist_kind: DistanceKind,
) -> Option<FeatureRow> {
    let trace = child.trace(symbol)?;
    Some(FeatureRow {
        child_id: child.child_id.clone(),
        symbol,
        w_hat_x: w_est.w_hat_x,
        dist: fit.distance(trace, dist_kind).value,
        total_time: total_pen_down_time(trace),
        grade: child.grade,
        dysgraphia: child.dysgraphia,
        w_hat_y: w_est.w_hat_y,
        saturated_x: w_est.saturated_x,
        saturated_y: w_est.saturated_y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrSec {
    Cycle1,
    Cycle2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrWx {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrSlow {
    Fast,
    Slow,
}

impl GrSec {
    pub fn of_grade(grade: u8) -> Self {
        if grade <= CYCLE1_MAX_GRADE {
            GrSec::Cycle1
        } else {
            GrSec::Cycle2
        }
    }

    /// Treatment coding: 1 for the second level.
    pub fn indicator(self) -> f64 {
        (self == GrSec::Cycle2) as u8 as f64
    }
}

impl GrWx {
    pub fn indicator(self) -> f64 {
        (self == GrWx::Large) as u8 as f64
    }
}

impl GrSlow {
    pub fn indicator(self) -> f64 {
        (self == GrSlow::Slow) as u8 as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomizedRow {
    pub child_id: String,
    pub symbol: SymbolId,
    pub dist_norm: f64,
    pub gr_sec: GrSec,
    pub gr_wx: GrWx,
    pub gr_slow: GrSlow,
    pub dysgraphia: bool,
}

/// Training-fold statistics of one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolStats {
    pub median_w_hat_x: f64,
    pub mean_total_time: f64,
    pub dist_mean: f64,
    pub dist_sd: f64,
    pub n: usize,
}

/// Dichotomization thresholds, fitted on training rows only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingStats {
    pub per_symbol: BTreeMap<SymbolId, SymbolStats>,
}

impl TrainingStats {
    pub fn fit(training_rows: &[FeatureRow]) -> Self {
        let mut grouped: BTreeMap<SymbolId, Vec<&FeatureRow>> = BTreeMap::new();
        for r in training_rows {
            grouped.entry(r.symbol).or_default().push(r);
        }
        let per_symbol = grouped
            .into_iter()
            .map(|(symbol, rows)| {
                let wx: Vec<f64> = rows.iter().map(|r| r.w_hat_x as f64).collect();
                let tt: Vec<f64> = rows.iter().map(|r| r.total_time).collect();
                let d: Vec<f64> = rows.iter().map(|r| r.dist).collect();
                let stats = SymbolStats {
                    median_w_hat_x: median(&wx).unwrap_or(f64::NAN),
                    mean_total_time: mean(&tt).unwrap_or(f64::NAN),
                    dist_mean: mean(&d).unwrap_or(f64::NAN),
                    dist_sd: sample_sd(&d),
                    n: rows.len(),
                };
                (symbol, stats)
            })
            .collect();
        TrainingStats { per_symbol }
    }

    pub fn get(&self, symbol: SymbolId) -> Option<&SymbolStats> {
        self.per_symbol.get(&symbol)
    }
}

pub fn dichotomize_row(row: &FeatureRow, stats: &SymbolStats) -> DichotomizedRow {
    let dist_norm = if stats.dist_sd > 0.0 && stats.dist_sd.is_finite() {
        (row.dist - stats.dist_mean) / stats.dist_sd
    } else {
        0.0
    };
    DichotomizedRow {
        child_id: row.child_id.clone(),
        symbol: row.symbol,
        dist_norm,
        gr_sec: GrSec::of_grade(row.grade),
        gr_wx: if (row.w_hat_x as f64) <= stats.median_w_hat_x {
            GrWx::Small
        } else {
            GrWx::Large
        },
        gr_slow: if row.total_time > stats.mean_total_time {
            GrSlow::Slow
        } else {
            GrSlow::Fast
        },
        dysgraphia: row.dysgraphia,
    }
}

pub fn dichotomize(rows: &[FeatureRow], stats: &TrainingStats) -> Result<Vec<DichotomizedRow>> {
    let mut warned = std::collections::BTreeSet::new();
    rows.iter()
        .map(|r| {
            let s = stats.get(r.symbol).ok_or_else(|| {
                Error::Reference(format!("no training statistics for symbol {}", r.symbol))
            })?;
            if !(s.dist_sd > 0.0) && warned.insert(r.symbol) {
                warn!("symbol {}: training dist has zero spread; dist_norm set to 0", r.symbol);
            }
            Ok(dichotomize_row(r, s))
        })
        .collect()
}

const CSV_HEADER: [&str; 10] = [
    "child_id",
    "symbol",
    "w_hat_x",
    "dist",
    "total_time",
    "section",
    "dysgraphia",
    "w_hat_y",
    "saturated_x",
    "saturated_y",
];

/// Write the feature table as CSV.
pub fn write_feature_csv<W: Write>(out: W, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.child_id.clone(),
            r.symbol.to_string(),
            r.w_hat_x.to_string(),
            r.dist.to_string(),
            r.total_time.to_string(),
            r.grade.to_string(),
            (r.dysgraphia as u8).to_string(),
            r.w_hat_y.to_string(),
            (r.saturated_x as u8).to_string(),
            (r.saturated_y as u8).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<feature csv>", e))?;
    Ok(())
}

pub fn read_feature_csv(content: &[u8]) -> Result<Vec<FeatureRow>> {
    let mut rdr = csv::Reader::from_reader(content);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected feature header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |field: &str| Error::Parse {
            line,
            message: format!("bad {field}"),
        };
        let flag = |k: usize, field: &str| match &rec[k] {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(field)),
        };
        rows.push(FeatureRow {
            child_id: rec[0].to_string(),
            symbol: rec[1].parse()?,
            w_hat_x: rec[2].parse().map_err(|_| bad("w_hat_x"))?,
            dist: rec[3].parse().map_err(|_| bad("dist"))?,
            total_time: rec[4].parse().map_err(|_| bad("total_time"))?,
            grade: rec[5].parse().map_err(|_| bad("section"))?,
            dysgraphia: flag(6, "dysgraphia")?,
            w_hat_y: rec[7].parse().map_err(|_| bad("w_hat_y"))?,
            saturated_x: flag(8, "saturated_x")?,
            saturated_y: flag(9, "saturated_y")?,
        });
    }
    Ok(rows)
}
