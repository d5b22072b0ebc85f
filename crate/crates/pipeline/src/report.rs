//! Evaluation reports: every grid cell, the best cell per distance kind in
//! the published table layout, and ROC points for plotting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::MethodPair;
use crate::prepared::PreparedCohort;
use crate::sweep::{sweep, CellResult, SweepConfig};
use pomh_core::pomh::DistanceKind;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Column layout of the best-parameter tables.
pub const TABLE_COLUMNS: [&str; 5] = ["ty_dist", "w_max", "alpha", "auc_train", "auc_test"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub config: SweepConfig,
    pub n_children: usize,
    pub n_dysgraphia: usize,
    pub cells: Vec<CellResult>,
}

/// Higher mean test AUC wins; ties keep the earlier cell in grid order.
fn better(a: &CellResult, b: &CellResult) -> bool {
    a.auc_test > b.auc_test
}

impl EvaluationReport {
    pub fn new(config: SweepConfig, n_children: usize, n_dysgraphia: usize, cells: Vec<CellResult>) -> Self {
        let mut report = EvaluationReport {
            format_version: REPORT_FORMAT_VERSION,
            config,
            n_children,
            n_dysgraphia,
            cells,
        };
        let keep: Vec<_> = report
            .config
            .pairs
            .iter()
            .flat_map(|&p| report.best(p))
            .map(key)
            .collect();
        for c in &mut report.cells {
            if !keep.contains(&key(c)) {
                for f in &mut c.folds {
                    f.roc_test.clear();
                }
            }
        }
        report
    }

    pub fn from_json(content: &str) -> Result<Self> {
        let report: EvaluationReport = serde_json::from_str(content)?;
        if report.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "report format version {} is not supported (expected {REPORT_FORMAT_VERSION})",
                report.format_version
            )));
        }
        Ok(report)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Best cell per distance kind, in the configured kind order.
    pub fn best(&self, pair: MethodPair) -> Vec<&CellResult> {
        self.config
            .kinds
            .iter()
            .filter_map(|&kind| {
                self.cells
                    .iter()
                    .filter(|c| c.pair == pair && c.kind == kind)
                    .fold(None, |best: Option<&CellResult>, c| match best {
                        Some(b) if !better(c, b) => Some(b),
                        _ => Some(c),
                    })
            })
            .collect()
    }

    /// Overall best cell of a pair.
    pub fn best_overall(&self, pair: MethodPair) -> Option<&CellResult> {
        self.best(pair)
            .into_iter()
            .fold(None, |best: Option<&CellResult>, c| match best {
                Some(b) if !better(c, b) => Some(b),
                _ => Some(c),
            })
    }

    /// All cells, one row each, with per-fold AUCs.
    pub fn cells_csv(&self) -> String {
        let k = self.config.folds;
        let mut out = String::from("pair,ty_dist,w_max,alpha,auc_train,auc_test");
        for f in 0..k {
            let _ = write!(out, ",train_fold{f},test_fold{f}");
        }
        out.push('\n');
        for c in &self.cells {
            let _ = write!(
                out,
                "{},{},{},{},{:.6},{:.6}",
                c.pair,
                c.kind,
                c.w_max,
                c.alpha.map(|a| format!("{a:.3}")).unwrap_or_default(),
                c.auc_train,
                c.auc_test
            );
            for f in &c.folds {
                let _ = write!(out, ",{:.6},{:.6}", f.auc_train, f.auc_test);
            }
            out.push('\n');
        }
        out
    }

    fn table_rows(&self, pair: MethodPair) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let with_alpha = pair.uses_alpha();
        let header: Vec<&str> = TABLE_COLUMNS.iter().copied().filter(|&c| with_alpha || c != "alpha").collect();
        let rows = self
            .best(pair)
            .into_iter()
            .map(|c| {
                let mut r = vec![c.kind.label().to_string(), c.w_max.to_string()];
                if with_alpha {
                    r.push(format!("{:.3}", c.alpha.unwrap_or(f64::NAN)));
                }
                r.push(format!("{:.3}", c.auc_train));
                r.push(format!("{:.3}", c.auc_test));
                r
            })
            .collect();
        (header, rows)
    }

    /// Best-parameter table as CSV.
    pub fn best_csv(&self, pair: MethodPair) -> String {
        let (header, rows) = self.table_rows(pair);
        let mut out = header.join(",") + "\n";
        for r in rows {
            out += &(r.join(",") + "\n");
        }
        out
    }

    /// Best-parameter table as aligned text with numbered rows.
    pub fn table(&self, pair: MethodPair) -> String {
        let (header, rows) = self.table_rows(pair);
        let n_label = rows.len().to_string().len();
        let widths: Vec<usize> = (0..header.len())
            .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
            .collect();
        let mut out = format!("{:n_label$}", "");
        for (h, w) in header.iter().zip(&widths) {
            let _ = write!(out, " {h:>w$}");
        }
        out.push('\n');
        for (i, r) in rows.iter().enumerate() {
            let _ = write!(out, "{:>n_label$}", i + 1);
            for (v, w) in r.iter().zip(&widths) {
                let _ = write!(out, " {v:>w$}");
            }
            out.push('\n');
        }
        out
    }

    /// Test-fold ROC points of a cell: `fold,cutoff,fpr,tpr`.
    pub fn roc_csv(cell: &CellResult) -> String {
        let mut out = String::from("fold,cutoff,fpr,tpr\n");
        for f in &cell.folds {
            for p in &f.roc_test {
                let _ = writeln!(out, "{},{},{:.6},{:.6}", f.fold, p.cutoff, p.fpr, p.tpr);
            }
        }
        out
    }

    /// Mean test operating point of each best cell:
    /// `pair,ty_dist,w_max,alpha,fpr,tpr,cutoff,accuracy`.
    pub fn operating_csv(&self) -> String {
        let mut out = String::from("pair,ty_dist,w_max,alpha,fpr,tpr,cutoff,accuracy\n");
        for &pair in &self.config.pairs {
            for c in self.best(pair) {
                let p = c.mean_operating_test();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.3},{:.3},{:.3},{:.3}",
                    c.pair,
                    c.kind,
                    c.w_max,
                    c.alpha.map(|a| format!("{a:.3}")).unwrap_or_default(),
                    p.fpr,
                    p.tpr,
                    p.cutoff,
                    p.accuracy
                );
            }
        }
        out
    }
}

fn key(c: &CellResult) -> (MethodPair, DistanceKind, usize, Option<u64>) {
    (c.pair, c.kind, c.w_max, c.alpha.map(f64::to_bits))
}

/// Run the sweep and assemble the report.
pub fn evaluate(prep: &PreparedCohort, config: &SweepConfig) -> Result<EvaluationReport> {
    let cells = sweep(prep, config)?;
    let n_dys = prep.children.iter().filter(|c| c.dysgraphia).count();
    Ok(EvaluationReport::new(config.clone(), prep.len(), n_dys, cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roc::RocPoint;
    use crate::sweep::FoldResult;

    fn cell(kind: DistanceKind, w_max: usize, alpha: f64, train: f64, test: f64) -> CellResult {
        let p = RocPoint {
            cutoff: 0.2,
            fpr: 0.3,
            tpr: 0.7,
            accuracy: 0.7,
        };
        let fold = |f| FoldResult {
            fold: f,
            auc_train: train,
            auc_test: test,
            n_train: 8,
            n_test: 2,
            operating_train: p,
            operating_test: p,
            roc_test: vec![p],
        };
        CellResult {
            pair: "glm-counting".parse().unwrap(),
            kind,
            w_max,
            alpha: Some(alpha),
            folds: vec![fold(0), fold(1)],
            auc_train: train,
            auc_test: test,
        }
    }

    fn report() -> EvaluationReport {
        let config = SweepConfig {
            pairs: vec!["glm-counting".parse().unwrap()],
            folds: 2,
            ..Default::default()
        };
        let cells = vec![
            cell(DistanceKind::L1, 37, 0.89, 0.81, 0.70),
            cell(DistanceKind::L1, 39, 0.89, 0.810, 0.749),
            cell(DistanceKind::L2, 37, 0.89, 0.824, 0.751),
            cell(DistanceKind::L2, 39, 0.85, 0.83, 0.751),
            cell(DistanceKind::Linf, 39, 0.89, 0.834, 0.755),
        ];
        EvaluationReport::new(config, 10, 2, cells)
    }

    #[test]
    fn table_layout_and_ties() {
        let r = report();
        let pair = r.config.pairs[0];
        assert_eq!(
            r.best_csv(pair),
            "ty_dist,w_max,alpha,auc_train,auc_test\n\
             dist1,39,0.890,0.810,0.749\n\
             dist2,37,0.890,0.824,0.751\n\
             distinf,39,0.890,0.834,0.755\n"
        );
        let table = r.table(pair);
        let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, TABLE_COLUMNS);
        assert!(table.lines().nth(3).unwrap().starts_with("3 distinf"));
        assert_eq!(r.best_overall(pair).unwrap().kind, DistanceKind::Linf);
    }

    #[test]
    fn roc_points_kept_for_best_cells_only() {
        let r = report();
        assert!(r.cells[0].folds.iter().all(|f| f.roc_test.is_empty()));
        assert!(r.cells[1].folds.iter().all(|f| !f.roc_test.is_empty()));
        assert!(EvaluationReport::roc_csv(&r.cells[1]).starts_with("fold,cutoff,fpr,tpr\n0,0.2,"));
        let back = EvaluationReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn alpha_column_dropped_without_counting_alpha() {
        let mut r = report();
        let pair: MethodPair = "rf-rf".parse().unwrap();
        r.config.pairs = vec![pair];
        for c in &mut r.cells {
            c.pair = pair;
            c.alpha = None;
        }
        assert!(r.best_csv(pair).starts_with("ty_dist,w_max,auc_train,auc_test\n"));
    }
}
