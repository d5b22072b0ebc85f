//! Fold-dependent feature extraction: the age reference is built from the
//! training fold's typically developing children only, then every trace in
//! the cohort gets its width estimate and feature row.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prepared::PreparedCohort;
use pomh_core::features::{FeatureRow, TrainingStats};
use pomh_core::pomh::DistanceKind;
use pomh_core::reference::{estimate_w, AgeGrid, ReferenceTable, WidthEstimate};
use pomh_core::SymbolId;

/// `[child][symbol]` feature rows for one distance kind.
pub type RowGrid = Vec<Vec<Option<FeatureRow>>>;

#[derive(Debug, Clone)]
pub struct KindFeatures {
    pub rows: RowGrid,
    /// Dichotomization statistics from training rows only.
    pub stats: TrainingStats,
}

#[derive(Debug, Clone)]
pub struct FoldFeatures {
    pub w_max: usize,
    pub reference: ReferenceTable,
    pub is_train: Vec<bool>,
    pub kinds: BTreeMap<DistanceKind, KindFeatures>,
}

pub fn build_reference(prep: &PreparedCohort, is_train: &[bool], w_max: usize) -> Result<ReferenceTable> {
    let td: Vec<_> = prep
        .children
        .iter()
        .zip(is_train)
        .filter(|(c, &t)| t && !c.dysgraphia)
        .map(|(c, _)| c)
        .collect();
    let ages = AgeGrid::spanning(td.iter().copied())
        .ok_or_else(|| Error::Evaluation("no typically developing training children for the reference".into()))?;
    let index: HashMap<&str, usize> = prep
        .children
        .iter()
        .enumerate()
        .map(|(i, c)| (c.child_id.as_str(), i))
        .collect();
    let profile_of = |c: &pomh_core::manifest::ChildRecord, s: SymbolId| {
        prep.traces[index[c.child_id.as_str()]][s.index()]
            .as_ref()
            .map(|p| &p.profile)
    };
    Ok(ReferenceTable::build(&td, profile_of, w_max, ages)?)
}

/// Width estimates and feature rows for every trace under `reference`.
pub fn extract_rows(
    prep: &PreparedCohort,
    reference: &ReferenceTable,
    kinds: &[DistanceKind],
) -> Result<BTreeMap<DistanceKind, RowGrid>> {
    let per_child: Vec<Vec<Option<(WidthEstimate, [f64; 3], f64)>>> = prep
        .children
        .par_iter()
        .enumerate()
        .map(|(i, child)| {
            SymbolId::all()
                .map(|s| {
                    let Some((trace, p)) = prep.get(i, s) else {
                        return Ok(None);
                    };
                    let est = estimate_w(&p.profile, reference, child.age_months, s)?;
                    let d = p.distances(trace, est.w_hat_x, est.w_hat_y)?;
                    Ok(Some((est, [d.l1, d.l2, d.linf], p.total_time)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for &kind in kinds {
        let k = DistanceKind::ALL.iter().position(|&x| x == kind).expect("known kind");
        let grid: RowGrid = per_child
            .iter()
            .zip(&prep.children)
            .map(|(syms, child)| {
                syms.iter()
                    .zip(SymbolId::all())
                    .map(|(v, s)| {
                        v.map(|(est, d, tt)| FeatureRow {
                            child_id: child.child_id.clone(),
                            symbol: s,
                            w_hat_x: est.w_hat_x,
                            dist: d[k],
                            total_time: tt,
                            grade: child.grade,
                            dysgraphia: child.dysgraphia,
                            w_hat_y: est.w_hat_y,
                            saturated_x: est.saturated_x,
                            saturated_y: est.saturated_y,
                        })
                    })
                    .collect()
            })
            .collect();
        out.insert(kind, grid);
    }
    Ok(out)
}

pub fn training_stats(rows: &RowGrid, is_train: &[bool]) -> TrainingStats {
    let train: Vec<FeatureRow> = rows
        .iter()
        .zip(is_train)
        .filter(|(_, &t)| t)
        .flat_map(|(r, _)| r.iter().flatten().cloned())
        .collect();
    TrainingStats::fit(&train)
}

pub fn build_fold_features(
    prep: &PreparedCohort,
    is_train: &[bool],
    w_max: usize,
    kinds: &[DistanceKind],
) -> Result<FoldFeatures> {
    let reference = build_reference(prep, is_train, w_max)?;
    let kinds = extract_rows(prep, &reference, kinds)?
        .into_iter()
        .map(|(k, rows)| {
            let stats = training_stats(&rows, is_train);
            (k, KindFeatures { rows, stats })
        })
        .collect();
    Ok(FoldFeatures {
        w_max,
        reference,
        is_train: is_train.to_vec(),
        kinds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pomh_core::synthgen::{gen_cohort, GeneratorSpec};

    #[test]
    fn rows_exist_exactly_where_traces_do() {
        let cohort = gen_cohort(&GeneratorSpec::calibrated(), 40, 0.25, 2).unwrap();
        let prep = PreparedCohort::new(cohort.children).unwrap();
        let is_train: Vec<bool> = (0..prep.len()).map(|i| i % 5 != 0).collect();
        let ff = build_fold_features(&prep, &is_train, 25, &DistanceKind::ALL).unwrap();
        for kf in ff.kinds.values() {
            for (i, row) in kf.rows.iter().enumerate() {
                for s in SymbolId::all() {
                    assert_eq!(row[s.index()].is_some(), prep.get(i, s).is_some());
                    if let Some(r) = &row[s.index()] {
                        assert!(r.w_hat_x >= 3 && r.w_hat_x <= 25 && r.w_hat_x % 2 == 1);
                    }
                }
            }
        }
        let l1 = &ff.kinds[&DistanceKind::L1].rows;
        let linf = &ff.kinds[&DistanceKind::Linf].rows;
        for (a, b) in l1.iter().flatten().zip(linf.iter().flatten()) {
            if let (Some(a), Some(b)) = (a, b) {
                assert!(b.dist <= a.dist + 1e-12);
                assert_eq!(a.w_hat_x, b.w_hat_x);
            }
        }
    }
}
