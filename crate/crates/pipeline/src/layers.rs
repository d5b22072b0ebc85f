//! The two layers: one classifier per symbol, then an individual-level
//! rule or model over the per-symbol probabilities.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fold_features::RowGrid;
use crate::methods::{FirstLayer, SecondLayer};
use pomh_core::features::{dichotomize_row, FeatureRow, SymbolStats, TrainingStats};
use pomh_core::seed::{derive, rng};
use pomh_core::SymbolId;
use pomh_learn::counting::CountingParams;
use pomh_learn::forest::{rf_fit, ForestModel, ForestParams};
use pomh_learn::glm::{glm_fit, main_effects, GlmModel, Selection, Term};
use pomh_learn::svm::{svm_fit_grid, SvmGrid, SvmModel};
use pomh_learn::Matrix;

pub const GLM_FACTORS: [&str; 4] = ["dist_norm", "gr_sec", "gr_wx", "gr_slow"];
pub const FIRST_RF_MTRY: usize = 2;
pub const SECOND_RF_MTRY: usize = 6;
pub const DEFAULT_TREES: usize = 500;

/// Main effects plus the two- and three-way interactions of `dist_norm`.
pub fn glm_first_layer_scope() -> Vec<Term> {
    [
        vec![0],
        vec![1],
        vec![2],
        vec![3],
        vec![0, 2],
        vec![0, 1],
        vec![0, 3],
        vec![0, 2, 3],
        vec![0, 1, 3],
        vec![0, 1, 2],
    ]
    .into_iter()
    .map(Term::new)
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// Term selection of the first-layer GLM.
    pub selection: Selection,
    pub n_trees: usize,
    pub svm_grid: SvmGrid,
    /// Impute missing symbol probabilities (training mean) instead of
    /// dropping incomplete children from GLM/RF second layers.
    pub keep_incomplete: bool,
}

impl Default for LayerParams {
    fn default() -> Self {
        LayerParams {
            selection: Selection::Aic,
            n_trees: DEFAULT_TREES,
            svm_grid: SvmGrid::default(),
            keep_incomplete: false,
        }
    }
}

pub fn glm_features(row: &FeatureRow, stats: &SymbolStats) -> [f64; 4] {
    let d = dichotomize_row(row, stats);
    [d.dist_norm, d.gr_sec.indicator(), d.gr_wx.indicator(), d.gr_slow.indicator()]
}

pub fn rf_features(row: &FeatureRow) -> [f64; 5] {
    [row.dist, row.grade as f64, row.total_time, row.w_hat_x as f64, row.w_hat_y as f64]
}

pub fn svm_features(row: &FeatureRow) -> [f64; 4] {
    [row.dist, row.grade as f64, row.total_time, row.w_hat_x as f64]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SymbolModel {
    Glm { model: GlmModel, stats: SymbolStats },
    Rf { model: ForestModel },
    Svm { model: SvmModel },
}

impl SymbolModel {
    /// Probability of dysgraphia, or a 0/1 vote for SVM.
    pub fn predict(&self, row: &FeatureRow) -> f64 {
        match self {
            SymbolModel::Glm { model, stats } => model.predict(&glm_features(row, stats)),
            SymbolModel::Rf { model } => model.predict(&rf_features(row)),
            SymbolModel::Svm { model } => model.predict(&svm_features(row)) as u8 as f64,
        }
    }
}

fn is_skippable(e: &pomh_learn::Error) -> bool {
    matches!(
        e,
        pomh_learn::Error::SingleClass { .. } | pomh_learn::Error::TooFewRows { .. }
    )
}

/// Fit one symbol's classifier; returns the model and the training-row
/// probabilities (in-sample for GLM, out-of-bag for RF, inner-CV votes for
/// SVM). `Ok(None)` when the training rows cannot support the method.
pub fn fit_symbol(
    method: FirstLayer,
    rows: &[&FeatureRow],
    stats: &TrainingStats,
    params: &LayerParams,
    seed: u64,
) -> Result<Option<(SymbolModel, Vec<f64>)>> {
    let y: Vec<bool> = rows.iter().map(|r| r.dysgraphia).collect();
    let fitted = match method {
        FirstLayer::Glm => {
            let Some(&st) = rows.first().and_then(|r| stats.get(r.symbol)) else {
                return Ok(None);
            };
            let x = Matrix::from_rows(&rows.iter().map(|r| glm_features(r, &st)).collect::<Vec<_>>())?;
            let names: Vec<String> = GLM_FACTORS.iter().map(|s| s.to_string()).collect();
            glm_fit(&x, &y, &names, &glm_first_layer_scope(), params.selection).map(|model| {
                let p = model.predict_all(&x);
                (SymbolModel::Glm { model, stats: st }, p)
            })
        }
        FirstLayer::Rf => {
            let x = Matrix::from_rows(&rows.iter().map(|r| rf_features(r)).collect::<Vec<_>>())?;
            let fp = ForestParams::new(params.n_trees, FIRST_RF_MTRY, seed);
            rf_fit(&x, &y, &fp).map(|model| {
                let p = model.oob_probabilities(&x);
                (SymbolModel::Rf { model }, p)
            })
        }
        FirstLayer::Svm => {
            let x = Matrix::from_rows(&rows.iter().map(|r| svm_features(r)).collect::<Vec<_>>())?;
            svm_fit_grid(&x, &y, &params.svm_grid, &mut rng(seed)).map(|sel| {
                let p = sel.cv_votes.iter().map(|&v| v as u8 as f64).collect();
                (SymbolModel::Svm { model: sel.model }, p)
            })
        }
    };
    match fitted {
        Ok(v) => Ok(Some(v)),
        Err(e) if is_skippable(&e) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstLayerModels {
    pub method: FirstLayer,
    pub models: BTreeMap<SymbolId, SymbolModel>,
    pub skipped: Vec<SymbolId>,
}

/// `p̂` per `[child][symbol]`: training provenance for training children,
/// predictions for the others; `None` where no trace or no model exists.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolProbabilities {
    pub probs: Vec<Vec<Option<f64>>>,
    pub is_train: Vec<bool>,
}

pub fn run_first_layer(
    method: FirstLayer,
    rows: &RowGrid,
    stats: &TrainingStats,
    is_train: &[bool],
    params: &LayerParams,
    seed: u64,
) -> Result<(FirstLayerModels, SymbolProbabilities)> {
    let n = rows.len();
    let mut probs = vec![vec![None; SymbolId::COUNT]; n];
    let mut models = BTreeMap::new();
    let mut skipped = Vec::new();
    for s in SymbolId::all() {
        let (train_idx, train_rows): (Vec<usize>, Vec<&FeatureRow>) = (0..n)
            .filter(|&i| is_train[i])
            .filter_map(|i| rows[i][s.index()].as_ref().map(|r| (i, r)))
            .unzip();
        let fitted = if train_rows.is_empty() {
            None
        } else {
            fit_symbol(method, &train_rows, stats, params, derive(seed, s.index() as u64))?
        };
        let Some((model, train_p)) = fitted else {
            warn!("symbol {s}: training rows cannot support {}; symbol skipped", method.name());
            skipped.push(s);
            continue;
        };
        for (&i, p) in train_idx.iter().zip(train_p) {
            probs[i][s.index()] = Some(p);
        }
        for i in (0..n).filter(|&i| !is_train[i]) {
            if let Some(r) = &rows[i][s.index()] {
                probs[i][s.index()] = Some(model.predict(r));
            }
        }
        models.insert(s, model);
    }
    Ok((
        FirstLayerModels {
            method,
            models,
            skipped,
        },
        SymbolProbabilities {
            probs,
            is_train: is_train.to_vec(),
        },
    ))
}

/// Individual-level model over symbol probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum IndividualModel {
    Counting { params: CountingParams },
    /// Share of positive binary votes.
    VoteShare,
    Glm {
        model: GlmModel,
        symbols: Vec<SymbolId>,
        impute: Option<Vec<f64>>,
    },
    Rf {
        model: ForestModel,
        symbols: Vec<SymbolId>,
        impute: Option<Vec<f64>>,
    },
}

fn symbol_vector(probs: &[Option<f64>], symbols: &[SymbolId], impute: Option<&[f64]>) -> Option<Vec<f64>> {
    symbols
        .iter()
        .enumerate()
        .map(|(k, s)| probs[s.index()].or_else(|| impute.map(|m| m[k])))
        .collect()
}

impl IndividualModel {
    /// Score `P̂` for one child, `None` if the child cannot be scored.
    pub fn score(&self, probs: &[Option<f64>]) -> Option<f64> {
        let written = SymbolId::all().filter_map(|s| probs[s.index()].map(|p| (s, p)));
        match self {
            IndividualModel::Counting { params } => params.score(written),
            IndividualModel::VoteShare => {
                let votes: Vec<bool> = written.map(|(_, p)| p >= 0.5).collect();
                pomh_learn::counting::vote_share(&votes)
            }
            IndividualModel::Glm { model, symbols, impute } => {
                symbol_vector(probs, symbols, impute.as_deref()).map(|v| model.predict(&v))
            }
            IndividualModel::Rf { model, symbols, impute } => {
                symbol_vector(probs, symbols, impute.as_deref()).map(|v| model.predict(&v))
            }
        }
    }
}

/// Fit the second layer on training children; returns the model and the
/// training-child scores (fitted values for GLM, out-of-bag for RF).
#[allow(clippy::too_many_arguments)]
pub fn fit_second_layer(
    second: SecondLayer,
    first: FirstLayer,
    sp: &SymbolProbabilities,
    labels: &[bool],
    symbols: &[SymbolId],
    alpha: Option<f64>,
    params: &LayerParams,
    seed: u64,
) -> Result<(IndividualModel, Vec<Option<f64>>)> {
    let train: Vec<usize> = (0..labels.len()).filter(|&i| sp.is_train[i]).collect();
    let mut scores = vec![None; labels.len()];
    let model = match second {
        SecondLayer::Counting => {
            let model = if first == FirstLayer::Svm {
                IndividualModel::VoteShare
            } else {
                let alpha = alpha.ok_or_else(|| crate::error::Error::Config("counting needs alpha".into()))?;
                let mut per_symbol: BTreeMap<SymbolId, Vec<f64>> = BTreeMap::new();
                for &i in &train {
                    for &s in symbols {
                        if let Some(p) = sp.probs[i][s.index()] {
                            per_symbol.entry(s).or_default().push(p);
                        }
                    }
                }
                IndividualModel::Counting {
                    params: CountingParams::fit(&per_symbol, alpha)?,
                }
            };
            for &i in &train {
                scores[i] = model.score(&sp.probs[i]);
            }
            model
        }
        SecondLayer::Glm | SecondLayer::Rf => {
            let impute = params.keep_incomplete.then(|| {
                symbols
                    .iter()
                    .map(|s| {
                        let v: Vec<f64> = train.iter().filter_map(|&i| sp.probs[i][s.index()]).collect();
                        pomh_core::stats::mean(&v).unwrap_or(0.0)
                    })
                    .collect::<Vec<f64>>()
            });
            let (idx, xs): (Vec<usize>, Vec<Vec<f64>>) = train
                .iter()
                .filter_map(|&i| symbol_vector(&sp.probs[i], symbols, impute.as_deref()).map(|v| (i, v)))
                .unzip();
            if idx.len() < train.len() {
                warn!(
                    "{} of {} training children lack a symbol probability and are dropped",
                    train.len() - idx.len(),
                    train.len()
                );
            }
            let x = Matrix::from_rows(&xs)?;
            let y: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
            let symbols = symbols.to_vec();
            let (model, fitted) = if second == SecondLayer::Glm {
                let names: Vec<String> = symbols.iter().map(|s| format!("p_{}", s.as_char())).collect();
                let model = glm_fit(&x, &y, &names, &main_effects(symbols.len()), Selection::Backward)?;
                let fitted = model.predict_all(&x);
                (IndividualModel::Glm { model, symbols, impute }, fitted)
            } else {
                let fp = ForestParams::new(params.n_trees, SECOND_RF_MTRY.min(symbols.len().max(1)), seed);
                let model = rf_fit(&x, &y, &fp)?;
                let oob = model.oob_probabilities(&x);
                (IndividualModel::Rf { model, symbols, impute }, oob)
            };
            for (&i, p) in idx.iter().zip(fitted) {
                scores[i] = Some(p);
            }
            model
        }
    };
    Ok((model, scores))
}
