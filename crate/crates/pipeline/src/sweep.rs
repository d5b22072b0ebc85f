//! Cross-validated evaluation over the (w_max, distance, alpha) grid.

use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fold_features::{build_fold_features, FoldFeatures};
use crate::folds::{make_folds, FoldPlan};
use crate::layers::{fit_second_layer, run_first_layer, FirstLayerModels, IndividualModel, LayerParams, SymbolProbabilities};
use crate::methods::{FirstLayer, MethodPair, SecondLayer};
use crate::prepared::PreparedCohort;
use crate::roc::{roc_auc, RocPoint, RocResult};
use pomh_core::features::TrainingStats;
use pomh_core::morphology::MAX_WIDTH;
use pomh_core::pomh::DistanceKind;
use pomh_core::reference::ReferenceTable;
use pomh_core::seed::{derive_path, tag_str};
use pomh_core::SymbolId;

pub const DEFAULT_ALPHAS: [f64; 8] = [0.50, 0.60, 0.70, 0.80, 0.85, 0.89, 0.92, 0.95];
pub const DEFAULT_FOLDS: usize = 5;

pub fn default_w_max_grid() -> Vec<usize> {
    (23..=MAX_WIDTH).step_by(2).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub pairs: Vec<MethodPair>,
    pub w_max_grid: Vec<usize>,
    pub kinds: Vec<DistanceKind>,
    pub alphas: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub layers: LayerParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            pairs: vec![MethodPair::new(FirstLayer::Rf, SecondLayer::Counting).expect("supported")],
            w_max_grid: default_w_max_grid(),
            kinds: DistanceKind::ALL.to_vec(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            folds: DEFAULT_FOLDS,
            seed: 1,
            layers: LayerParams::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.pairs.is_empty() {
            return bad("no method pair requested".into());
        }
        let mut pairs = self.pairs.clone();
        pairs.sort();
        pairs.dedup();
        if pairs.len() != self.pairs.len() {
            return bad("duplicate method pair".into());
        }
        if self.w_max_grid.is_empty() || self.kinds.is_empty() {
            return bad("w_max and distance grids must be nonempty".into());
        }
        if let Some(w) = self.w_max_grid.iter().find(|&&w| w < 3 || w % 2 == 0 || w > MAX_WIDTH) {
            return bad(format!("w_max {w} must be odd and within 3..={MAX_WIDTH}"));
        }
        if self.pairs.iter().any(|p| p.uses_alpha()) && self.alphas.is_empty() {
            return bad("alpha grid must be nonempty for counting".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha {a} outside (0, 1)"));
        }
        if self.folds < 2 {
            return bad(format!("need at least 2 folds, got {}", self.folds));
        }
        if self.layers.n_trees == 0 {
            return bad("n_trees must be positive".into());
        }
        Ok(())
    }

    /// Alpha values evaluated for a pair (`[None]` when it has no alpha).
    pub fn alphas_for(&self, pair: MethodPair) -> Vec<Option<f64>> {
        if pair.uses_alpha() {
            self.alphas.iter().map(|&a| Some(a)).collect()
        } else {
            vec![None]
        }
    }

    pub fn n_cells(&self) -> usize {
        self.pairs
            .iter()
            .map(|&p| self.w_max_grid.len() * self.kinds.len() * self.alphas_for(p).len())
            .sum()
    }
}

fn kind_tag(kind: DistanceKind) -> u64 {
    DistanceKind::ALL.iter().position(|&k| k == kind).expect("known kind") as u64
}

/// Seed of the first layer of one (w_max, fold, kind) cell; `fold = None`
/// for a fit on the whole cohort.
pub fn first_layer_seed(seed: u64, w_max: usize, fold: Option<usize>, kind: DistanceKind, first: FirstLayer) -> u64 {
    derive_path(
        seed,
        &[tag_str("first"), w_max as u64, fold.map_or(u64::MAX, |f| f as u64), kind_tag(kind), tag_str(first.name())],
    )
}

pub fn second_layer_seed(seed: u64, w_max: usize, fold: Option<usize>, kind: DistanceKind, pair: MethodPair) -> u64 {
    derive_path(
        seed,
        &[tag_str("second"), w_max as u64, fold.map_or(u64::MAX, |f| f as u64), kind_tag(kind), tag_str(&pair.to_string())],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub auc_train: f64,
    pub auc_test: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub operating_train: RocPoint,
    pub operating_test: RocPoint,
    /// Kept for best cells only once a report is assembled.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub roc_test: Vec<RocPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub pair: MethodPair,
    pub kind: DistanceKind,
    pub w_max: usize,
    pub alpha: Option<f64>,
    pub folds: Vec<FoldResult>,
    pub auc_train: f64,
    pub auc_test: f64,
}

impl CellResult {
    /// Operating point averaged over folds (FPR, TPR, cutoff, accuracy).
    pub fn mean_operating_test(&self) -> RocPoint {
        let n = self.folds.len() as f64;
        let sum = |f: fn(&RocPoint) -> f64| self.folds.iter().map(|r| f(&r.operating_test)).sum::<f64>() / n;
        RocPoint {
            cutoff: sum(|p| p.cutoff),
            fpr: sum(|p| p.fpr),
            tpr: sum(|p| p.tpr),
            accuracy: sum(|p| p.accuracy),
        }
    }
}

/// ROC of the children selected by `mask` that received a score.
pub fn evaluate_scores(scores: &[Option<f64>], labels: &[bool], mask: &[bool]) -> Result<(RocResult, usize)> {
    let (s, l): (Vec<f64>, Vec<bool>) = scores
        .iter()
        .zip(labels)
        .zip(mask)
        .filter_map(|((s, &l), &m)| if m { s.map(|s| (s, l)) } else { None })
        .unzip();
    let excluded = mask.iter().filter(|&&m| m).count() - s.len();
    if excluded > 0 {
        warn!("{excluded} children without a score excluded from evaluation");
    }
    Ok((roc_auc(&s, &l)?, s.len()))
}

/// Every artifact of one trained two-layer pipeline.
#[derive(Debug, Clone)]
pub struct FittedPipeline {
    pub reference: ReferenceTable,
    pub stats: TrainingStats,
    pub first: FirstLayerModels,
    pub second: IndividualModel,
    pub probabilities: SymbolProbabilities,
    /// Training scores for training children, predictions for the rest.
    pub scores: Vec<Option<f64>>,
}

/// Fit both layers on the children flagged in `is_train` and score everyone.
#[allow(clippy::too_many_arguments)]
pub fn fit_pipeline(
    prep: &PreparedCohort,
    is_train: &[bool],
    w_max: usize,
    kind: DistanceKind,
    pair: MethodPair,
    alpha: Option<f64>,
    layers: &LayerParams,
    seed: u64,
    fold: Option<usize>,
) -> Result<FittedPipeline> {
    let ff = build_fold_features(prep, is_train, w_max, &[kind])?;
    let kf = &ff.kinds[&kind];
    let (first, probabilities) = run_first_layer(
        pair.first,
        &kf.rows,
        &kf.stats,
        is_train,
        layers,
        first_layer_seed(seed, w_max, fold, kind, pair.first),
    )?;
    let labels = prep.labels();
    let symbols: Vec<SymbolId> = first.models.keys().copied().collect();
    let (second, train_scores) = fit_second_layer(
        pair.second,
        pair.first,
        &probabilities,
        &labels,
        &symbols,
        alpha,
        layers,
        second_layer_seed(seed, w_max, fold, kind, pair),
    )?;
    let scores = score_all(&second, &probabilities, train_scores);
    Ok(FittedPipeline {
        reference: ff.reference,
        stats: kf.stats.clone(),
        first,
        second,
        probabilities,
        scores,
    })
}

fn score_all(model: &IndividualModel, sp: &SymbolProbabilities, mut train_scores: Vec<Option<f64>>) -> Vec<Option<f64>> {
    for (i, s) in train_scores.iter_mut().enumerate() {
        if !sp.is_train[i] {
            *s = model.score(&sp.probs[i]);
        }
    }
    train_scores
}

type CellKey = (usize, usize, DistanceKind, usize, usize);

fn evaluate_task(
    prep: &PreparedCohort,
    plan: &FoldPlan,
    cfg: &SweepConfig,
    w_max: usize,
    fold: usize,
) -> Result<Vec<(CellKey, FoldResult)>> {
    let is_train = plan.train_mask(fold);
    let is_test = plan.test_mask(fold);
    let labels = prep.labels();
    let ff: FoldFeatures = build_fold_features(prep, &is_train, w_max, &cfg.kinds)?;
    let mut out = Vec::new();
    let mut firsts: Vec<FirstLayer> = cfg.pairs.iter().map(|p| p.first).collect();
    firsts.sort();
    firsts.dedup();
    for (ki, &kind) in cfg.kinds.iter().enumerate() {
        let kf = &ff.kinds[&kind];
        for &first in &firsts {
            let (models, sp) = run_first_layer(
                first,
                &kf.rows,
                &kf.stats,
                &is_train,
                &cfg.layers,
                first_layer_seed(cfg.seed, w_max, Some(fold), kind, first),
            )?;
            let symbols: Vec<SymbolId> = models.models.keys().copied().collect();
            for (pi, &pair) in cfg.pairs.iter().enumerate().filter(|(_, p)| p.first == first) {
                for (ai, alpha) in cfg.alphas_for(pair).into_iter().enumerate() {
                    let (model, train_scores) = fit_second_layer(
                        pair.second,
                        first,
                        &sp,
                        &labels,
                        &symbols,
                        alpha,
                        &cfg.layers,
                        second_layer_seed(cfg.seed, w_max, Some(fold), kind, pair),
                    )?;
                    let scores = score_all(&model, &sp, train_scores);
                    let (train_roc, n_train) = evaluate_scores(&scores, &labels, &is_train)?;
                    let (test_roc, n_test) = evaluate_scores(&scores, &labels, &is_test)?;
                    let wi = cfg.w_max_grid.iter().position(|&w| w == w_max).expect("grid");
                    out.push((
                        (pi, wi, kind, ki, ai),
                        FoldResult {
                            fold,
                            auc_train: train_roc.auc,
                            auc_test: test_roc.auc,
                            n_train,
                            n_test,
                            operating_train: train_roc.operating,
                            operating_test: test_roc.operating,
                            roc_test: test_roc.points,
                        },
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Full factorial cross-validated evaluation. Results are ordered by pair,
/// distance kind, w_max and alpha, independent of scheduling.
pub fn sweep(prep: &PreparedCohort, cfg: &SweepConfig) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let plan = make_folds(&prep.children, cfg.folds, cfg.seed)?;
    let tasks: Vec<(usize, usize)> = cfg
        .w_max_grid
        .iter()
        .flat_map(|&w| (0..cfg.folds).map(move |f| (w, f)))
        .collect();
    info!("sweep: {} cells over {} fold tasks", cfg.n_cells(), tasks.len());
    let results: Vec<Vec<(CellKey, FoldResult)>> = tasks
        .par_iter()
        .map(|&(w, f)| evaluate_task(prep, &plan, cfg, w, f))
        .collect::<Result<_>>()?;
    let mut cells: BTreeMap<(usize, usize, usize, usize), (CellKey, Vec<FoldResult>)> = BTreeMap::new();
    for (key, fr) in results.into_iter().flatten() {
        let (pi, wi, _, ki, ai) = key;
        cells.entry((pi, ki, wi, ai)).or_insert_with(|| (key, Vec::new())).1.push(fr);
    }
    cells
        .into_values()
        .map(|((pi, wi, kind, _, ai), mut folds)| {
            folds.sort_by_key(|f| f.fold);
            if folds.len() != cfg.folds {
                return Err(Error::Evaluation(format!("cell has {} fold results, expected {}", folds.len(), cfg.folds)));
            }
            let pair = cfg.pairs[pi];
            let n = folds.len() as f64;
            Ok(CellResult {
                pair,
                kind,
                w_max: cfg.w_max_grid[wi],
                alpha: cfg.alphas_for(pair)[ai],
                auc_train: folds.iter().map(|f| f.auc_train).sum::<f64>() / n,
                auc_test: folds.iter().map(|f| f.auc_test).sum::<f64>() / n,
                folds,
            })
        })
        .collect()
}
