//! Versioned container of one trained two-layer model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fold_features::extract_rows;
use crate::layers::{FirstLayerModels, IndividualModel, LayerParams};
use crate::methods::MethodPair;
use crate::prepared::PreparedCohort;
use crate::sweep::fit_pipeline;
use pomh_core::features::TrainingStats;
use pomh_core::pomh::DistanceKind;
use pomh_core::reference::ReferenceTable;
use pomh_core::SymbolId;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub pair: MethodPair,
    pub kind: DistanceKind,
    pub w_max: usize,
    pub alpha: Option<f64>,
    pub seed: u64,
    /// Reference table in its CSV form.
    pub reference: String,
    pub stats: TrainingStats,
    pub first: FirstLayerModels,
    pub second: IndividualModel,
}

/// Train on every child of the cohort.
pub fn train_bundle(
    prep: &PreparedCohort,
    pair: MethodPair,
    kind: DistanceKind,
    w_max: usize,
    alpha: Option<f64>,
    layers: &LayerParams,
    seed: u64,
) -> Result<ModelBundle> {
    if pair.uses_alpha() != alpha.is_some() {
        return Err(Error::Config(format!(
            "{pair} {} an alpha",
            if pair.uses_alpha() { "needs" } else { "does not take" }
        )));
    }
    let is_train = vec![true; prep.len()];
    let fitted = fit_pipeline(prep, &is_train, w_max, kind, pair, alpha, layers, seed, None)?;
    Ok(ModelBundle {
        format_version: BUNDLE_FORMAT_VERSION,
        pair,
        kind,
        w_max,
        alpha,
        seed,
        reference: fitted.reference.to_csv(),
        stats: fitted.stats,
        first: fitted.first,
        second: fitted.second,
    })
}

impl ModelBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)? + "\n")
    }

    pub fn from_json(content: &str) -> Result<Self> {
        let b: ModelBundle = serde_json::from_str(content)?;
        if b.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "model bundle format version {} is not supported (expected {BUNDLE_FORMAT_VERSION})",
                b.format_version
            )));
        }
        Ok(b)
    }

    /// Per-symbol probabilities `[child][symbol]` under the stored models.
    pub fn symbol_probabilities(&self, prep: &PreparedCohort) -> Result<Vec<Vec<Option<f64>>>> {
        let reference = ReferenceTable::from_csv(&self.reference)?;
        let rows = extract_rows(prep, &reference, &[self.kind])?
            .remove(&self.kind)
            .expect("requested kind");
        Ok(rows
            .iter()
            .map(|child| {
                SymbolId::all()
                    .map(|s| {
                        let row = child[s.index()].as_ref()?;
                        Some(self.first.models.get(&s)?.predict(row))
                    })
                    .collect()
            })
            .collect())
    }

    /// Individual scores; `None` for children that cannot be scored.
    pub fn score(&self, prep: &PreparedCohort) -> Result<Vec<Option<f64>>> {
        Ok(self
            .symbol_probabilities(prep)?
            .iter()
            .map(|p| self.second.score(p))
            .collect())
    }
}
