//! Fold-isolation audit: content hashes of every training-fold artifact.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::layers::LayerParams;
use crate::methods::MethodPair;
use crate::prepared::PreparedCohort;
use crate::sweep::fit_pipeline;
use pomh_core::pomh::DistanceKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHashes {
    pub reference: String,
    pub stats: String,
    pub first_layer: String,
    pub second_layer: String,
    /// Training-child scores, keyed by child id.
    pub train_scores: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(value)?.as_bytes()))
}

/// Fit the pipeline on the children flagged in `is_train` and hash what it
/// learned. Nothing here may depend on the other children.
#[allow(clippy::too_many_arguments)]
pub fn training_artifact_hashes(
    prep: &PreparedCohort,
    is_train: &[bool],
    fold: usize,
    w_max: usize,
    kind: DistanceKind,
    pair: MethodPair,
    alpha: Option<f64>,
    layers: &LayerParams,
    seed: u64,
) -> Result<ArtifactHashes> {
    let fitted = fit_pipeline(prep, is_train, w_max, kind, pair, alpha, layers, seed, Some(fold))?;
    let train_scores: Vec<(&str, Option<f64>)> = prep
        .children
        .iter()
        .zip(is_train)
        .zip(&fitted.scores)
        .filter(|((_, &t), _)| t)
        .map(|((c, _), &s)| (c.child_id.as_str(), s))
        .collect();
    Ok(ArtifactHashes {
        reference: sha256_hex(fitted.reference.to_csv().as_bytes()),
        stats: hash_json(&fitted.stats)?,
        first_layer: hash_json(&fitted.first)?,
        second_layer: hash_json(&fitted.second)?,
        train_scores: hash_json(&train_scores)?,
    })
}
