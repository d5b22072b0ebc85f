//! Two-layer dysgraphia screening: per-symbol classifiers, an individual
//! level rule or model, stratified cross-validation and the parameter sweep.

pub mod audit;
pub mod bundle;
pub mod error;
pub mod fold_features;
pub mod folds;
pub mod layers;
pub mod methods;
pub mod prepared;
pub mod report;
pub mod roc;
pub mod sweep;

pub use error::{Error, Result};
pub use methods::{FirstLayer, MethodPair, SecondLayer};
