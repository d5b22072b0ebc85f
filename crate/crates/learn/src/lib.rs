//! Classifiers for the two-layer detection stack.
//!
//! Every model fits on a row-major [`Matrix`] of predictors with boolean
//! labels (`true` = positive class) and is immutable once fitted.

pub mod counting;
pub mod cv;
pub mod error;
pub mod forest;
pub mod glm;
pub mod matrix;
pub mod svm;

pub use error::{Error, Result};
pub use matrix::Matrix;
