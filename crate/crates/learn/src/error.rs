use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("training data has a single class ({positives} positive of {n})")]
    SingleClass { positives: usize, n: usize },
    #[error("need at least {needed} rows per class, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("solver did not converge after {iterations} iterations (max KKT violation {violation:.3e}, n = {n}, C = {c}, gamma = {gamma})")]
    NoConvergence {
        iterations: usize,
        violation: f64,
        n: usize,
        c: f64,
        gamma: f64,
    },
}

/// Counts of positives and negatives; errors unless both reach `min_per_class`.
pub fn check_classes(y: &[bool], min_per_class: usize) -> Result<(usize, usize)> {
    let pos = y.iter().filter(|&&v| v).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass { positives: pos, n: y.len() });
    }
    if pos.min(neg) < min_per_class {
        return Err(Error::TooFewRows {
            needed: min_per_class,
            got: pos.min(neg),
        });
    }
    Ok((pos, neg))
}
