//! First/second layer method names and the supported combinations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FirstLayer {
    Glm,
    Rf,
    Svm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecondLayer {
    Counting,
    Glm,
    Rf,
}

impl FirstLayer {
    pub fn name(self) -> &'static str {
        match self {
            FirstLayer::Glm => "glm",
            FirstLayer::Rf => "rf",
            FirstLayer::Svm => "svm",
        }
    }
}

impl SecondLayer {
    pub fn name(self) -> &'static str {
        match self {
            SecondLayer::Counting => "counting",
            SecondLayer::Glm => "glm",
            SecondLayer::Rf => "rf",
        }
    }
}

/// A supported two-layer combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodPair {
    pub first: FirstLayer,
    pub second: SecondLayer,
}

impl MethodPair {
    pub const SUPPORTED: [MethodPair; 5] = [
        MethodPair::new_unchecked(FirstLayer::Glm, SecondLayer::Counting),
        MethodPair::new_unchecked(FirstLayer::Glm, SecondLayer::Glm),
        MethodPair::new_unchecked(FirstLayer::Rf, SecondLayer::Counting),
        MethodPair::new_unchecked(FirstLayer::Rf, SecondLayer::Rf),
        MethodPair::new_unchecked(FirstLayer::Svm, SecondLayer::Counting),
    ];

    const fn new_unchecked(first: FirstLayer, second: SecondLayer) -> Self {
        MethodPair { first, second }
    }

    pub fn new(first: FirstLayer, second: SecondLayer) -> Result<Self> {
        let pair = MethodPair { first, second };
        if MethodPair::SUPPORTED.contains(&pair) {
            Ok(pair)
        } else {
            Err(Error::Config(format!(
                "unsupported method pair {pair}; supported combinations (Table 4): {}",
                MethodPair::SUPPORTED.map(|p| p.to_string()).join(", ")
            )))
        }
    }

    /// Whether the second layer thresholds first-layer probabilities at an
    /// alpha quantile (binary first layers are counted directly).
    pub fn uses_alpha(self) -> bool {
        self.second == SecondLayer::Counting && self.first != FirstLayer::Svm
    }
}

impl fmt::Display for MethodPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first.name(), self.second.name())
    }
}

impl FromStr for MethodPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace("->", "-").replace(['>', '_', '+'], "-");
        let (a, b) = norm
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("method pair {s:?} must look like first-second, e.g. rf-counting")))?;
        let first = match a.trim() {
            "glm" => FirstLayer::Glm,
            "rf" => FirstLayer::Rf,
            "svm" => FirstLayer::Svm,
            other => return Err(Error::Config(format!("unknown first-layer method {other:?}"))),
        };
        let second = match b.trim_matches('-').trim() {
            "counting" | "count" => SecondLayer::Counting,
            "glm" => SecondLayer::Glm,
            "rf" => SecondLayer::Rf,
            other => return Err(Error::Config(format!("unknown second-layer method {other:?}"))),
        };
        MethodPair::new(first, second)
    }
}
