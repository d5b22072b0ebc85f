//! Binomial logistic regression fitted by iteratively reweighted least
//! squares, with stepwise term selection by an information criterion.
//!
//! Model terms are products of base factors (main effects and
//! interactions). Selection follows the marginality rules of the classic
//! `step` procedure: a term may be dropped only if no other term in the
//! model contains it, and added back only if all its lower-order parts that
//! belong to the scope are present.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_classes, Error, Result};
use crate::matrix::Matrix;

pub const MAX_ITERATIONS: usize = 50;
pub const REL_TOLERANCE: f64 = 1e-8;
/// Coefficient magnitude beyond which the fit is declared separated.
pub const SEPARATION_BOUND: f64 = 30.0;

/// Numerically stable `e^eta / (1 + e^eta)`.
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Product of base factors, identified by sorted factor indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term(Vec<usize>);

impl Term {
    pub fn new(mut factors: Vec<usize>) -> Self {
        assert!(!factors.is_empty(), "a term needs at least one factor");
        factors.sort_unstable();
        factors.dedup();
        Term(factors)
    }

    pub fn main(factor: usize) -> Self {
        Term(vec![factor])
    }

    pub fn factors(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// Whether `self` is a proper sub-term of `other`.
    pub fn is_within(&self, other: &Term) -> bool {
        self.0.len() < other.0.len() && self.0.iter().all(|f| other.0.contains(f))
    }

    pub fn value(&self, base: &[f64]) -> f64 {
        self.0.iter().map(|&f| base[f]).product()
    }

    pub fn label(&self, names: &[String]) -> String {
        self.0.iter().map(|&f| names[f].as_str()).collect::<Vec<_>>().join(":")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Keep the full model.
    None,
    /// Bidirectional search, penalty 2 per coefficient.
    Aic,
    /// Bidirectional search, penalty `ln n` per coefficient.
    Bic,
    /// Bidirectional search by AIC started from the full model.
    Stepwise,
    /// Drops only, by AIC.
    Backward,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::None => "none",
            Selection::Aic => "aic",
            Selection::Bic => "bic",
            Selection::Stepwise => "stepwise",
            Selection::Backward => "backward",
        })
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Selection::None),
            "aic" => Ok(Selection::Aic),
            "bic" => Ok(Selection::Bic),
            "stepwise" | "step" => Ok(Selection::Stepwise),
            "backward" => Ok(Selection::Backward),
            other => Err(Error::InvalidParameter(format!(
                "unknown selection mode {other:?} (expected none|aic|bic|stepwise|backward)"
            ))),
        }
    }
}

/// Result of one maximum-likelihood fit for a fixed set of terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    /// Intercept first, then one coefficient per term.
    pub coefficients: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub separated: bool,
}

fn design_row(base: &[f64], terms: &[Term], out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    out.extend(terms.iter().map(|t| t.value(base)));
}

fn log_likelihood(eta: &[f64], y: &[bool]) -> f64 {
    // log p = -log(1 + e^-eta), log(1-p) = -log(1 + e^eta)
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| {
            let s = if yi { e } else { -e };
            -softplus(-s)
        })
        .sum()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Maximum-likelihood fit by IRLS with step-halving.
pub fn fit_terms(x: &Matrix, y: &[bool], terms: &[Term]) -> Result<GlmFit> {
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!("{} rows vs {} labels", x.rows(), y.len())));
    }
    check_classes(y, 1)?;
    let n = x.rows();
    let p = terms.len() + 1;
    let mut design = DMatrix::<f64>::zeros(n, p);
    let mut buf = Vec::with_capacity(p);
    for i in 0..n {
        design_row(x.row(i), terms, &mut buf);
        for j in 0..p {
            design[(i, j)] = buf[j];
        }
    }
    let yv: Vec<f64> = y.iter().map(|&b| b as u8 as f64).collect();

    let mut beta = DVector::<f64>::zeros(p);
    let eta_of = |b: &DVector<f64>| -> Vec<f64> { (&design * b).iter().copied().collect() };
    let mut eta = eta_of(&beta);
    let mut ll = log_likelihood(&eta, y);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITERATIONS {
        iterations = it;
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut score = DVector::<f64>::zeros(p);
        for i in 0..n {
            let mu = logistic(eta[i]);
            let w = (mu * (1.0 - mu)).max(1e-12);
            let r = yv[i] - mu;
            let row = design.row(i);
            for a in 0..p {
                let xa = row[a];
                if xa == 0.0 {
                    continue;
                }
                score[a] += xa * r;
                for b in a..p {
                    xtwx[(a, b)] += w * xa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[(a, b)] = xtwx[(b, a)];
            }
        }
        let step = solve_spd(xtwx, &score);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &beta + &step * scale;
            let cand_eta = eta_of(&cand);
            let cand_ll = log_likelihood(&cand_eta, y);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs() {
                let change = (cand_ll - ll).abs() / (ll.abs() + 0.1);
                beta = cand;
                eta = cand_eta;
                ll = cand_ll;
                accepted = true;
                if change < REL_TOLERANCE {
                    converged = true;
                }
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            converged = true;
        }
        if converged {
            break;
        }
        if beta.iter().any(|b| b.abs() > 10.0 * SEPARATION_BOUND) {
            break;
        }
    }
    let separated = beta.iter().any(|b| b.abs() > SEPARATION_BOUND);
    if separated {
        for b in beta.iter_mut() {
            *b = b.clamp(-SEPARATION_BOUND, SEPARATION_BOUND);
        }
        ll = log_likelihood(&eta_of(&beta), y);
    }
    Ok(GlmFit {
        coefficients: beta.iter().copied().collect(),
        log_likelihood: ll,
        iterations,
        converged,
        separated,
    })
}

fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = a.clone().cholesky() {
        return ch.solve(b);
    }
    let p = a.nrows();
    let trace: f64 = (0..p).map(|i| a[(i, i)]).sum::<f64>().max(1.0);
    let mut ridge = 1e-10 * trace;
    loop {
        let mut r = a.clone();
        for i in 0..p {
            r[(i, i)] += ridge;
        }
        if let Some(ch) = r.cholesky() {
            return ch.solve(b);
        }
        ridge *= 10.0;
    }
}

/// A fitted model: selected terms and their coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    pub factor_names: Vec<String>,
    /// Full candidate scope, in design order.
    pub scope: Vec<Term>,
    pub terms: Vec<Term>,
    /// Intercept first, then one per selected term.
    pub coefficients: Vec<f64>,
    pub log_likelihood: f64,
    pub criterion: f64,
    pub n_obs: usize,
    pub separated: bool,
    pub selection: Selection,
}

impl GlmModel {
    pub fn eta(&self, base: &[f64]) -> f64 {
        self.coefficients[0]
            + self
                .terms
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(t, c)| c * t.value(base))
                .sum::<f64>()
    }

    pub fn predict(&self, base: &[f64]) -> f64 {
        logistic(self.eta(base))
    }

    pub fn predict_all(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    /// Coefficient of every scope term (0 when unselected).
    pub fn scope_coefficients(&self) -> Vec<(String, f64)> {
        self.scope
            .iter()
            .map(|t| {
                let c = self
                    .terms
                    .iter()
                    .position(|s| s == t)
                    .map_or(0.0, |k| self.coefficients[k + 1]);
                (t.label(&self.factor_names), c)
            })
            .collect()
    }

    pub fn aic(&self) -> f64 {
        -2.0 * self.log_likelihood + 2.0 * self.coefficients.len() as f64
    }
}

fn criterion(fit: &GlmFit, k: f64) -> f64 {
    -2.0 * fit.log_likelihood + k * fit.coefficients.len() as f64
}

/// Fit `scope` on `(x, y)` and select terms.
pub fn glm_fit(
    x: &Matrix,
    y: &[bool],
    factor_names: &[String],
    scope: &[Term],
    selection: Selection,
) -> Result<GlmModel> {
    if factor_names.len() != x.cols() {
        return Err(Error::Dimension(format!(
            "{} factor names for {} columns",
            factor_names.len(),
            x.cols()
        )));
    }
    if let Some(t) = scope.iter().find(|t| t.factors().iter().any(|&f| f >= x.cols())) {
        return Err(Error::Dimension(format!("term {t:?} refers to a missing column")));
    }
    let k = match selection {
        Selection::Bic => (y.len() as f64).ln(),
        _ => 2.0,
    };
    let both = matches!(selection, Selection::Aic | Selection::Bic | Selection::Stepwise);

    let mut current: Vec<Term> = scope.to_vec();
    let mut fit = fit_terms(x, y, &current)?;
    let mut crit = criterion(&fit, k);
    if selection != Selection::None {
        loop {
            let mut best: Option<(f64, Vec<Term>, GlmFit)> = None;
            let mut consider = |terms: Vec<Term>| -> Result<()> {
                let f = fit_terms(x, y, &terms)?;
                let c = criterion(&f, k);
                if best.as_ref().is_none_or(|(bc, _, _)| c < *bc) {
                    best = Some((c, terms, f));
                }
                Ok(())
            };
            // drops: terms not contained in another current term
            for (i, t) in current.iter().enumerate() {
                if current.iter().any(|o| t.is_within(o)) {
                    continue;
                }
                let mut next = current.clone();
                next.remove(i);
                consider(next)?;
            }
            if both {
                for t in scope.iter().filter(|t| !current.contains(t)) {
                    let parts_present = scope
                        .iter()
                        .filter(|s| s.is_within(t))
                        .all(|s| current.contains(s));
                    if !parts_present {
                        continue;
                    }
                    // keep scope order so coefficients line up deterministically
                    let next: Vec<Term> = scope
                        .iter()
                        .filter(|s| current.contains(s) || *s == t)
                        .cloned()
                        .collect();
                    consider(next)?;
                }
            }
            match best {
                Some((c, terms, f)) if c < crit - 1e-10 => {
                    current = terms;
                    fit = f;
                    crit = c;
                }
                _ => break,
            }
        }
    }
    if fit.separated {
        warn!(
            "logistic fit separated (|coefficient| > {SEPARATION_BOUND}); coefficients clipped"
        );
    }
    Ok(GlmModel {
        factor_names: factor_names.to_vec(),
        scope: scope.to_vec(),
        terms: current,
        coefficients: fit.coefficients,
        log_likelihood: fit.log_likelihood,
        criterion: crit,
        n_obs: y.len(),
        separated: fit.separated,
        selection,
    })
}

/// Main effects of every column.
pub fn main_effects(n_factors: usize) -> Vec<Term> {
    (0..n_factors).map(Term::main).collect()
}
