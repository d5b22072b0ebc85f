//! Soft-margin support vector machine with an RBF kernel.
//!
//! Predictors are z-scored on the training data, each class's box constraint
//! is `C * n / (2 * n_class)`, and the dual is solved by sequential minimal
//! optimization with second-order working-set selection. `(gamma, C)` is
//! chosen on a power-of-two grid by stratified inner cross-validation.

use serde::{Deserialize, Serialize};

use crate::cv::stratified_folds;
use crate::error::{check_classes, Error, Result};
use crate::matrix::Matrix;
use pomh_core::seed::Rng;

pub const KKT_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

/// Per-feature standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let (mut mean, mut sd) = (Vec::new(), Vec::new());
        for j in 0..x.cols() {
            let c = x.column(j);
            let m = c.iter().sum::<f64>() / n;
            let v = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0).max(1.0);
            mean.push(m);
            sd.push(if v > 0.0 { v.sqrt() } else { 1.0 });
        }
        Scaler { mean, sd }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| self.apply_row(r)).collect();
        Matrix::new(x.rows(), x.cols(), rows.concat()).expect("same shape")
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub scaler: Scaler,
    pub gamma: f64,
    pub c: f64,
    /// Box-constraint multipliers for (negative, positive) class.
    pub class_weights: (f64, f64),
    /// Scaled support vectors.
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    /// Training-row index of each support vector.
    pub support_index: Vec<usize>,
    pub rho: f64,
    pub iterations: usize,
}

impl SvmModel {
    /// Decision value on an unscaled row.
    pub fn decision(&self, row: &[f64]) -> f64 {
        let z = self.scaler.apply_row(row);
        self.decision_scaled(&z)
    }

    fn decision_scaled(&self, z: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * rbf(sv, z, self.gamma))
            .sum::<f64>()
            - self.rho
    }

    /// Binary vote; a decision value of exactly 0 votes negative.
    pub fn predict(&self, row: &[f64]) -> bool {
        self.decision(row) > 0.0
    }

    pub fn predict_all(&self, x: &Matrix) -> Vec<bool> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    /// Largest violation of the optimality conditions over the training set
    /// the model was fitted on.
    pub fn kkt_violation(&self, x_train: &Matrix, y: &[bool]) -> f64 {
        let mut alpha = vec![0.0; y.len()];
        for (k, &i) in self.support_index.iter().enumerate() {
            alpha[i] = self.dual_coef[k].abs();
        }
        let mut worst: f64 = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            let s = if yi { 1.0 } else { -1.0 };
            let margin = s * self.decision(x_train.row(i));
            let ci = self.c * if yi { self.class_weights.1 } else { self.class_weights.0 };
            let a = alpha[i];
            let v = if a <= 0.0 {
                (1.0 - margin).max(0.0)
            } else if a >= ci * (1.0 - 1e-12) {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub gamma: f64,
    pub c: f64,
    pub eps: f64,
    pub max_iter: Option<usize>,
}

impl SvmParams {
    pub fn new(gamma: f64, c: f64) -> Self {
        SvmParams {
            gamma,
            c,
            eps: KKT_TOLERANCE,
            max_iter: None,
        }
    }
}

/// Fit with a scaler fitted on `x`.
pub fn svm_fit(x: &Matrix, y: &[bool], params: &SvmParams) -> Result<SvmModel> {
    let scaler = Scaler::fit(x);
    svm_fit_scaled(x, y, params, scaler)
}

/// Fit with a given scaler (used inside cross-validation so that scaling is
/// fitted once on the outer training set).
pub fn svm_fit_scaled(x: &Matrix, y: &[bool], params: &SvmParams, scaler: Scaler) -> Result<SvmModel> {
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!("{} rows vs {} labels", x.rows(), y.len())));
    }
    let (n_pos, n_neg) = check_classes(y, 1)?;
    if !(params.gamma > 0.0 && params.c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma {} and C {} must be positive",
            params.gamma, params.c
        )));
    }
    let n = y.len();
    let z = scaler.apply(x);
    let weights = (n as f64 / (2.0 * n_neg as f64), n as f64 / (2.0 * n_pos as f64));
    let cbox: Vec<f64> = y
        .iter()
        .map(|&yi| params.c * if yi { weights.1 } else { weights.0 })
        .collect();
    let s: Vec<f64> = y.iter().map(|&yi| if yi { 1.0 } else { -1.0 }).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(z.row(i), z.row(j), params.gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| s[i] * s[j] * k[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = params.max_iter.unwrap_or((100 * n).max(1_000_000));
    let in_up = |a: f64, yi: f64, c: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64, c: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);
    let mut iter = 0;
    let mut last_gap;
    loop {
        // working set selection
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], s[t], cbox[t]) {
                let v = -s[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            if in_low(alpha[t], s[t], cbox[t]) {
                let v = -s[t] * grad[t];
                gmin = gmin.min(v);
                if i_sel != usize::MAX && v < gmax {
                    let b = gmax - v;
                    let mut a = k[i_sel * n + i_sel] + k[t * n + t] - 2.0 * k[i_sel * n + t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < obj_min {
                        obj_min = obj;
                        j_sel = t;
                    }
                }
            }
        }
        last_gap = gmax - gmin;
        if last_gap < params.eps || i_sel == usize::MAX || j_sel == usize::MAX {
            break;
        }
        iter += 1;
        if iter > max_iter {
            return Err(Error::NoConvergence {
                iterations: max_iter,
                violation: last_gap,
                n,
                c: params.c,
                gamma: params.gamma,
            });
        }
        let (i, j) = (i_sel, j_sel);
        let (ci, cj) = (cbox[i], cbox[j]);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if s[i] != s[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for t in 0..n {
            grad[t] += q(t, i) * dai + q(t, j) * daj;
        }
    }

    // bias
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = s[t] * grad[t];
        if alpha[t] >= cbox[t] {
            if s[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if s[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    let mut support_index = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(z.row(t).to_vec());
            dual_coef.push(s[t] * alpha[t]);
            support_index.push(t);
        }
    }
    Ok(SvmModel {
        scaler,
        gamma: params.gamma,
        c: params.c,
        class_weights: weights,
        support_vectors,
        dual_coef,
        support_index,
        rho,
        iterations: iter,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmGrid {
    pub log2_gamma: Vec<i32>,
    pub log2_c: Vec<i32>,
    pub inner_folds: usize,
}

impl Default for SvmGrid {
    fn default() -> Self {
        SvmGrid {
            log2_gamma: (-10..=-2).collect(),
            log2_c: (5..=10).collect(),
            inner_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmSelection {
    pub model: SvmModel,
    pub log2_gamma: i32,
    pub log2_c: i32,
    pub cv_error: f64,
    /// Held-out votes of every training row at the chosen parameters.
    pub cv_votes: Vec<bool>,
}

/// Grid search by inner stratified cross-validation, then refit on all rows.
pub fn svm_fit_grid(x: &Matrix, y: &[bool], grid: &SvmGrid, rng: &mut Rng) -> Result<SvmSelection> {
    check_classes(y, grid.inner_folds)?;
    if grid.log2_gamma.is_empty() || grid.log2_c.is_empty() {
        return Err(Error::InvalidParameter("empty SVM grid".into()));
    }
    let scaler = Scaler::fit(x);
    let folds = stratified_folds(y, grid.inner_folds, rng)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..grid.inner_folds)
        .map(|f| {
            let train = (0..y.len()).filter(|&i| folds[i] != f).collect();
            let test = (0..y.len()).filter(|&i| folds[i] == f).collect();
            (train, test)
        })
        .collect();
    let mut best: Option<(f64, i32, i32, Vec<bool>)> = None;
    for &lg in &grid.log2_gamma {
        for &lc in &grid.log2_c {
            let params = SvmParams::new(2f64.powi(lg), 2f64.powi(lc));
            let mut votes = vec![false; y.len()];
            for (train, test) in &splits {
                let xt = x.select_rows(train);
                let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
                let m = svm_fit_scaled(&xt, &yt, &params, scaler.clone())?;
                for &i in test {
                    votes[i] = m.predict(x.row(i));
                }
            }
            let err = votes.iter().zip(y).filter(|(v, y)| v != y).count() as f64 / y.len() as f64;
            if best.as_ref().is_none_or(|(e, ..)| err < *e) {
                best = Some((err, lg, lc, votes));
            }
        }
    }
    let (cv_error, log2_gamma, log2_c, cv_votes) = best.expect("non-empty grid");
    let model = svm_fit_scaled(x, y, &SvmParams::new(2f64.powi(log2_gamma), 2f64.powi(log2_c)), scaler)?;
    Ok(SvmSelection {
        model,
        log2_gamma,
        log2_c,
        cv_error,
        cv_votes,
    })
}
