//! Random forest of unpruned CART trees (Gini splits) with out-of-bag votes.

use log::warn;
use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_classes, Error, Result};
use crate::matrix::Matrix;
use pomh_core::seed::{derive, rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub mtry: usize,
    /// Nodes with fewer in-bag rows than this are not split.
    pub min_node_size: usize,
    pub seed: u64,
}

impl ForestParams {
    pub fn new(n_trees: usize, mtry: usize, seed: u64) -> Self {
        ForestParams {
            n_trees,
            mtry,
            min_node_size: 1,
            seed,
        }
    }
}

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Node {
    /// Split feature, or `LEAF`.
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    vote: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> bool {
        let mut k = 0usize;
        loop {
            let n = &self.nodes[k];
            if n.feature == LEAF {
                return n.vote;
            }
            k = if row[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<Tree>,
    /// Per training row: (trees voting positive, trees for which it was out of bag).
    pub oob_votes: Vec<(u32, u32)>,
}

impl ForestModel {
    /// Fraction of all trees voting positive.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let ones = self.trees.iter().filter(|t| t.predict(row)).count();
        ones as f64 / self.trees.len() as f64
    }

    pub fn predict_all(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    /// Out-of-bag probability of every training row; rows never out of bag
    /// fall back to the all-tree vote.
    pub fn oob_probabilities(&self, x_train: &Matrix) -> Vec<f64> {
        let mut fallback = 0usize;
        let p = self
            .oob_votes
            .iter()
            .enumerate()
            .map(|(i, &(ones, total))| {
                if total == 0 {
                    fallback += 1;
                    self.predict(x_train.row(i))
                } else {
                    ones as f64 / total as f64
                }
            })
            .collect();
        if fallback > 0 {
            warn!("{fallback} training rows were never out of bag; using all-tree votes for them");
        }
        p
    }

    /// Misclassification rate of the out-of-bag majority vote (ties count as
    /// negative).
    pub fn oob_error(&self, x_train: &Matrix, y: &[bool]) -> f64 {
        let p = self.oob_probabilities(x_train);
        let wrong = p.iter().zip(y).filter(|(&p, &y)| (p > 0.5) != y).count();
        wrong as f64 / y.len() as f64
    }
}

pub fn rf_fit(x: &Matrix, y: &[bool], params: &ForestParams) -> Result<ForestModel> {
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!("{} rows vs {} labels", x.rows(), y.len())));
    }
    check_classes(y, 1)?;
    let p = x.cols();
    if params.mtry == 0 || params.mtry > p {
        return Err(Error::InvalidParameter(format!("mtry {} with {p} features", params.mtry)));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be positive".into()));
    }
    let n = x.rows();
    // column-major copy and a global sort order per feature
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();
    let order: Vec<Vec<u32>> = cols
        .iter()
        .map(|c| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut trees = Vec::with_capacity(params.n_trees);
    let mut oob_votes = vec![(0u32, 0u32); n];
    let mut builder = Builder::new(&cols, y, params.mtry, params.min_node_size.max(1));
    let mut weights = vec![0u32; n];
    for t in 0..params.n_trees {
        let mut r = rng(derive(params.seed, t as u64));
        weights.iter_mut().for_each(|w| *w = 0);
        for _ in 0..n {
            weights[r.random_range(0..n)] += 1;
        }
        let tree = builder.build(&order, &weights, &mut r);
        for i in 0..n {
            if weights[i] == 0 {
                let v = &mut oob_votes[i];
                v.1 += 1;
                if tree.predict(x.row(i)) {
                    v.0 += 1;
                }
            }
        }
        trees.push(tree);
    }
    Ok(ForestModel {
        params: *params,
        n_features: p,
        trees,
        oob_votes,
    })
}

struct Builder<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [bool],
    mtry: usize,
    min_node_size: usize,
    /// Per feature, in-bag row ids in sorted order, partitioned in place by node.
    lists: Vec<Vec<u32>>,
    side: Vec<bool>,
    scratch: Vec<u32>,
}

struct Pending {
    node: usize,
    start: usize,
    end: usize,
}

impl<'a> Builder<'a> {
    fn new(cols: &'a [Vec<f64>], y: &'a [bool], mtry: usize, min_node_size: usize) -> Self {
        Builder {
            cols,
            y,
            mtry,
            min_node_size,
            lists: vec![Vec::new(); cols.len()],
            side: vec![false; y.len()],
            scratch: Vec::new(),
        }
    }

    fn build(&mut self, order: &[Vec<u32>], weights: &[u32], r: &mut Rng) -> Tree {
        let p = self.cols.len();
        for j in 0..p {
            let l = &mut self.lists[j];
            l.clear();
            l.extend(order[j].iter().copied().filter(|&i| weights[i as usize] > 0));
        }
        let m = self.lists[0].len();
        let mut nodes = vec![Node {
            feature: LEAF,
            threshold: 0.0,
            left: 0,
            right: 0,
            vote: false,
        }];
        let mut stack = vec![Pending { node: 0, start: 0, end: m }];
        while let Some(Pending { node, start, end }) = stack.pop() {
            let (w_tot, w_pos) = self.lists[0][start..end].iter().fold((0u64, 0u64), |(t, pp), &i| {
                let w = weights[i as usize] as u64;
                (t + w, pp + if self.y[i as usize] { w } else { 0 })
            });
            nodes[node].vote = 2 * w_pos > w_tot;
            if w_pos == 0 || w_pos == w_tot || w_tot < 2 * self.min_node_size as u64 {
                continue;
            }
            let Some((feature, threshold)) = self.best_split(start, end, weights, w_tot, w_pos, r) else {
                continue;
            };
            // mark sides and stable-partition every feature list
            let col = &self.cols[feature];
            for &i in &self.lists[0][start..end] {
                self.side[i as usize] = col[i as usize] <= threshold;
            }
            let mut n_left = 0;
            for j in 0..p {
                let list = &mut self.lists[j];
                self.scratch.clear();
                let mut w = start;
                for k in start..end {
                    let i = list[k];
                    if self.side[i as usize] {
                        list[w] = i;
                        w += 1;
                    } else {
                        self.scratch.push(i);
                    }
                }
                list[w..end].copy_from_slice(&self.scratch);
                n_left = w - start;
            }
            let left = nodes.len();
            let blank = Node {
                feature: LEAF,
                threshold: 0.0,
                left: 0,
                right: 0,
                vote: false,
            };
            nodes.push(blank);
            nodes.push(blank);
            nodes[node].feature = feature as u32;
            nodes[node].threshold = threshold;
            nodes[node].left = left as u32;
            nodes[node].right = (left + 1) as u32;
            stack.push(Pending {
                node: left + 1,
                start: start + n_left,
                end,
            });
            stack.push(Pending {
                node: left,
                start,
                end: start + n_left,
            });
        }
        Tree { nodes }
    }

    /// Best Gini split among `mtry` random features; `None` if no candidate
    /// feature separates the node.
    fn best_split(
        &self,
        start: usize,
        end: usize,
        weights: &[u32],
        w_tot: u64,
        w_pos: u64,
        r: &mut Rng,
    ) -> Option<(usize, f64)> {
        let p = self.cols.len();
        let (nt, np) = (w_tot as f64, w_pos as f64);
        let parent = (np * np + (nt - np) * (nt - np)) / nt;
        let mut best: Option<(f64, usize, f64)> = None;
        for j in sample_indices(r, p, self.mtry).into_iter() {
            let col = &self.cols[j];
            let list = &self.lists[j][start..end];
            let (mut lt, mut lp) = (0u64, 0u64);
            for k in 0..list.len() - 1 {
                let i = list[k] as usize;
                let w = weights[i] as u64;
                lt += w;
                if self.y[i] {
                    lp += w;
                }
                let (a, b) = (col[i], col[list[k + 1] as usize]);
                if a == b {
                    continue;
                }
                let (lt_f, lp_f) = (lt as f64, lp as f64);
                let (rt_f, rp_f) = (nt - lt_f, np - lp_f);
                let score = (lp_f * lp_f + (lt_f - lp_f) * (lt_f - lp_f)) / lt_f
                    + (rp_f * rp_f + (rt_f - rp_f) * (rt_f - rp_f)) / rt_f;
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, j, 0.5 * (a + b)));
                }
            }
        }
        let (score, j, mut thr) = best?;
        if score <= parent + 1e-12 * parent.abs() {
            return None;
        }
        // guard against a midpoint rounding onto the upper value
        let col = &self.cols[j];
        let below = self.lists[j][start..end]
            .iter()
            .map(|&i| col[i as usize])
            .filter(|&v| v <= thr)
            .fold(f64::NEG_INFINITY, f64::max);
        if below == f64::NEG_INFINITY {
            return None;
        }
        let above_exists = self.lists[j][start..end].iter().any(|&i| col[i as usize] > thr);
        if !above_exists {
            thr = below;
            if !self.lists[j][start..end].iter().any(|&i| col[i as usize] > thr) {
                return None;
            }
        }
        Some((j, thr))
    }
}
