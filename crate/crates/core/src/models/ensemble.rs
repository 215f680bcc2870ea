//! Tree ensembles: bagged Gini forests and softmax gradient boosting.

use super::logistic::softmax_in_place;
use super::tree::{grow, FeatureIndex, GiniCriterion, GradientCriterion, GrowParams, Tree};
use super::Dataset;
use crate::seed;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per node; `None` means ⌈√F⌉.
    pub max_features: Option<usize>,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            n_trees: 300,
            max_depth: 12,
            min_samples_leaf: 5,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SplitMode {
    Exact,
    Histogram { bins: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub split_mode: SplitMode,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            max_depth: 6,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            split_mode: SplitMode::Exact,
        }
    }
}

impl GbdtParams {
    pub fn histogram() -> Self {
        Self {
            split_mode: SplitMode::Histogram { bins: 256 },
            ..Self::default()
        }
    }
}

/// Which margins a tree's leaf values feed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeOutput {
    /// Scalar leaves added to one class's margin.
    Class(usize),
    /// One leaf value per class.
    AllClasses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTree {
    pub tree: Tree,
    pub output: TreeOutput,
    /// Multiplier on leaf values (shrinkage, or 1/n_trees for voting).
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// Margins are logits.
    Softmax,
    /// Margins are already probabilities (vote fractions).
    Identity,
}

/// `margin[c] = base_score[c] + Σ_t scale_t · leaf_t(x)[c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub n_classes: usize,
    pub base_score: Vec<f64>,
    pub trees: Vec<EnsembleTree>,
    pub link: Link,
}

impl TreeEnsemble {
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        let mut m = self.base_score.clone();
        for t in &self.trees {
            let leaf = t.tree.predict(x);
            match t.output {
                TreeOutput::Class(c) => m[c] += t.scale * leaf[0],
                TreeOutput::AllClasses => {
                    for (mc, v) in m.iter_mut().zip(leaf) {
                        *mc += t.scale * v;
                    }
                }
            }
        }
        m
    }

    pub fn probabilities(&self, margins: &[f64]) -> Vec<f64> {
        let mut p = margins.to_vec();
        match self.link {
            Link::Softmax => softmax_in_place(&mut p),
            Link::Identity => {
                let s: f64 = p.iter().sum();
                if s > 0.0 {
                    p.iter_mut().for_each(|v| *v /= s);
                }
            }
        }
        p
    }
}

fn bootstrap_weights(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for _ in 0..n {
        w[rng.random_range(0..n)] += 1.0;
    }
    w
}

pub fn fit_forest(data: &Dataset, params: &RfParams, seed_value: u64) -> TreeEnsemble {
    let n_features = data.n_features();
    let mtry = params
        .max_features
        .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
        .clamp(1, n_features.max(1));
    let index = FeatureIndex::exact(&data.rows);
    let grow_params = GrowParams {
        max_depth: params.max_depth,
    };
    let scale = 1.0 / params.n_trees as f64;
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_value, &format!("tree-{t}")));
            let weights = bootstrap_weights(data.n_rows(), &mut rng);
            let criterion = GiniCriterion {
                labels: &data.labels,
                weights: &weights,
                n_classes: data.n_classes,
                min_leaf: params.min_samples_leaf as f64,
            };
            let tree = grow(&index, &criterion, &grow_params, || {
                if mtry >= n_features {
                    return None;
                }
                let mut allowed = vec![false; n_features];
                for j in rand::seq::index::sample(&mut rng, n_features, mtry) {
                    allowed[j] = true;
                }
                Some(allowed)
            });
            EnsembleTree {
                tree,
                output: TreeOutput::AllClasses,
                scale,
            }
        })
        .collect();
    TreeEnsemble {
        n_classes: data.n_classes,
        base_score: vec![0.0; data.n_classes],
        trees,
        link: Link::Identity,
    }
}

/// Smallest prior used for a class absent from the training rows.
const MIN_PRIOR: f64 = 1e-6;

pub fn log_priors(labels: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_classes];
    for &y in labels {
        counts[y] += 1.0;
    }
    let n = labels.len().max(1) as f64;
    counts.iter().map(|c| (c / n).max(MIN_PRIOR).ln()).collect()
}

pub fn fit_boosting(data: &Dataset, params: &GbdtParams) -> TreeEnsemble {
    let n = data.n_rows();
    let c = data.n_classes;
    let index = match params.split_mode {
        SplitMode::Exact => FeatureIndex::exact(&data.rows),
        SplitMode::Histogram { bins } => FeatureIndex::histogram(&data.rows, bins),
    };
    let grow_params = GrowParams {
        max_depth: params.max_depth,
    };
    let base_score = log_priors(&data.labels, c);
    let mut margins: Vec<Vec<f64>> = vec![base_score.clone(); n];
    let mut trees = Vec::with_capacity(params.n_rounds * c);
    for _ in 0..params.n_rounds {
        let probs: Vec<Vec<f64>> = margins
            .iter()
            .map(|m| {
                let mut p = m.clone();
                softmax_in_place(&mut p);
                p
            })
            .collect();
        let round: Vec<Tree> = (0..c)
            .into_par_iter()
            .map(|k| {
                let grad: Vec<f64> = probs
                    .iter()
                    .zip(&data.labels)
                    .map(|(p, &y)| p[k] - if y == k { 1.0 } else { 0.0 })
                    .collect();
                let hess: Vec<f64> = probs.iter().map(|p| (p[k] * (1.0 - p[k])).max(1e-16)).collect();
                let criterion = GradientCriterion {
                    grad: &grad,
                    hess: &hess,
                    lambda: params.lambda,
                    gamma: params.gamma,
                    min_child_weight: params.min_child_weight,
                };
                grow(&index, &criterion, &grow_params, || None)
            })
            .collect();
        for (k, tree) in round.into_iter().enumerate() {
            for (m, x) in margins.iter_mut().zip(&data.rows) {
                m[k] += params.learning_rate * tree.predict(x)[0];
            }
            trees.push(EnsembleTree {
                tree,
                output: TreeOutput::Class(k),
                scale: params.learning_rate,
            });
        }
    }
    TreeEnsemble {
        n_classes: c,
        base_score,
        trees,
        link: Link::Softmax,
    }
}
