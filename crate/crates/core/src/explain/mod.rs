//! Model explanations: gain importance over split nodes and exact
//! path-dependent TreeSHAP attributions on the raw per-class margins.

mod plot;
mod shap;

pub use plot::{beeswarm_svg, gain_bar_svg};
pub use shap::{expected_value, shap_matrix, tree_shap, tree_shap_single, ShapMatrix, ShapRow};

use crate::models::{FittedModel, TrainedModel};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum ExplainError {
    #[error("{0} models are not supported here")]
    UnsupportedKind(String),
    #[error("node {node} of tree {tree} has no usable cover statistic")]
    MissingCover { tree: usize, node: usize },
    #[error("expected {expected} features, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("writing explanation: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGain {
    pub index: usize,
    pub feature: String,
    pub gain: f64,
}

/// Total split gain per feature, ordered by descending gain and then by
/// feature index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainImportance {
    pub ranked: Vec<FeatureGain>,
}

impl GainImportance {
    pub fn get(&self, feature: &str) -> Option<f64> {
        self.ranked.iter().find(|g| g.feature == feature).map(|g| g.gain)
    }

    pub fn total(&self) -> f64 {
        self.ranked.iter().map(|g| g.gain).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExplainError> {
        let io = |e: csv::Error| ExplainError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "gain"]).map_err(io)?;
        for g in &self.ranked {
            w.write_record([g.feature.clone(), format!("{:.6}", g.gain)]).map_err(io)?;
        }
        w.flush().map_err(|e| ExplainError::Io(e.to_string()))
    }
}

pub fn gain_importance(model: &TrainedModel) -> Result<GainImportance, ExplainError> {
    let FittedModel::Trees(ensemble) = &model.model else {
        return Err(ExplainError::UnsupportedKind(model.spec.kind().to_string()));
    };
    let mut totals = vec![0.0; model.n_features()];
    for t in &ensemble.trees {
        for (f, g) in t.tree.split_gains() {
            totals[f] += g;
        }
    }
    let mut ranked: Vec<FeatureGain> = totals
        .into_iter()
        .enumerate()
        .map(|(index, gain)| FeatureGain {
            index,
            feature: model.feature_names[index].clone(),
            gain,
        })
        .collect();
    ranked.sort_by(|a, b| b.gain.total_cmp(&a.gain).then(a.index.cmp(&b.index)));
    Ok(GainImportance { ranked })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapPoint {
    pub phi: f64,
    /// Rank of the row's feature value within its column, in [0, 1].
    pub quantile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub index: usize,
    pub feature: String,
    /// 1-based position by descending mean |φ|.
    pub rank: usize,
    pub mean_abs_shap: f64,
    pub points: Vec<ShapPoint>,
}

/// Quantile ranks with ties sharing their average rank.
fn quantile_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n <= 1 {
        return vec![0.5; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg / (n - 1) as f64;
        }
        i = j + 1;
    }
    ranks
}

/// Per-feature summary for one class, ordered by descending mean |φ| with
/// ties broken by feature index.
pub fn shap_summary(
    shap: &ShapMatrix,
    class: &str,
    features: &[Vec<f64>],
) -> Result<Vec<FeatureSummary>, ExplainError> {
    let c = shap
        .class_names
        .iter()
        .position(|n| n == class)
        .ok_or_else(|| ExplainError::UnknownClass(class.to_owned()))?;
    let phi = &shap.values[c];
    if features.len() != phi.len() {
        return Err(ExplainError::Dimension {
            expected: phi.len(),
            found: features.len(),
        });
    }
    let n = phi.len().max(1) as f64;
    let mut out: Vec<FeatureSummary> = (0..shap.feature_names.len())
        .map(|j| {
            let column: Vec<f64> = features.iter().map(|r| r[j]).collect();
            let q = quantile_ranks(&column);
            FeatureSummary {
                index: j,
                feature: shap.feature_names[j].clone(),
                rank: 0,
                mean_abs_shap: phi.iter().map(|r| r[j].abs()).sum::<f64>() / n,
                points: phi
                    .iter()
                    .zip(q)
                    .map(|(r, quantile)| ShapPoint { phi: r[j], quantile })
                    .collect(),
            }
        })
        .collect();
    out.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap).then(a.index.cmp(&b.index)));
    for (i, s) in out.iter_mut().enumerate() {
        s.rank = i + 1;
    }
    Ok(out)
}

/// `class,feature,rank,mean_abs_shap`
pub fn write_summary_csv<W: Write>(
    summaries: &[(String, Vec<FeatureSummary>)],
    out: W,
) -> Result<(), ExplainError> {
    let io = |e: csv::Error| ExplainError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "feature", "rank", "mean_abs_shap"]).map_err(io)?;
    for (class, rows) in summaries {
        for s in rows {
            w.write_record([
                class.clone(),
                s.feature.clone(),
                s.rank.to_string(),
                format!("{:.6}", s.mean_abs_shap),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| ExplainError::Io(e.to_string()))
}
