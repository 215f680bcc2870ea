//! Rating classifiers and their evaluation.
//!
//! Three families share one interface: multinomial logistic regression,
//! a bagged Gini random forest, and second-order softmax gradient boosting
//! (exact or histogram splits). Evaluation is Cohen's kappa under
//! stratified k-fold cross-validation.

mod ensemble;
mod eval;
mod logistic;
pub mod tree;

pub use ensemble::{
    fit_boosting, fit_forest, log_priors, EnsembleTree, GbdtParams, Link, RfParams, SplitMode, TreeEnsemble,
    TreeOutput,
};
pub use eval::{cohen_kappa, cross_validate, stratified_folds, write_cv_csv, ConfusionMatrix, CvResult};
pub use logistic::{fit_logistic, objective as logistic_objective, LogisticModel, LrParams};
pub use tree::{Node, Tree};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const MIN_TRAINING_ROWS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid training data: {0}")]
    Data(String),
    #[error("invalid hyperparameters: {0}")]
    Params(String),
    #[error("expected {expected} features, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("class `{class}` has {count} rows, fewer than {folds} folds")]
    ClassTooSmall { class: String, count: usize, folds: usize },
    #[error("model artifact: {0}")]
    Artifact(String),
    #[error("{0}")]
    Io(String),
}

/// Feature rows with integer class labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    pub fn validate_for_training(&self) -> Result<(), ModelError> {
        if self.rows.len() != self.labels.len() {
            return Err(ModelError::Data(format!(
                "{} rows but {} labels",
                self.rows.len(),
                self.labels.len()
            )));
        }
        if self.class_names.len() != self.n_classes {
            return Err(ModelError::Data("class name count differs from n_classes".into()));
        }
        if self.n_rows() < MIN_TRAINING_ROWS {
            return Err(ModelError::Data(format!(
                "{} rows, at least {MIN_TRAINING_ROWS} required",
                self.n_rows()
            )));
        }
        let f = self.n_features();
        if f == 0 {
            return Err(ModelError::Data("no features".into()));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != f {
                return Err(ModelError::Dimension { expected: f, found: r.len() });
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(ModelError::Data(format!("row {i} feature {j} is not finite")));
            }
        }
        if let Some(&y) = self.labels.iter().find(|&&y| y >= self.n_classes) {
            return Err(ModelError::Data(format!("label {y} outside 0..{}", self.n_classes)));
        }
        let present = self.class_counts().iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Err(ModelError::Data("fewer than two classes present".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    LogisticRegression(LrParams),
    RandomForest(RfParams),
    GradientBoosting(GbdtParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    LogisticRegression,
    RandomForest,
    GradientBoosting,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::GradientBoosting => "gradient_boosting",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub params: ModelParams,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn logistic() -> Self {
        Self { params: ModelParams::LogisticRegression(LrParams::default()), seed: 0 }
    }

    pub fn random_forest() -> Self {
        Self { params: ModelParams::RandomForest(RfParams::default()), seed: 0 }
    }

    pub fn gradient_boosting() -> Self {
        Self { params: ModelParams::GradientBoosting(GbdtParams::default()), seed: 0 }
    }

    /// Gradient boosting with 256-bin histogram splits.
    pub fn histogram_boosting() -> Self {
        Self { params: ModelParams::GradientBoosting(GbdtParams::histogram()), seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kind(&self) -> ClassifierKind {
        match self.params {
            ModelParams::LogisticRegression(_) => ClassifierKind::LogisticRegression,
            ModelParams::RandomForest(_) => ClassifierKind::RandomForest,
            ModelParams::GradientBoosting(_) => ClassifierKind::GradientBoosting,
        }
    }

    /// Short label used in reports: `logistic_regression`, `random_forest`,
    /// `gbdt` or `gbdt_hist`.
    pub fn name(&self) -> &'static str {
        match self.params {
            ModelParams::LogisticRegression(_) => "logistic_regression",
            ModelParams::RandomForest(_) => "random_forest",
            ModelParams::GradientBoosting(GbdtParams { split_mode: SplitMode::Exact, .. }) => "gbdt",
            ModelParams::GradientBoosting(_) => "gbdt_hist",
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Params(m.to_owned()));
        match self.params {
            ModelParams::LogisticRegression(p) => {
                if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
                    return bad("lambda must be >= 0");
                }
                if !(p.tolerance > 0.0) || p.max_iterations == 0 {
                    return bad("tolerance must be > 0 and max_iterations >= 1");
                }
            }
            ModelParams::RandomForest(p) => {
                if p.n_trees == 0 || p.max_depth == 0 || p.min_samples_leaf == 0 {
                    return bad("n_trees, max_depth and min_samples_leaf must be >= 1");
                }
                if p.max_features == Some(0) {
                    return bad("max_features must be >= 1");
                }
            }
            ModelParams::GradientBoosting(p) => {
                if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
                    return bad("learning_rate must be > 0");
                }
                if p.max_depth == 0 {
                    return bad("max_depth must be >= 1");
                }
                if !(p.lambda >= 0.0 && p.gamma >= 0.0 && p.min_child_weight >= 0.0) {
                    return bad("lambda, gamma and min_child_weight must be >= 0");
                }
                if let SplitMode::Histogram { bins } = p.split_mode {
                    if !(2..=65536).contains(&bins) {
                        return bad("histogram bins must lie in 2..=65536");
                    }
                }
            }
        }
        Ok(())
    }
}

impl FromStr for ClassifierSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" | "logistic_regression" => Ok(Self::logistic()),
            "rf" | "random_forest" => Ok(Self::random_forest()),
            "gbdt" | "gradient_boosting" | "xgboost" => Ok(Self::gradient_boosting()),
            "gbdt_hist" | "histogram_boosting" | "lightgbm" => Ok(Self::histogram_boosting()),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedModel {
    Logistic(LogisticModel),
    Trees(TreeEnsemble),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ClassifierSpec,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub model: FittedModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub probabilities: Vec<Vec<f64>>,
    pub margins: Vec<Vec<f64>>,
}

pub fn train(data: &Dataset, spec: &ClassifierSpec) -> Result<TrainedModel, ModelError> {
    spec.validate()?;
    data.validate_for_training()?;
    let model = match spec.params {
        ModelParams::LogisticRegression(p) => FittedModel::Logistic(fit_logistic(data, &p)),
        ModelParams::RandomForest(p) => FittedModel::Trees(fit_forest(data, &p, spec.seed)),
        ModelParams::GradientBoosting(p) => FittedModel::Trees(fit_boosting(data, &p)),
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: *spec,
        class_names: data.class_names.clone(),
        feature_names: data.feature_names.clone(),
        model,
    })
}

/// Index of the largest value; the earliest wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn ensemble(&self) -> Option<&TreeEnsemble> {
        match &self.model {
            FittedModel::Trees(e) => Some(e),
            FittedModel::Logistic(_) => None,
        }
    }

    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        match &self.model {
            FittedModel::Logistic(m) => m.margins(x),
            FittedModel::Trees(e) => e.margins(x),
        }
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Prediction, ModelError> {
        let f = self.n_features();
        if let Some(r) = rows.iter().find(|r| r.len() != f) {
            return Err(ModelError::Dimension { expected: f, found: r.len() });
        }
        let margins: Vec<Vec<f64>> = rows.iter().map(|x| self.margins(x)).collect();
        let probabilities: Vec<Vec<f64>> = margins
            .iter()
            .map(|m| match &self.model {
                FittedModel::Logistic(_) => {
                    let mut p = m.clone();
                    logistic::softmax_in_place(&mut p);
                    p
                }
                FittedModel::Trees(e) => e.probabilities(m),
            })
            .collect();
        let labels = probabilities.iter().map(|p| argmax(p)).collect();
        Ok(Prediction {
            labels,
            probabilities,
            margins,
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Artifact(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        let c = self.n_classes();
        let f = self.n_features();
        match &self.model {
            FittedModel::Logistic(m) => {
                if m.weights.len() != c || m.intercepts.len() != c || m.weights.iter().any(|w| w.len() != f) {
                    return Err(ModelError::Artifact("weight shape mismatch".into()));
                }
                if m.weights.iter().flatten().chain(&m.intercepts).any(|v| !v.is_finite()) {
                    return Err(ModelError::Artifact("non-finite weight".into()));
                }
            }
            FittedModel::Trees(e) => {
                if e.n_classes != c || e.base_score.len() != c {
                    return Err(ModelError::Artifact("class count mismatch".into()));
                }
                for (i, t) in e.trees.iter().enumerate() {
                    t.tree
                        .validate(f)
                        .map_err(|m| ModelError::Artifact(format!("tree {i}: {m}")))?;
                    let ok = match t.output {
                        TreeOutput::Class(k) => k < c && t.tree.n_outputs() == 1,
                        TreeOutput::AllClasses => t.tree.n_outputs() == c,
                    };
                    if !ok {
                        return Err(ModelError::Artifact(format!("tree {i}: output shape mismatch")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|e| ModelError::Io(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| ModelError::Io(e.to_string()))?;
        let model: TrainedModel = serde_json::from_str(&text).map_err(|e| ModelError::Artifact(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}
