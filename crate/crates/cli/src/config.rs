//! Declarative pipeline configuration, read from TOML.

use reviewlens::corpus::InputFormat;
use reviewlens::features::{Aggregation, LabelScheme};
use reviewlens::hpo::{SearchSpace, TpeConfig};
use reviewlens::lda::LdaParams;
use reviewlens::models::{ClassifierKind, ClassifierSpec};
use reviewlens::seed;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Optional `topic_id,label` CSV applied to reports and feature names.
    #[serde(default)]
    pub topic_labels: Option<PathBuf>,
    pub input: InputSettings,
    #[serde(default)]
    pub preprocess: PreprocessSettings,
    #[serde(default)]
    pub topics: Option<TopicSettings>,
    #[serde(default)]
    pub hpo: Option<HpoSettings>,
    #[serde(default)]
    pub assignment: AssignmentSettings,
    #[serde(default)]
    pub coherence: CoherenceSettings,
    #[serde(default)]
    pub sentiment: SentimentSettings,
    #[serde(default)]
    pub features: FeatureSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub explain: ExplainSettings,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSettings {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: InputFormat,
}

fn default_format() -> InputFormat {
    InputFormat::Jsonl
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSettings {
    pub min_df: usize,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        Self { min_df: 5, stopwords: None, lemmas: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicSettings {
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_iterations() -> usize {
    500
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HpoSettings {
    pub budget: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    /// Gibbs sweeps per trial.
    pub iterations: usize,
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
}

impl Default for HpoSettings {
    fn default() -> Self {
        let space = SearchSpace::default();
        let tpe = TpeConfig::default();
        Self {
            budget: 20,
            k_min: space.k_min,
            k_max: space.k_max,
            alpha_min: space.alpha.0,
            alpha_max: space.alpha.1,
            eta_min: space.eta.0,
            eta_max: space.eta.1,
            iterations: 500,
            gamma: tpe.gamma,
            n_startup: tpe.n_startup,
            n_candidates: tpe.n_candidates,
        }
    }
}

impl HpoSettings {
    pub fn space(&self) -> SearchSpace {
        SearchSpace {
            k_min: self.k_min,
            k_max: self.k_max,
            alpha: (self.alpha_min, self.alpha_max),
            eta: (self.eta_min, self.eta_max),
        }
    }

    pub fn tpe(&self, seed: u64) -> TpeConfig {
        TpeConfig {
            gamma: self.gamma,
            n_startup: self.n_startup,
            n_candidates: self.n_candidates,
            seed,
            ..TpeConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssignmentSettings {
    pub fold_in_iterations: usize,
    /// Words listed per topic in the top-words table.
    pub top_words: usize,
}

impl Default for AssignmentSettings {
    fn default() -> Self {
        Self { fold_in_iterations: 50, top_words: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherenceSettings {
    pub window: usize,
    pub top_n: usize,
}

impl Default for CoherenceSettings {
    fn default() -> Self {
        Self {
            window: reviewlens::coherence::DEFAULT_WINDOW,
            top_n: reviewlens::coherence::DEFAULT_TOP_N,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Lexicon,
    Sidecar,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SentimentSettings {
    pub provider: ProviderKind,
    /// Lexicon file; the built-in lexicon when absent.
    pub lexicon: Option<PathBuf>,
    pub bias: f64,
    /// `review_id,sentence_index,label,p` scores from an external classifier.
    pub sidecar: Option<PathBuf>,
    pub epsilon: f64,
}

impl Default for SentimentSettings {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Lexicon,
            lexicon: None,
            bias: 0.0,
            sidecar: None,
            epsilon: reviewlens::sentiment::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSettings {
    pub aggregation: String,
    pub schemes: Vec<String>,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            aggregation: "sum".into(),
            schemes: vec!["five_class".into(), "three_class".into()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub models: Vec<String>,
    pub folds: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            models: vec!["logistic_regression".into(), "random_forest".into(), "gbdt".into(), "gbdt_hist".into()],
            folds: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainSettings {
    pub model: String,
    pub scheme: String,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        Self { model: "gbdt".into(), scheme: "three_class".into() }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// Topic parameters either fixed up front or searched for.
#[derive(Debug, Clone)]
pub enum TopicMode {
    Fixed(LdaParams),
    Search(HpoSettings),
}

impl PipelineConfig {
    /// Parses TOML and resolves relative paths against `base`.
    pub fn parse(content: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: PipelineConfig = toml::from_str(content).map_err(|e| ConfigError(format!("config: {e}")))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::parse(&content, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if let Ok(abs) = std::fs::canonicalize(&*p) {
                *p = abs;
            }
        };
        fix(&mut self.out);
        fix(&mut self.input.path);
        for p in [
            &mut self.topic_labels,
            &mut self.preprocess.stopwords,
            &mut self.preprocess.lemmas,
            &mut self.sentiment.lexicon,
            &mut self.sentiment.sidecar,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        match (&self.topics, &self.hpo) {
            (Some(_), Some(_)) => return err("specify either [topics] or [hpo], not both".into()),
            (None, None) => return err("one of [topics] or [hpo] is required".into()),
            _ => {}
        }
        let mut files: Vec<(&str, &PathBuf)> = vec![("input.path", &self.input.path)];
        let optional = [
            ("topic_labels", &self.topic_labels),
            ("preprocess.stopwords", &self.preprocess.stopwords),
            ("preprocess.lemmas", &self.preprocess.lemmas),
            ("sentiment.lexicon", &self.sentiment.lexicon),
            ("sentiment.sidecar", &self.sentiment.sidecar),
        ];
        files.extend(optional.iter().filter_map(|(k, p)| p.as_ref().map(|p| (*k, p))));
        for (key, path) in files {
            if !path.is_file() {
                return err(format!("{key}: file {} does not exist", path.display()));
            }
        }
        if self.preprocess.min_df < 1 {
            return err("preprocess.min_df must be >= 1".into());
        }
        match self.topic_mode() {
            TopicMode::Fixed(p) => p.validate().map_err(|e| ConfigError(format!("topics: {e}")))?,
            TopicMode::Search(h) => {
                h.space().validate().map_err(|e| ConfigError(format!("hpo: {e}")))?;
                h.tpe(0).validate().map_err(|e| ConfigError(format!("hpo: {e}")))?;
                if h.budget < 1 || h.iterations < 1 {
                    return err("hpo.budget and hpo.iterations must be >= 1".into());
                }
            }
        }
        if self.assignment.top_words < 1 || self.coherence.top_n < 2 || self.coherence.window < 2 {
            return err("top_words must be >= 1, coherence.top_n and coherence.window >= 2".into());
        }
        if !(self.sentiment.epsilon > 0.0 && self.sentiment.epsilon < 0.5) {
            return err(format!("sentiment.epsilon must lie in (0, 0.5), got {}", self.sentiment.epsilon));
        }
        if self.sentiment.provider == ProviderKind::Sidecar && self.sentiment.sidecar.is_none() {
            return err("sentiment.provider = \"sidecar\" requires sentiment.sidecar".into());
        }
        self.aggregation()?;
        let schemes = self.schemes()?;
        let models = self.models()?;
        if self.train.folds < 2 {
            return err("train.folds must be >= 2".into());
        }
        let (spec, scheme) = self.explain_target()?;
        if spec.kind() == ClassifierKind::LogisticRegression {
            return err("explain.model must be a tree model".into());
        }
        if !schemes.contains(&scheme) {
            return err(format!("explain.scheme `{}` is not among features.schemes", scheme.as_str()));
        }
        if !models.iter().any(|m| m.name() == spec.name()) {
            return err(format!("explain.model `{}` is not among train.models", spec.name()));
        }
        Ok(())
    }

    pub fn topic_mode(&self) -> TopicMode {
        match (&self.topics, &self.hpo) {
            (Some(t), _) => TopicMode::Fixed(LdaParams::new(t.k, t.alpha, t.eta).iterations(t.iterations)),
            (None, Some(h)) => TopicMode::Search(h.clone()),
            (None, None) => unreachable!("validated config has a topic mode"),
        }
    }

    pub fn aggregation(&self) -> Result<Aggregation, ConfigError> {
        Aggregation::from_str(&self.features.aggregation).map_err(|e| ConfigError(format!("features.aggregation: {e}")))
    }

    pub fn schemes(&self) -> Result<Vec<LabelScheme>, ConfigError> {
        if self.features.schemes.is_empty() {
            return Err(ConfigError("features.schemes must not be empty".into()));
        }
        let mut out: Vec<LabelScheme> = Vec::new();
        for s in &self.features.schemes {
            let scheme = LabelScheme::from_str(s).map_err(|e| ConfigError(format!("features.schemes: {e}")))?;
            if !out.contains(&scheme) {
                out.push(scheme);
            }
        }
        Ok(out)
    }

    pub fn models(&self) -> Result<Vec<ClassifierSpec>, ConfigError> {
        if self.train.models.is_empty() {
            return Err(ConfigError("train.models must not be empty".into()));
        }
        let mut out: Vec<ClassifierSpec> = Vec::new();
        for m in &self.train.models {
            let spec = ClassifierSpec::from_str(m).map_err(|e| ConfigError(format!("train.models: {e}")))?;
            if !out.iter().any(|s| s.name() == spec.name()) {
                out.push(spec);
            }
        }
        Ok(out)
    }

    pub fn explain_target(&self) -> Result<(ClassifierSpec, LabelScheme), ConfigError> {
        let spec = ClassifierSpec::from_str(&self.explain.model).map_err(|e| ConfigError(format!("explain.model: {e}")))?;
        let scheme =
            LabelScheme::from_str(&self.explain.scheme).map_err(|e| ConfigError(format!("explain.scheme: {e}")))?;
        Ok((spec, scheme))
    }

    /// Digest of everything that influences results. The output directory
    /// is excluded so the same run in two places hashes identically.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        seed::digest_hex(&json)
    }

    /// The named top-level sections as one JSON object, for per-stage
    /// fingerprints.
    pub fn sections(&self, keys: &[&str]) -> serde_json::Value {
        let full = serde_json::to_value(self).expect("config serializes");
        let picked = keys.iter().map(|&k| (k.to_owned(), full.get(k).cloned().unwrap_or_default())).collect();
        serde_json::Value::Object(picked)
    }
}
