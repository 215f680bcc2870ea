//! Stage bookkeeping: seeds, declared inputs and outputs, and the manifest.

use crate::config::{PipelineConfig, ProviderKind};
use crate::manifest::{DataFile, RunManifest, StageRecord, StageStatus, MANIFEST_FILE, MANIFEST_FORMAT_VERSION};
use crate::stages;
use reviewlens::corpus::{DEFAULT_LEMMAS, DEFAULT_STOPWORDS};
use reviewlens::seed;
use reviewlens::sentiment::DEFAULT_LEXICON;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Preprocess,
    Topics,
    Sentiment,
    Features,
    Train,
    Explain,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Preprocess,
        Stage::Topics,
        Stage::Sentiment,
        Stage::Features,
        Stage::Train,
        Stage::Explain,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::Topics => "topics",
            Stage::Sentiment => "sentiment",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Explain => "explain",
            Stage::Report => "report",
        }
    }

    /// Stages whose outputs this stage may read.
    pub fn inputs(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Preprocess => &[Stage::Ingest],
            Stage::Topics | Stage::Sentiment => &[Stage::Preprocess],
            Stage::Features => &[Stage::Ingest, Stage::Topics, Stage::Sentiment],
            Stage::Train => &[Stage::Topics, Stage::Features],
            Stage::Explain => &[Stage::Features, Stage::Train],
            Stage::Report => &[Stage::Topics, Stage::Features, Stage::Train, Stage::Explain],
        }
    }

    /// Configuration sections the stage reads.
    fn config_sections(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &["input"],
            Stage::Preprocess => &["preprocess"],
            Stage::Topics => &["topics", "hpo", "assignment", "coherence", "topic_labels"],
            Stage::Sentiment => &["sentiment"],
            Stage::Features => &["features"],
            Stage::Train | Stage::Explain | Stage::Report => &["train", "explain", "features"],
        }
    }

    /// Data-file keys in the manifest that the stage reads.
    fn data_files(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &["input"],
            Stage::Preprocess => &["stopwords", "lemmas"],
            Stage::Topics => &["topic_labels"],
            Stage::Sentiment => &["lexicon", "sidecar"],
            _ => &[],
        }
    }

    /// Stages that consume this stage's outputs, directly or not.
    fn dependents(self) -> Vec<Stage> {
        let mut out = vec![self];
        for s in Stage::ALL {
            if s.inputs().iter().any(|i| out.contains(i)) && !out.contains(&s) {
                out.push(s);
            }
        }
        out.retain(|&s| s != self);
        out
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

/// Outputs and notes collected while one stage runs.
pub struct StageContext<'a> {
    pub stage: Stage,
    pub seed: u64,
    pub config: &'a PipelineConfig,
    out_dir: &'a Path,
    manifest: &'a RunManifest,
    outputs: BTreeMap<String, String>,
    notes: BTreeMap<String, String>,
}

impl StageContext<'_> {
    /// Writes `bytes` to `<stage>/<name>` and records its digest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), String> {
        let rel = format!("{}/{name}", self.stage.name());
        let path = self.out_dir.join(&rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
        }
        std::fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        self.outputs.insert(rel, seed::digest_hex(bytes));
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.insert(key.to_owned(), value.to_string());
    }

    /// Reads `<from>/<name>`, which must be a recorded, unmodified output of
    /// a successful run of `from`, and `from` must be a declared input.
    pub fn read(&self, from: Stage, name: &str) -> Result<Vec<u8>, String> {
        if !self.stage.inputs().contains(&from) {
            return Err(format!("stage `{}` does not read from `{from}`", self.stage));
        }
        let rel = format!("{}/{name}", from.name());
        let rec = self
            .manifest
            .stages
            .get(from.name())
            .filter(|r| r.status == StageStatus::Ok)
            .ok_or_else(|| format!("stage `{from}` has not completed; run it first"))?;
        let expected = rec
            .outputs
            .get(&rel)
            .ok_or_else(|| format!("`{rel}` is not an output of stage `{from}`"))?;
        let path = self.out_dir.join(&rel);
        let bytes = std::fs::read(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        if &seed::digest_hex(&bytes) != expected {
            return Err(format!("`{rel}` changed since stage `{from}` wrote it; rerun `{from}`"));
        }
        Ok(bytes)
    }

    pub fn read_string(&self, from: Stage, name: &str) -> Result<String, String> {
        String::from_utf8(self.read(from, name)?).map_err(|_| format!("`{from}/{name}` is not UTF-8"))
    }

    /// Names (relative to the stage directory) of the recorded outputs of `from`.
    pub fn outputs_of(&self, from: Stage) -> Vec<String> {
        let prefix = format!("{}/", from.name());
        self.manifest
            .stages
            .get(from.name())
            .map(|r| r.outputs.keys().filter_map(|k| k.strip_prefix(&prefix).map(str::to_owned)).collect())
            .unwrap_or_default()
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    out_dir: PathBuf,
    manifest: RunManifest,
}

fn file_version(content: &str) -> Option<String> {
    content
        .lines()
        .take_while(|l| l.starts_with('#') || l.trim().is_empty())
        .find_map(|l| l.trim_start_matches('#').trim().strip_prefix("version:").map(|v| v.trim().to_owned()))
}

fn data_file(path: Option<&PathBuf>, builtin: &str) -> Result<DataFile, String> {
    let (source, content) = match path {
        Some(p) => (
            p.display().to_string(),
            std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
        ),
        None => ("builtin".to_owned(), builtin.to_owned()),
    };
    Ok(DataFile {
        source,
        version: file_version(&content),
        digest: seed::digest_hex(content.as_bytes()),
    })
}

impl Pipeline {
    /// Validates the configuration and loads or starts the manifest in the
    /// output directory. Stage records whose settings or data files changed
    /// since they ran are dropped, along with everything downstream.
    pub fn open(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate().map_err(|e| PipelineError::Validation(e.0))?;
        let out_dir = config.out.clone();
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| PipelineError::Validation(format!("cannot create {}: {e}", out_dir.display())))?;
        let digest = config.digest();
        let path = out_dir.join(MANIFEST_FILE);
        let manifest = match RunManifest::load(&path) {
            Ok(mut m) if m.format_version == MANIFEST_FORMAT_VERSION => {
                m.config_digest = digest;
                m.seed = config.seed;
                m
            }
            _ => RunManifest::new(digest, config.seed),
        };
        let mut pipeline = Self { config, out_dir, manifest };
        pipeline.record_data_files().map_err(PipelineError::Validation)?;
        pipeline.drop_stale_records();
        Ok(pipeline)
    }

    /// Digest of the global seed, the stage's own settings and data files,
    /// and the fingerprints of its inputs.
    fn fingerprint(&self, stage: Stage) -> String {
        let files: BTreeMap<&str, &str> = stage
            .data_files()
            .iter()
            .filter_map(|&k| self.manifest.data_files.get(k).map(|f| (k, f.digest.as_str())))
            .collect();
        let upstream: Vec<String> = stage.inputs().iter().map(|&s| self.fingerprint(s)).collect();
        let value = serde_json::json!({
            "seed": self.config.seed,
            "settings": self.config.sections(stage.config_sections()),
            "data_files": files,
            "upstream": upstream,
        });
        seed::digest_hex(value.to_string().as_bytes())
    }

    fn drop_stale_records(&mut self) {
        let stale: Vec<Stage> = Stage::ALL
            .into_iter()
            .filter(|&s| self.manifest.stages.get(s.name()).is_some_and(|r| r.fingerprint != self.fingerprint(s)))
            .collect();
        for s in stale {
            log::warn!("settings or data for stage {s} changed since it ran; its record is discarded");
            self.manifest.stages.remove(s.name());
            if self.manifest.failed_stage.as_deref() == Some(s.name()) {
                self.manifest.failed_stage = None;
            }
        }
    }

    fn record_data_files(&mut self) -> Result<(), String> {
        let c = &self.config;
        let mut files = BTreeMap::new();
        files.insert("input".to_owned(), data_file(Some(&c.input.path), "")?);
        files.insert("stopwords".to_owned(), data_file(c.preprocess.stopwords.as_ref(), DEFAULT_STOPWORDS)?);
        files.insert("lemmas".to_owned(), data_file(c.preprocess.lemmas.as_ref(), DEFAULT_LEMMAS)?);
        match c.sentiment.provider {
            ProviderKind::Lexicon => {
                files.insert("lexicon".to_owned(), data_file(c.sentiment.lexicon.as_ref(), DEFAULT_LEXICON)?);
            }
            ProviderKind::Sidecar => {
                files.insert("sidecar".to_owned(), data_file(c.sentiment.sidecar.as_ref(), "")?);
            }
        }
        if let Some(labels) = &c.topic_labels {
            files.insert("topic_labels".to_owned(), data_file(Some(labels), "")?);
        }
        self.manifest.data_files = files;
        Ok(())
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out_dir.join(MANIFEST_FILE)
    }

    fn save_manifest(&self, stage: Stage) -> Result<(), PipelineError> {
        self.manifest.save(&self.manifest_path()).map_err(|e| PipelineError::Stage {
            stage,
            message: format!("cannot write manifest: {e}"),
        })
    }

    /// Runs one stage. Records of stages that depend on it are dropped since
    /// their inputs are about to change. On failure the manifest marks the
    /// stage and any partial outputs stay on disk.
    pub fn run_stage(&mut self, stage: Stage) -> Result<(), PipelineError> {
        for s in stage.dependents() {
            self.manifest.stages.remove(s.name());
        }
        self.manifest.stages.remove(stage.name());
        self.manifest.failed_stage = None;
        let stage_seed = seed::derive(self.config.seed, stage.name());
        log::info!("stage {stage}: starting (seed {stage_seed})");
        let started = Instant::now();
        let mut ctx = StageContext {
            stage,
            seed: stage_seed,
            config: &self.config,
            out_dir: &self.out_dir,
            manifest: &self.manifest,
            outputs: BTreeMap::new(),
            notes: BTreeMap::new(),
        };
        let result = stages::run(&mut ctx);
        let StageContext { outputs, notes, .. } = ctx;
        let duration_ms = started.elapsed().as_millis() as u64;
        let record = StageRecord {
            seed: stage_seed,
            fingerprint: self.fingerprint(stage),
            status: if result.is_ok() { StageStatus::Ok } else { StageStatus::Failed },
            outputs,
            duration_ms,
            error: result.as_ref().err().cloned(),
            notes,
        };
        self.manifest.stages.insert(stage.name().to_owned(), record);
        if result.is_err() {
            self.manifest.failed_stage = Some(stage.name().to_owned());
        }
        self.save_manifest(stage)?;
        match result {
            Ok(()) => {
                log::info!("stage {stage}: done in {duration_ms} ms");
                Ok(())
            }
            Err(message) => Err(PipelineError::Stage { stage, message }),
        }
    }

    /// All stages in order, halting at the first failure.
    pub fn run_all(&mut self) -> Result<&RunManifest, PipelineError> {
        for stage in Stage::ALL {
            self.run_stage(stage)?;
        }
        Ok(&self.manifest)
    }
}

/// Validates `config` and runs every stage.
pub fn run_pipeline(config: PipelineConfig) -> Result<RunManifest, PipelineError> {
    let mut p = Pipeline::open(config)?;
    p.run_all()?;
    Ok(p.manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dependents_follow_inputs() {
        assert_eq!(Stage::Report.dependents(), Vec::<Stage>::new());
        assert_eq!(Stage::Sentiment.dependents(), vec![Stage::Features, Stage::Train, Stage::Explain, Stage::Report]);
        assert_eq!(Stage::Ingest.dependents().len(), 7);
    }

    #[test]
    fn inputs_precede_their_stage() {
        for s in Stage::ALL {
            assert!(s.inputs().iter().all(|&i| i < s), "{s}");
        }
    }

    #[test]
    fn version_comment_is_read() {
        assert_eq!(file_version("# list\n# version: 3\nfoo\n"), Some("3".into()));
        assert_eq!(file_version("foo\n# version: 3\n"), None);
        assert!(data_file(None, DEFAULT_LEXICON).unwrap().version.is_some());
    }
}
