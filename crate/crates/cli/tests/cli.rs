use reviewlens_cli::{RunManifest, StageStatus};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn reviewlens(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reviewlens"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BODY: &str = r#"
[input]
path = "reviews.jsonl"

[preprocess]
min_df = 3

[assignment]
fold_in_iterations = 10

[features]
schemes = ["three_class"]

[train]
models = ["logistic_regression", "gbdt"]
folds = 3

[explain]
model = "gbdt"
scheme = "three_class"
"#;

const TOPICS: &str = "[topics]\nk = 5\nalpha = 0.2\neta = 0.1\niterations = 40\n";
const HPO: &str = "[hpo]\nbudget = 3\n";

/// A workspace with 150 synthetic reviews and a config whose preamble and
/// topic section are supplied by the caller.
fn workspace(preamble: &str, topics: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let out = reviewlens(dir.path(), &["synth", "--reviews", "150", "--seed", "3", "--output", "reviews.jsonl"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let config = dir.path().join("pipeline.toml");
    std::fs::write(&config, format!("seed = 9\n{preamble}\n{BODY}\n{topics}")).unwrap();
    (dir, config)
}

fn manifest(dir: &Path) -> RunManifest {
    RunManifest::load(&dir.join("out/manifest.json")).unwrap()
}

#[test]
fn conflicting_topic_sections_exit_2_without_output() {
    let (dir, _) = workspace("", &format!("{TOPICS}\n{HPO}"));
    let out = reviewlens(dir.path(), &["run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not both"), "{}", stderr(&out));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_input_file_exits_2() {
    let (dir, _) = workspace("", TOPICS);
    std::fs::remove_file(dir.path().join("reviews.jsonl")).unwrap();
    let out = reviewlens(dir.path(), &["ingest"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_input_fails_ingest_with_exit_1() {
    let (dir, _) = workspace("", TOPICS);
    std::fs::write(dir.path().join("reviews.jsonl"), "").unwrap();
    let out = reviewlens(dir.path(), &["run"]);
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(dir.path());
    assert_eq!(m.failed_stage.as_deref(), Some("ingest"));
    assert_eq!(m.stages["ingest"].status, StageStatus::Failed);
    assert!(!m.stages.contains_key("preprocess"));
}

#[test]
fn stage_without_its_inputs_fails() {
    let (dir, _) = workspace("", TOPICS);
    assert!(reviewlens(dir.path(), &["ingest"]).status.success());
    let out = reviewlens(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(manifest(dir.path()).failed_stage.as_deref(), Some("train"));
}

#[test]
fn tampered_output_is_rejected_downstream() {
    let (dir, _) = workspace("", TOPICS);
    assert!(reviewlens(dir.path(), &["ingest"]).status.success());
    let path = dir.path().join("out/ingest/reviews.jsonl");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push('\n');
    std::fs::write(&path, text).unwrap();
    let out = reviewlens(dir.path(), &["preprocess"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("changed since"), "{}", stderr(&out));
}

#[test]
fn changed_settings_invalidate_only_affected_stages() {
    let (dir, config) = workspace("", TOPICS);
    assert!(reviewlens(dir.path(), &["run"]).status.success());
    let before = manifest(dir.path());
    let text = std::fs::read_to_string(&config).unwrap();
    std::fs::write(&config, text.replace("folds = 3", "folds = 4")).unwrap();
    assert!(reviewlens(dir.path(), &["explain"]).status.code() == Some(1));
    let after = manifest(dir.path());
    for kept in ["ingest", "preprocess", "topics", "sentiment", "features"] {
        assert_eq!(before.stages[kept], after.stages[kept], "{kept}");
    }
    assert!(!after.stages.contains_key("train"));
    assert!(reviewlens(dir.path(), &["train"]).status.success());
    assert!(reviewlens(dir.path(), &["explain"]).status.success());
}

#[test]
fn per_stage_commands_match_full_run() {
    let (dir, _) = workspace("", TOPICS);
    for verb in ["ingest", "preprocess", "topics", "sentiment", "features", "train", "explain", "report"] {
        let out = reviewlens(dir.path(), &[verb]);
        assert!(out.status.success(), "{verb}: {}", stderr(&out));
    }
    let stepwise = manifest(dir.path());
    assert!(stepwise.succeeded());

    let out = reviewlens(dir.path(), &["--out", "out2", "run"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let full = RunManifest::load(&dir.path().join("out2/manifest.json")).unwrap();
    assert_eq!(stepwise.digests(), full.digests());
    for name in ["table1_top_words.csv", "table5_6_cv_kappa.csv", "figure1_gain_importance.svg"] {
        assert!(dir.path().join("out2/report").join(name).is_file(), "{name}");
    }
}

#[test]
fn topic_labels_reach_tables_and_features() {
    let (dir, _) = workspace("topic_labels = \"labels.csv\"", TOPICS);
    std::fs::write(dir.path().join("labels.csv"), "topic_id,label\n1,Cleanliness\n3,Staff\n").unwrap();
    let out = reviewlens(dir.path(), &["run"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = dir.path().join("out/report");
    let aspects = std::fs::read_to_string(report.join("table3_aspect_labels.csv")).unwrap();
    assert!(aspects.contains("Cleanliness") && aspects.contains("Staff") && aspects.contains("Topic 2"));
    let words = std::fs::read_to_string(report.join("table1_top_words.csv")).unwrap();
    assert!(words.contains("Cleanliness"));
    let gain = std::fs::read_to_string(dir.path().join("out/explain/gain_importance.csv")).unwrap();
    assert!(gain.contains("Cleanliness"));
}

#[test]
fn hpo_flag_replaces_fixed_topics() {
    let (dir, _) = workspace("", TOPICS);
    for verb in ["ingest", "preprocess"] {
        assert!(reviewlens(dir.path(), &[verb]).status.success());
    }
    let out = reviewlens(dir.path(), &["topics", "--hpo"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let topics = dir.path().join("out/topics");
    let history = std::fs::read_to_string(topics.join("hpo_history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 20);
    assert!(topics.join("hpo_best.json").is_file());
    assert!(topics.join("lda_model.json").is_file());
}
