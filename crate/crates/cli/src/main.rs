use clap::{Parser, Subcommand};
use reviewlens::corpus::synthetic::synthetic_reviews;
use reviewlens_cli::{Pipeline, PipelineConfig, PipelineError, Stage};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "reviewlens", version, about = "Aspect topics, aspect sentiment and rating drivers for rated reviews")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, default_value = "pipeline.toml")]
    config: PathBuf,
    /// Overrides the configured global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the review file.
    Ingest,
    /// Segment sentences, normalize tokens and build the vocabulary.
    Preprocess,
    /// Fit the topic model and assign a topic to every sentence.
    Topics {
        /// Search K, alpha and eta instead of using fixed values.
        #[arg(long)]
        hpo: bool,
    },
    /// Score every sentence with the configured sentiment provider.
    Sentiment,
    /// Build the per-review aspect-sentiment matrices.
    Features,
    /// Cross-validate the classifiers under each label scheme.
    Train,
    /// Gain importance and SHAP summaries for the explained model.
    Explain,
    /// Collect the tables and figures into the report directory.
    Report,
    /// Run every stage in order.
    Run,
    /// Write a synthetic hotel-review corpus as JSONL.
    Synth {
        #[arg(long, default_value_t = 500)]
        reviews: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

fn load_config(cli: &Cli, force_hpo: bool) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::from_file(&cli.config).map_err(|e| PipelineError::Validation(e.0))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if force_hpo {
        cfg.hpo = Some(cfg.hpo.take().unwrap_or_default());
        cfg.topics = None;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    let stage = match &cli.command {
        Command::Synth { reviews, output } => {
            let seed = cli.seed.unwrap_or(0);
            let mut text = String::new();
            for r in synthetic_reviews(*reviews, seed) {
                text.push_str(&serde_json::to_string(&r).expect("review serializes"));
                text.push('\n');
            }
            std::fs::write(output, text)
                .map_err(|e| PipelineError::Validation(format!("cannot write {}: {e}", output.display())))?;
            println!("wrote {reviews} reviews to {}", output.display());
            return Ok(());
        }
        Command::Run => None,
        Command::Ingest => Some(Stage::Ingest),
        Command::Preprocess => Some(Stage::Preprocess),
        Command::Topics { .. } => Some(Stage::Topics),
        Command::Sentiment => Some(Stage::Sentiment),
        Command::Features => Some(Stage::Features),
        Command::Train => Some(Stage::Train),
        Command::Explain => Some(Stage::Explain),
        Command::Report => Some(Stage::Report),
    };
    let force_hpo = matches!(cli.command, Command::Topics { hpo: true });
    let mut pipeline = Pipeline::open(load_config(cli, force_hpo)?)?;
    match stage {
        Some(s) => pipeline.run_stage(s)?,
        None => {
            pipeline.run_all()?;
        }
    }
    println!("manifest: {}", pipeline.manifest_path().display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
