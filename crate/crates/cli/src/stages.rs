//! The body of each pipeline stage.

use crate::config::{ProviderKind, TopicMode};
use crate::labels::{apply_labels, parse_topic_labels, TopicLabels};
use crate::pipeline::{Stage, StageContext};
use rayon::prelude::*;
use reviewlens::coherence::{CoherenceReport, SlidingWindows, DEFAULT_EPSILON};
use reviewlens::corpus::{
    build_vocabulary, load_reviews, preprocess, segment_sentences, to_bow, PreprocessConfig, Review, Sentence,
    SentenceKey, Vocabulary,
};
use reviewlens::explain::{beeswarm_svg, gain_bar_svg, gain_importance, shap_matrix, shap_summary, write_summary_csv};
use reviewlens::features::{assemble, build_matrix, AspectVector, DesignMatrix, LabelScheme, SentenceRecord};
use reviewlens::hpo::{optimize, write_history_csv};
use reviewlens::lda::{infer_corpus, train_lda, LdaModel, LdaParams};
use reviewlens::models::{cross_validate, train, write_cv_csv, TrainedModel};
use reviewlens::seed;
use reviewlens::sentiment::{load_external_scores, score_sentences, Lexicon, LexiconProvider, SentimentProvider};
use std::collections::HashMap;

type StageResult = Result<(), String>;

pub(crate) fn run(ctx: &mut StageContext) -> StageResult {
    match ctx.stage {
        Stage::Ingest => ingest(ctx),
        Stage::Preprocess => preprocess_stage(ctx),
        Stage::Topics => topics(ctx),
        Stage::Sentiment => sentiment(ctx),
        Stage::Features => features(ctx),
        Stage::Train => train_stage(ctx),
        Stage::Explain => explain(ctx),
        Stage::Report => report(ctx),
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> Result<(), String>) -> Result<Vec<u8>, String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        out.extend(serde_json::to_vec(item).expect("record serializes"));
        out.push(b'\n');
    }
    out
}

fn parse_jsonl<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<Vec<T>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("{what} line {}: {e}", i + 1)))
        .collect()
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().from_reader(text.as_bytes())
}

const REVIEWS: &str = "reviews.jsonl";
const SENTENCES: &str = "sentences.jsonl";
const VOCABULARY: &str = "vocabulary.tsv";
const LDA_MODEL: &str = "lda_model.json";
const TOP_WORDS: &str = "top_words.csv";
const COHERENCE: &str = "coherence.csv";
const ASPECT_LABELS: &str = "aspect_labels.csv";
const SENTENCE_TOPICS: &str = "sentence_topics.csv";
const SENTENCE_SCORES: &str = "sentence_scores.csv";
const CV_KAPPA: &str = "cv_kappa.csv";
const GAIN_CSV: &str = "gain_importance.csv";
const GAIN_SVG: &str = "gain_importance.svg";

fn matrix_file(scheme: LabelScheme) -> String {
    format!("aspect_matrix_{}.csv", scheme.as_str())
}

fn model_file(name: &str, scheme: LabelScheme) -> String {
    format!("{name}_{}.json", scheme.as_str())
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn ingest(ctx: &mut StageContext) -> StageResult {
    let input = &ctx.config.input;
    let set = load_reviews(&input.path, input.format).map_err(err)?;
    ctx.note("reviews", set.len());
    ctx.note("skipped", set.skipped);
    if set.is_empty() {
        return Err(format!("ingested 0 reviews ({} rows skipped)", set.skipped));
    }
    log::info!("ingested {} reviews, skipped {}", set.len(), set.skipped);
    ctx.write(REVIEWS, &jsonl(&set.reviews))
}

fn preprocess_config(ctx: &StageContext) -> Result<PreprocessConfig, String> {
    let p = &ctx.config.preprocess;
    let mut cfg = PreprocessConfig::default().with_min_df(p.min_df);
    if let Some(path) = &p.stopwords {
        cfg = cfg.with_stopword_file(path).map_err(err)?;
    }
    if let Some(path) = &p.lemmas {
        cfg = cfg.with_lemma_file(path).map_err(err)?;
    }
    Ok(cfg)
}

fn preprocess_stage(ctx: &mut StageContext) -> StageResult {
    let reviews: Vec<Review> = parse_jsonl(&ctx.read_string(Stage::Ingest, REVIEWS)?, REVIEWS)?;
    let cfg = preprocess_config(ctx)?;
    let sentences: Vec<Sentence> = reviews
        .par_iter()
        .flat_map_iter(|r| {
            segment_sentences(r).into_iter().map(|mut s| {
                s.tokens = preprocess(&s.raw, &cfg);
                s
            })
        })
        .collect();
    let vocab = build_vocabulary(&sentences, &cfg);
    ctx.note("sentences", sentences.len());
    ctx.note("empty_sentences", sentences.iter().filter(|s| s.tokens.is_empty()).count());
    ctx.note("vocabulary", vocab.len());
    ctx.note("vocabulary_digest", vocab.digest());
    let mut tsv = String::from("token\tdoc_freq\n");
    for (id, token) in vocab.tokens().iter().enumerate() {
        tsv.push_str(&format!("{token}\t{}\n", vocab.doc_freq(id as u32)));
    }
    ctx.write(SENTENCES, &jsonl(&sentences))?;
    ctx.write(VOCABULARY, tsv.as_bytes())
}

fn read_vocabulary(text: &str) -> Result<Vocabulary, String> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let (token, df) = line
            .split_once('\t')
            .ok_or_else(|| format!("{VOCABULARY} line {}: expected token<TAB>doc_freq", i + 1))?;
        let df: usize = df.parse().map_err(|_| format!("{VOCABULARY} line {}: bad frequency", i + 1))?;
        entries.push((token.to_owned(), df));
    }
    Ok(Vocabulary::from_frequencies(entries))
}

fn read_sentences(ctx: &StageContext) -> Result<Vec<Sentence>, String> {
    parse_jsonl(&ctx.read_string(Stage::Preprocess, SENTENCES)?, SENTENCES)
}

fn topic_labels(ctx: &StageContext) -> Result<TopicLabels, String> {
    match &ctx.config.topic_labels {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_topic_labels(&text)
        }
        None => Ok(TopicLabels::default()),
    }
}

fn topics(ctx: &mut StageContext) -> StageResult {
    let sentences = read_sentences(ctx)?;
    let vocab = read_vocabulary(&ctx.read_string(Stage::Preprocess, VOCABULARY)?)?;
    if vocab.is_empty() {
        return Err("vocabulary is empty; lower preprocess.min_df or supply more reviews".into());
    }
    let bows: Vec<_> = sentences.iter().map(|s| to_bow(s, &vocab)).collect();
    let training: Vec<_> = bows.iter().filter(|b| !b.is_empty()).cloned().collect();
    let token_lists: Vec<Vec<String>> = sentences.iter().map(|s| s.tokens.clone()).collect();
    let coh = &ctx.config.coherence;
    let windows = SlidingWindows::from_token_lists(&token_lists, &vocab, coh.window).map_err(err)?;
    let top_n = coh.top_n.min(vocab.len());

    let model = match ctx.config.topic_mode() {
        TopicMode::Fixed(params) => train_lda(&training, &vocab, params.seed(ctx.seed)).map_err(err)?,
        TopicMode::Search(h) => {
            let mut best: Option<(f64, LdaModel)> = None;
            let outcome = optimize(
                |p, trial_seed| -> Result<f64, String> {
                    let params = LdaParams::new(p.k, p.alpha, p.eta).iterations(h.iterations).seed(trial_seed);
                    let m = train_lda(&training, &vocab, params).map_err(err)?;
                    let score = CoherenceReport::cv(&m, &windows, top_n, DEFAULT_EPSILON).map_err(err)?.aggregate;
                    if score.is_finite() && best.as_ref().is_none_or(|(b, _)| score > *b) {
                        best = Some((score, m));
                    }
                    Ok(score)
                },
                &h.space(),
                h.budget,
                &h.tpe(seed::derive(ctx.seed, "tpe")),
            )
            .map_err(err)?;
            ctx.write("hpo_history.csv", &csv_bytes(|b| write_history_csv(&outcome.history, b).map_err(err))?)?;
            let trial = outcome.best.ok_or("every search trial failed")?;
            let mut best_json = serde_json::to_vec_pretty(&trial).expect("trial serializes");
            best_json.push(b'\n');
            ctx.write("hpo_best.json", &best_json)?;
            ctx.note("trials_failed", outcome.history.iter().filter(|t| t.objective.is_none()).count());
            best.ok_or("every search trial failed")?.1
        }
    };
    let k = model.k;
    ctx.note("k", k);
    ctx.note("alpha", model.alpha);
    ctx.note("eta", model.eta);
    ctx.write(LDA_MODEL, model.to_json().as_bytes())?;

    let report = CoherenceReport::cv(&model, &windows, top_n, DEFAULT_EPSILON).map_err(err)?;
    ctx.note("coherence_cv", format!("{:.6}", report.aggregate));
    ctx.write(COHERENCE, &csv_bytes(|b| report.write_csv(b).map_err(err))?)?;

    let (names, warnings) = apply_labels(&topic_labels(ctx)?, k);
    if !warnings.is_empty() {
        ctx.note("label_warnings", warnings.len());
    }
    let n_words = ctx.config.assignment.top_words.min(vocab.len());
    let mut top = csv::Writer::from_writer(Vec::new());
    let mut stub = csv::Writer::from_writer(Vec::new());
    top.write_record(["topic_id", "label", "rank", "word", "probability"]).map_err(err)?;
    stub.write_record(["topic_id", "label", "top_words"]).map_err(err)?;
    for (t, name) in names.iter().enumerate() {
        let words = model.top_words(&vocab, t, n_words).map_err(err)?;
        for (rank, (w, p)) in words.iter().enumerate() {
            top.write_record([(t + 1).to_string(), name.clone(), (rank + 1).to_string(), w.clone(), format!("{p:.6}")])
                .map_err(err)?;
        }
        let joined: Vec<&str> = words.iter().take(5).map(|(w, _)| w.as_str()).collect();
        stub.write_record([(t + 1).to_string(), name.clone(), joined.join(" ")]).map_err(err)?;
    }
    ctx.write(TOP_WORDS, &top.into_inner().map_err(err)?)?;
    ctx.write(ASPECT_LABELS, &stub.into_inner().map_err(err)?)?;

    let thetas = infer_corpus(
        &model,
        &bows,
        ctx.config.assignment.fold_in_iterations,
        seed::derive(ctx.seed, "fold-in"),
    )
    .map_err(err)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["review_id", "sentence_index", "topic_id", "weight"]).map_err(err)?;
    let mut assigned = 0usize;
    for (s, theta) in sentences.iter().zip(&thetas) {
        let (topic, weight) = match theta {
            Some(th) => {
                assigned += 1;
                let d = th.dominant();
                ((d + 1).to_string(), format!("{:.6}", th.0[d]))
            }
            None => (String::new(), String::new()),
        };
        w.write_record([s.review_id.clone(), s.index.to_string(), topic, weight]).map_err(err)?;
    }
    ctx.note("sentences_assigned", assigned);
    ctx.write(SENTENCE_TOPICS, &w.into_inner().map_err(err)?)
}

fn provider(ctx: &StageContext, sentences: &[Sentence]) -> Result<Box<dyn SentimentProvider>, String> {
    let s = &ctx.config.sentiment;
    match s.provider {
        ProviderKind::Lexicon => {
            let lexicon = match &s.lexicon {
                Some(path) => Lexicon::from_file(path).map_err(err)?,
                None => Lexicon::builtin(),
            };
            Ok(Box::new(LexiconProvider::new(lexicon.with_bias(s.bias))))
        }
        ProviderKind::Sidecar => {
            let path = s.sidecar.as_ref().ok_or("sidecar provider without a sidecar file")?;
            let scores = load_external_scores(path).map_err(err)?;
            let unknown = scores.unknown_keys(sentences);
            if !unknown.is_empty() {
                log::warn!("{} sidecar rows refer to unknown sentences, e.g. {}", unknown.len(), unknown[0]);
            }
            Ok(Box::new(scores))
        }
    }
}

fn sentiment(ctx: &mut StageContext) -> StageResult {
    let sentences = read_sentences(ctx)?;
    let provider = provider(ctx, &sentences)?;
    let scores = score_sentences(provider.as_ref(), &sentences, ctx.config.sentiment.epsilon).map_err(err)?;
    ctx.note("provider", provider.name());
    ctx.note("scored", scores.iter().flatten().count());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["review_id", "sentence_index", "score"]).map_err(err)?;
    for (s, score) in sentences.iter().zip(&scores) {
        let value = score.as_ref().map(|v| format!("{:.6}", v.value)).unwrap_or_default();
        w.write_record([s.review_id.clone(), s.index.to_string(), value]).map_err(err)?;
    }
    ctx.write(SENTENCE_SCORES, &w.into_inner().map_err(err)?)
}

/// `(key, optional value)` rows of a `review_id,sentence_index,<value>` table.
fn read_keyed_column(text: &str, what: &str) -> Result<Vec<(SentenceKey, Option<String>)>, String> {
    let mut r = csv_reader(text);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| format!("{what}: {e}"))?;
        let index: usize = rec
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format!("{what}: bad sentence_index"))?;
        let value = rec.get(2).filter(|v| !v.is_empty()).map(str::to_owned);
        out.push((SentenceKey::new(rec.get(0).unwrap_or_default(), index), value));
    }
    Ok(out)
}

fn read_feature_names(ctx: &StageContext) -> Result<Vec<String>, String> {
    let text = ctx.read_string(Stage::Topics, ASPECT_LABELS)?;
    let mut r = csv_reader(&text);
    r.records()
        .map(|rec| rec.map_err(err).and_then(|r| r.get(1).map(str::to_owned).ok_or("aspect labels: missing label".into())))
        .collect()
}

fn features(ctx: &mut StageContext) -> StageResult {
    let reviews: Vec<Review> = parse_jsonl(&ctx.read_string(Stage::Ingest, REVIEWS)?, REVIEWS)?;
    let names = read_feature_names(ctx)?;
    let k = names.len();
    let topics = read_keyed_column(&ctx.read_string(Stage::Topics, SENTENCE_TOPICS)?, SENTENCE_TOPICS)?;
    let scores: HashMap<SentenceKey, Option<String>> =
        read_keyed_column(&ctx.read_string(Stage::Sentiment, SENTENCE_SCORES)?, SENTENCE_SCORES)?
            .into_iter()
            .collect();
    let mut per_review: HashMap<&str, Vec<SentenceRecord>> = HashMap::new();
    for (key, topic) in &topics {
        let topic = match topic {
            Some(t) => {
                let id: usize = t.parse().map_err(|_| format!("{SENTENCE_TOPICS}: bad topic id `{t}`"))?;
                Some(id.checked_sub(1).filter(|&t| t < k).ok_or_else(|| format!("topic id {id} outside 1..={k}"))?)
            }
            None => None,
        };
        let score = match scores.get(key) {
            Some(Some(v)) => Some(v.parse::<f64>().map_err(|_| format!("{SENTENCE_SCORES}: bad score `{v}`"))?),
            Some(None) => None,
            None => return Err(format!("no sentiment row for sentence {key}")),
        };
        per_review.entry(key.review_id.as_str()).or_default().push(SentenceRecord { topic, score });
    }
    let aggregation = ctx.config.aggregation().map_err(err)?;
    let vectors = reviews
        .iter()
        .map(|r| {
            let records = per_review.get(r.review_id.as_str()).map_or(&[][..], Vec::as_slice);
            assemble(&r.review_id, records, r.rating, k, aggregation)
        })
        .collect::<Result<Vec<AspectVector>, _>>()
        .map_err(err)?;
    ctx.note("rows", vectors.len());
    for scheme in ctx.config.schemes().map_err(err)? {
        let m = build_matrix(&vectors, scheme, Some(names.clone())).map_err(err)?;
        ctx.write(&matrix_file(scheme), &csv_bytes(|b| m.write_csv(b).map_err(err))?)?;
        let summary = csv_bytes(|b| m.write_summary_csv(b).map_err(err))?;
        ctx.write(&format!("class_summary_{}.csv", scheme.as_str()), &summary)?;
    }
    Ok(())
}

/// Rebuilds a design matrix from its CSV form; labels are recomputed from
/// the ratings under `scheme`.
fn read_matrix(text: &str, names: Vec<String>, scheme: LabelScheme) -> Result<DesignMatrix, String> {
    let k = names.len();
    let mut r = csv_reader(text);
    let header = r.headers().map_err(err)?.clone();
    if header.len() < k + 2 || header.get(k + 1) != Some("rating") {
        return Err(format!("feature matrix has {} columns, expected {k} topics and a rating", header.len()));
    }
    let mut vectors = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(err)?;
        let scores = (1..=k)
            .map(|j| rec[j].parse::<f64>().map_err(|_| format!("feature matrix: bad value `{}`", &rec[j])))
            .collect::<Result<Vec<_>, _>>()?;
        let rating: u8 = rec[k + 1].parse().map_err(|_| format!("feature matrix: bad rating `{}`", &rec[k + 1]))?;
        vectors.push(AspectVector { review_id: rec[0].to_owned(), scores, rating });
    }
    build_matrix(&vectors, scheme, Some(names)).map_err(err)
}

fn load_matrix(ctx: &StageContext, scheme: LabelScheme, names: Vec<String>) -> Result<DesignMatrix, String> {
    read_matrix(&ctx.read_string(Stage::Features, &matrix_file(scheme))?, names, scheme)
}

fn train_stage(ctx: &mut StageContext) -> StageResult {
    let names = read_feature_names(ctx)?;
    let models = ctx.config.models().map_err(err)?;
    let (explain_spec, explain_scheme) = ctx.config.explain_target().map_err(err)?;
    let folds = ctx.config.train.folds;
    let mut rows = Vec::new();
    for scheme in ctx.config.schemes().map_err(err)? {
        let data = load_matrix(ctx, scheme, names.clone())?.dataset();
        let fold_seed = seed::derive(ctx.seed, &format!("folds-{}", scheme.as_str()));
        for spec in &models {
            let spec = spec.with_seed(seed::derive(ctx.seed, spec.name()));
            let cv = cross_validate(&data, &spec, folds, fold_seed)
                .map_err(|e| format!("{} under {}: {e}", spec.name(), scheme.as_str()))?;
            log::info!("{} {}: mean kappa {:.4}", spec.name(), scheme.as_str(), cv.mean_kappa);
            ctx.note(&format!("kappa_{}_{}", spec.name(), scheme.as_str()), format!("{:.4}", cv.mean_kappa));
            rows.push((spec.name().to_owned(), scheme.as_str().to_owned(), cv));
        }
        if scheme == explain_scheme {
            let spec = explain_spec.with_seed(seed::derive(ctx.seed, &format!("final-{}", explain_spec.name())));
            let model = train(&data, &spec).map_err(err)?;
            ctx.write(&model_file(spec.name(), scheme), model.to_json().as_bytes())?;
        }
    }
    ctx.write(CV_KAPPA, &csv_bytes(|b| write_cv_csv(&rows, b).map_err(err))?)
}

fn explain(ctx: &mut StageContext) -> StageResult {
    let (spec, scheme) = ctx.config.explain_target().map_err(err)?;
    let model: TrainedModel =
        serde_json::from_slice(&ctx.read(Stage::Train, &model_file(spec.name(), scheme))?).map_err(err)?;
    model.validate().map_err(err)?;
    let matrix = load_matrix(ctx, scheme, model.feature_names.clone())?;

    let gain = gain_importance(&model).map_err(err)?;
    ctx.write(GAIN_CSV, &csv_bytes(|b| gain.write_csv(b).map_err(err))?)?;
    let title = format!("Gain importance ({}, {})", spec.name(), scheme.as_str());
    ctx.write(GAIN_SVG, gain_bar_svg(&gain, &title).as_bytes())?;

    let shap = shap_matrix(&model, &matrix.rows).map_err(err)?;
    ctx.write("shap_values.csv", &csv_bytes(|b| shap.write_csv(&matrix.review_ids, b).map_err(err))?)?;
    let mut summaries = Vec::new();
    for class in &shap.class_names {
        let summary = shap_summary(&shap, class, &matrix.rows).map_err(err)?;
        let svg = beeswarm_svg(&summary, &format!("SHAP values for class {class}"));
        ctx.write(&format!("beeswarm_{}.svg", slug(class)), svg.as_bytes())?;
        summaries.push((class.clone(), summary));
    }
    ctx.write("shap_summary.csv", &csv_bytes(|b| write_summary_csv(&summaries, b).map_err(err))?)
}

/// The seven report artifacts, copied under stable names.
fn report(ctx: &mut StageContext) -> StageResult {
    let (_, scheme) = ctx.config.explain_target().map_err(err)?;
    let copies = [
        (Stage::Topics, TOP_WORDS.to_owned(), "table1_top_words.csv".to_owned()),
        (Stage::Topics, COHERENCE.to_owned(), "table2_coherence.csv".to_owned()),
        (Stage::Topics, ASPECT_LABELS.to_owned(), "table3_aspect_labels.csv".to_owned()),
        (Stage::Features, matrix_file(scheme), "table4_aspect_matrix.csv".to_owned()),
        (Stage::Train, CV_KAPPA.to_owned(), "table5_6_cv_kappa.csv".to_owned()),
        (Stage::Explain, GAIN_SVG.to_owned(), "figure1_gain_importance.svg".to_owned()),
    ];
    for (from, src, dst) in copies {
        let bytes = ctx.read(from, &src)?;
        ctx.write(&dst, &bytes)?;
    }
    let beeswarms: Vec<String> = ctx
        .outputs_of(Stage::Explain)
        .into_iter()
        .filter(|n| n.starts_with("beeswarm_"))
        .collect();
    if beeswarms.is_empty() {
        return Err("explain produced no beeswarm plots".into());
    }
    for name in beeswarms {
        let bytes = ctx.read(Stage::Explain, &name)?;
        ctx.write(&format!("figure2_4_{name}"), &bytes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trips_through_csv() {
        let vectors = vec![
            AspectVector { review_id: "a".into(), scores: vec![1.5, 0.0], rating: 5 },
            AspectVector { review_id: "b".into(), scores: vec![-2.25, 3.0], rating: 3 },
        ];
        let names = vec!["Food".to_owned(), "Staff".to_owned()];
        for scheme in [LabelScheme::FiveClass, LabelScheme::ThreeClass] {
            let m = build_matrix(&vectors, scheme, Some(names.clone())).unwrap();
            let mut buf = Vec::new();
            m.write_csv(&mut buf).unwrap();
            let back = read_matrix(std::str::from_utf8(&buf).unwrap(), names.clone(), scheme).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn vocabulary_round_trips_through_tsv() {
        let v = Vocabulary::from_frequencies(vec![("room".into(), 7), ("staff".into(), 5)]);
        let back = read_vocabulary("token\tdoc_freq\nroom\t7\nstaff\t5\n").unwrap();
        assert_eq!(back, v);
        assert!(read_vocabulary("token\tdoc_freq\nroom 7\n").is_err());
    }

    #[test]
    fn keyed_rows_keep_missing_values() {
        let rows = read_keyed_column("review_id,sentence_index,score\nr1,0,1.5\nr1,1,\n", "t").unwrap();
        assert_eq!(rows[0], (SentenceKey::new("r1", 0), Some("1.5".into())));
        assert_eq!(rows[1], (SentenceKey::new("r1", 1), None));
    }

    #[test]
    fn class_slugs() {
        assert_eq!(slug("Positive"), "positive");
        assert_eq!(slug("Quality of rooms"), "quality_of_rooms");
    }
}
