//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use reviewlens::coherence::{umass_for_words, SlidingWindows, DEFAULT_EPSILON};
use reviewlens::corpus::{generate_synthetic, BowDocument, SentenceKey, Vocabulary};
use reviewlens::explain::{expected_value, gain_importance, shap_matrix, tree_shap_single};
use reviewlens::features::{ordinal_design, xor_design, LabelScheme};
use reviewlens::hpo::{optimize, Params, SearchSpace, TpeConfig};
use reviewlens::lda::{GibbsSampler, LdaParams};
use reviewlens::models::{
    cohen_kappa, cross_validate, train, ClassifierSpec, ConfusionMatrix, Dataset, GbdtParams, ModelParams, Node, Tree,
};
use reviewlens::sentiment::{logit_score, score_ceiling, sigmoid, SentimentLabel, SentimentPrediction};
use reviewlens_cli::{run_pipeline, PipelineConfig};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn vocab(n: usize) -> Vocabulary {
    Vocabulary::from_frequencies((0..n).map(|i| (format!("w{i:03}"), 1)).collect())
}

fn top_ids(row: &[f64], n: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..row.len()).collect();
    ids.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    ids.truncate(n);
    ids
}

/// Greedy one-to-one matching on top-20 overlap, largest overlaps first.
fn matched_overlap(learned: &[Vec<usize>], truth: &[Vec<usize>]) -> f64 {
    let mut pairs = Vec::new();
    for (i, l) in learned.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            pairs.push((l.iter().filter(|w| t.contains(w)).count(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_l, mut used_t, mut total) = (vec![false; learned.len()], vec![false; truth.len()], 0.0);
    for (o, i, j) in pairs {
        if !used_l[i] && !used_t[j] {
            used_l[i] = true;
            used_t[j] = true;
            total += o as f64 / truth[j].len() as f64;
        }
    }
    total / truth.len() as f64
}

fn topic_recovery() -> Outcome {
    let started = Instant::now();
    let c = generate_synthetic(5, 500, 2000, 40, 0.1, 0.01, 0).unwrap();
    let mut s = GibbsSampler::new(&c.docs, &vocab(500), LdaParams::new(5, 0.1, 0.01).iterations(500).seed(0)).unwrap();
    for _ in 0..500 {
        s.sweep();
    }
    let m = s.snapshot();
    let learned: Vec<Vec<usize>> = (0..5).map(|k| top_ids(&m.phi_row(k), 20)).collect();
    let truth: Vec<Vec<usize>> = c.topic_word.iter().map(|r| top_ids(r, 20)).collect();
    let overlap = matched_overlap(&learned, &truth);
    let elapsed = started.elapsed();
    outcome(
        overlap >= 0.8 && elapsed <= Duration::from_secs(120),
        format!("mean matched top-20 overlap {overlap:.3} (>= 0.8) in {:.1}s (<= 120s)", elapsed.as_secs_f64()),
    )
}

fn gibbs_invariants() -> Outcome {
    let c = generate_synthetic(5, 300, 400, 30, 0.1, 0.01, 7).unwrap();
    let mut s = GibbsSampler::new(&c.docs, &vocab(300), LdaParams::new(5, 0.1, 0.01).seed(7)).unwrap();
    let mut checks = 0;
    if let Err(e) = s.check_invariants() {
        return outcome(false, format!("initial state: {e}"));
    }
    for sweep in 1..=500 {
        s.sweep();
        if sweep % 50 == 0 {
            if let Err(e) = s.check_invariants() {
                return outcome(false, format!("sweep {sweep}: {e}"));
            }
            checks += 1;
        }
    }
    outcome(true, format!("counts exact and distributions normalized to 1e-9 at {checks} checkpoints"))
}

fn mean_cv(windows: &SlidingWindows, sets: &[Vec<u32>]) -> f64 {
    sets.iter().map(|w| windows.cv(w, DEFAULT_EPSILON).unwrap()).sum::<f64>() / sets.len() as f64
}

fn doc(i: usize, ids: &[u32]) -> BowDocument {
    BowDocument::from_ids(SentenceKey::new(format!("d{i:03}"), 0), ids.iter().copied())
}

fn coherence_sanity() -> Outcome {
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..10u64 {
        let c = generate_synthetic(5, 500, 2000, 40, 0.1, 0.01, 100 + seed).unwrap();
        let windows = SlidingWindows::from_bow(&c.docs, 110).unwrap();
        let planted: Vec<Vec<u32>> =
            c.topic_word.iter().map(|r| top_ids(r, 10).into_iter().map(|w| w as u32).collect()).collect();
        let observed: Vec<u32> = (0..500u32).filter(|&w| c.docs.iter().any(|d| d.count(w) > 0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let random: Vec<Vec<u32>> =
            (0..planted.len()).map(|_| observed.choose_multiple(&mut rng, 10).copied().collect()).collect();
        let (p, r) = (mean_cv(&windows, &planted), mean_cv(&windows, &random));
        if p > r {
            wins += 1;
        }
        detail.push(format!("{p:.2}/{r:.2}"));
    }

    let pair: Vec<_> = (0..10).map(|i| doc(i, &[0, 1])).collect();
    let a = umass_for_words(&[0, 1], &pair).unwrap();
    let mut apart: Vec<_> = (0..10).map(|i| doc(i, &[1])).collect();
    apart.extend((10..15).map(|i| doc(i, &[0])));
    let b = umass_for_words(&[0, 1], &apart).unwrap();
    let umass_ok = (a - (11.0f64 / 10.0).ln()).abs() <= 1e-9 && (b - (1.0f64 / 10.0).ln()).abs() <= 1e-9;
    outcome(
        wins >= 9 && umass_ok,
        format!(
            "planted > random in {wins}/10 trials (planted/random c_v: {}); UMass examples {:.4} and {:.4} {}",
            detail.join(" "),
            a,
            b,
            if umass_ok { "match" } else { "MISMATCH" }
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn tpe_vs_random() -> Outcome {
    let space = SearchSpace { k_min: 2, k_max: 2, alpha: (0.01, 5.0), eta: (0.01, 5.0) };
    let quad = |p: &Params| -((p.alpha.ln() - 0.15f64.ln()).powi(2) + (p.eta.ln() - 0.5f64.ln()).powi(2));
    let budget = 20;
    let mut tpe_best = Vec::new();
    let mut rnd_best = Vec::new();
    let mut counts_ok = true;
    for seed in 0..20u64 {
        for (random, sink) in [(false, &mut tpe_best), (true, &mut rnd_best)] {
            let cfg = TpeConfig { seed, n_startup: if random { budget } else { 5 }, ..TpeConfig::default() };
            let mut calls = 0;
            let out = optimize(
                |p, _| -> Result<f64, String> {
                    calls += 1;
                    Ok(quad(p))
                },
                &space,
                budget,
                &cfg,
            )
            .unwrap();
            counts_ok &= calls == budget && out.history.len() == budget;
            sink.push(out.best.unwrap().objective.unwrap());
        }
    }
    let (t, r) = (median(tpe_best), median(rnd_best));
    outcome(
        t >= r && counts_ok,
        format!(
            "median best TPE {t:.4} vs random {r:.4}; {} evaluations per run",
            if counts_ok { "exactly 20" } else { "NOT 20" }
        ),
    )
}

fn score(label: SentimentLabel, p: f64, eps: f64) -> f64 {
    logit_score(&SentimentPrediction::new(label, p).unwrap(), eps).unwrap()
}

fn sentiment_transform() -> Outcome {
    let eps: f64 = 1e-4;
    let ceiling = ((1.0 - eps) / eps).ln();
    let mut worst_round_trip = 0.0f64;
    let mut antisymmetric = true;
    let mut over_ceiling = 0;
    for i in 0..1000 {
        let p = 0.5 + (0.5 - eps) * i as f64 / 999.0;
        let pos = score(SentimentLabel::Positive, p, eps);
        let neg = score(SentimentLabel::Negative, p, eps);
        worst_round_trip = worst_round_trip.max((sigmoid(pos.abs()) - p).abs());
        antisymmetric &= neg == -pos;
    }
    for i in 0..=1000 {
        let p = 1.0 - eps + eps * i as f64 / 1000.0;
        for label in [SentimentLabel::Positive, SentimentLabel::Negative] {
            if score(label, p.min(1.0), eps).abs() > ceiling {
                over_ceiling += 1;
            }
        }
    }
    let half = score(SentimentLabel::Positive, 0.5, eps);
    let neg88 = score(SentimentLabel::Negative, 0.88, eps);
    let ceil = score_ceiling(eps);
    let examples_ok = half.abs() <= 1e-5 && (neg88 + 1.99243).abs() <= 1e-5 && (ceil - 9.21024).abs() <= 1e-5;
    let pass = worst_round_trip <= 1e-12 && antisymmetric && over_ceiling == 0 && examples_ok;
    outcome(
        pass,
        format!(
            "round-trip max err {worst_round_trip:.1e}; antisymmetry {}; {over_ceiling} scores above ceiling; \
             examples 0.5 -> {half:.5}, (NEG, 0.88) -> {neg88:.5}, ceiling {ceil:.5}",
            if antisymmetric { "exact" } else { "BROKEN" }
        ),
    )
}

fn kappa_oracle() -> Outcome {
    let fixed = [
        (vec![vec![5, 0, 0], vec![0, 7, 0], vec![0, 0, 2]], 1.0),
        (vec![vec![40, 10], vec![20, 30]], 0.4),
        (vec![vec![25, 25], vec![25, 25]], 0.0),
    ];
    let fixed_ok = fixed.iter().all(|(m, k)| (cohen_kappa(&ConfusionMatrix::new(m.clone())) - k).abs() <= 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut invariant = 0;
    let mut tested = 0;
    while tested < 100 {
        let c = rng.random_range(2..=6);
        let m: Vec<Vec<u64>> = (0..c).map(|_| (0..c).map(|_| rng.random_range(0..60)).collect()).collect();
        if m.iter().flatten().sum::<u64>() == 0 {
            continue;
        }
        tested += 1;
        let s = rng.random_range(2..=25);
        let scaled: Vec<Vec<u64>> = m.iter().map(|r| r.iter().map(|v| v * s).collect()).collect();
        let a = cohen_kappa(&ConfusionMatrix::new(m));
        let b = cohen_kappa(&ConfusionMatrix::new(scaled));
        if (a - b).abs() <= 1e-12 && (-1.0..=1.0).contains(&a) {
            invariant += 1;
        }
    }
    outcome(
        fixed_ok && invariant == 100,
        format!("fixed matrices {}; scale invariance {invariant}/100", if fixed_ok { "match" } else { "MISMATCH" }),
    )
}

fn nonlinearity_echo() -> Outcome {
    let (mut gbdt, mut lr, mut min_gap) = (0.0, 0.0, f64::INFINITY);
    for seed in 0..10u64 {
        let d = xor_design(2000, 5, 0.05, seed).dataset();
        let g = cross_validate(&d, &ClassifierSpec::gradient_boosting().with_seed(seed), 3, seed).unwrap().mean_kappa;
        let l = cross_validate(&d, &ClassifierSpec::logistic().with_seed(seed), 3, seed).unwrap().mean_kappa;
        gbdt += g / 10.0;
        lr += l / 10.0;
        min_gap = min_gap.min(g - l);
    }
    outcome(
        gbdt - lr >= 0.2,
        format!("mean kappa GBDT {gbdt:.4} vs LR {lr:.4}, gap {:.4} (>= 0.2); smallest per-seed gap {min_gap:.4}", gbdt - lr),
    )
}

fn class_collapse_echo() -> Outcome {
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..10u64 {
        let five = ordinal_design(2000, seed);
        let three = five.relabel(LabelScheme::ThreeClass);
        let spec = ClassifierSpec::gradient_boosting().with_seed(seed);
        let k5 = cross_validate(&five.dataset(), &spec, 3, seed).unwrap().mean_kappa;
        let k3 = cross_validate(&three.dataset(), &spec, 3, seed).unwrap().mean_kappa;
        if k3 > k5 {
            wins += 1;
        }
        detail.push(format!("{k3:.2}/{k5:.2}"));
    }
    outcome(wins >= 8, format!("ThreeClass > FiveClass in {wins}/10 seeds (three/five: {})", detail.join(" ")))
}

/// Cover-weighted conditional expectation of one tree given the features in `known`.
fn conditional(tree: &Tree, node: usize, x: &[f64], known: u32, output: usize) -> f64 {
    match &tree.nodes[node] {
        Node::Leaf { values, .. } => values[output],
        Node::Split { feature, threshold, left, right, .. } => {
            if known & (1 << feature) != 0 {
                let next = if x[*feature] < *threshold { *left } else { *right };
                conditional(tree, next, x, known, output)
            } else {
                let cover = |n: usize| match &tree.nodes[n] {
                    Node::Leaf { cover, .. } | Node::Split { cover, .. } => *cover,
                };
                let (cl, cr) = (cover(*left), cover(*right));
                (cl * conditional(tree, *left, x, known, output) + cr * conditional(tree, *right, x, known, output))
                    / (cl + cr)
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn brute_force_shap(tree: &Tree, x: &[f64], output: usize) -> Vec<f64> {
    let m = x.len();
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        for s in 0u32..(1 << m) {
            if s & (1 << i) != 0 {
                continue;
            }
            let size = s.count_ones() as usize;
            let w = factorial(size) * factorial(m - size - 1) / factorial(m);
            *p += w * (conditional(tree, 0, x, s | (1 << i), output) - conditional(tree, 0, x, s, output));
        }
    }
    phi
}

fn split(feature: usize, threshold: f64, left: usize, right: usize, cover: f64) -> Node {
    Node::Split { feature, threshold, left, right, gain: 1.0, cover }
}

fn leaf(v: f64, cover: f64) -> Node {
    Node::Leaf { values: vec![v], cover }
}

/// Depth 3 over features 0..=2 of 4, covers from 30 training rows; feature 3 is a dummy.
fn hand_tree() -> Tree {
    Tree {
        nodes: vec![
            split(0, 0.5, 1, 2, 30.0),
            split(1, 0.3, 3, 4, 12.0),
            split(2, 0.7, 5, 6, 18.0),
            split(2, 0.2, 7, 8, 5.0),
            leaf(0.8, 7.0),
            split(1, 0.6, 9, 10, 11.0),
            leaf(-1.1, 7.0),
            leaf(2.0, 2.0),
            leaf(-0.4, 3.0),
            leaf(0.3, 4.0),
            leaf(1.7, 7.0),
        ],
    }
}

fn with_constant_column(mut d: Dataset) -> Dataset {
    d.rows.iter_mut().for_each(|r| r.push(1.0));
    d.feature_names.push("constant".into());
    d
}

fn shap_exactness() -> Outcome {
    let data = with_constant_column(xor_design(600, 2, 0.05, 1).dataset());
    let mut worst_local = 0.0f64;
    let mut dummy_zero = true;
    for spec in [ClassifierSpec::gradient_boosting(), ClassifierSpec::random_forest()] {
        let model = train(&data, &spec).unwrap();
        let shap = shap_matrix(&model, &data.rows).unwrap();
        let dummy = data.feature_names.len() - 1;
        for (i, x) in data.rows.iter().enumerate() {
            let margins = model.margins(x);
            for (c, m) in margins.iter().enumerate() {
                let row = &shap.values[c][i];
                worst_local = worst_local.max((row.iter().sum::<f64>() + shap.base_values[c] - m).abs());
                dummy_zero &= row[dummy] == 0.0;
            }
        }
    }

    let tree = hand_tree();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_oracle = 0.0f64;
    for _ in 0..200 {
        let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let mut phi = vec![0.0; 4];
        tree_shap_single(&tree, &x, 0, &mut phi);
        let oracle = brute_force_shap(&tree, &x, 0);
        for (a, b) in phi.iter().zip(&oracle) {
            worst_oracle = worst_oracle.max((a - b).abs());
        }
        dummy_zero &= phi[3] == 0.0;
        let local = phi.iter().sum::<f64>() + expected_value(&tree, 0) - conditional(&tree, 0, &x, 0b1111, 0);
        worst_local = worst_local.max(local.abs());
    }
    outcome(
        worst_local <= 1e-6 && worst_oracle <= 1e-9 && dummy_zero,
        format!(
            "local accuracy max err {worst_local:.1e} (<= 1e-6); oracle max diff {worst_oracle:.1e} (<= 1e-9); dummy phi {}",
            if dummy_zero { "exactly 0" } else { "NONZERO" }
        ),
    )
}

fn gain_bookkeeping() -> Outcome {
    let data = with_constant_column(xor_design(800, 3, 0.05, 4).dataset());
    let mut worst = 0.0f64;
    let mut constant_zero = true;
    for spec in [
        ClassifierSpec::gradient_boosting(),
        ClassifierSpec::histogram_boosting(),
        ClassifierSpec::random_forest(),
        ClassifierSpec {
            params: ModelParams::GradientBoosting(GbdtParams { n_rounds: 5, max_depth: 2, ..Default::default() }),
            seed: 3,
        },
    ] {
        let model = train(&data, &spec).unwrap();
        let recorded: f64 = model.ensemble().unwrap().trees.iter().flat_map(|t| t.tree.split_gains()).map(|(_, g)| g).sum();
        let g = gain_importance(&model).unwrap();
        worst = worst.max((g.total() - recorded).abs());
        constant_zero &= g.get("constant") == Some(0.0);
    }
    outcome(
        worst <= 1e-9 && constant_zero,
        format!(
            "|total - recorded| max {worst:.1e} (<= 1e-9); constant feature gain {}",
            if constant_zero { "0" } else { "NONZERO" }
        ),
    )
}

const REPORT_ARTIFACTS: [&str; 6] = [
    "table1_top_words.csv",
    "table2_coherence.csv",
    "table3_aspect_labels.csv",
    "table4_aspect_matrix.csv",
    "table5_6_cv_kappa.csv",
    "figure1_gain_importance.svg",
];

fn end_to_end() -> Outcome {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/pipeline.toml");
    let tmp = tempfile::tempdir().unwrap();
    let mut digests = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut missing = Vec::new();
    for run in ["a", "b"] {
        let mut cfg = PipelineConfig::from_file(&root).unwrap();
        cfg.out = tmp.path().join(run);
        let started = Instant::now();
        let manifest = match run_pipeline(cfg) {
            Ok(m) => m,
            Err(e) => return outcome(false, format!("run {run}: {e}")),
        };
        slowest = slowest.max(started.elapsed());
        let report = tmp.path().join(run).join("report");
        missing.extend(REPORT_ARTIFACTS.iter().filter(|a| !report.join(a).is_file()).map(|a| a.to_string()));
        let beeswarms = std::fs::read_dir(&report)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("figure2_4_beeswarm_"))
            .count();
        if beeswarms == 0 {
            missing.push("figure2_4_beeswarm_*.svg".into());
        }
        digests.push(manifest.digests());
    }
    let identical = digests[0] == digests[1];
    outcome(
        identical && missing.is_empty() && slowest <= Duration::from_secs(300),
        format!(
            "{} digests {}; all 7 report artifacts {}; slowest run {:.1}s (<= 300s)",
            digests[0].len(),
            if identical { "identical" } else { "DIFFER" },
            if missing.is_empty() { "present".to_owned() } else { format!("MISSING {missing:?}") },
            slowest.as_secs_f64()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("topic recovery", topic_recovery),
        ("Gibbs invariants", gibbs_invariants),
        ("coherence sanity", coherence_sanity),
        ("TPE vs random", tpe_vs_random),
        ("sentiment transform", sentiment_transform),
        ("kappa oracle", kappa_oracle),
        ("nonlinearity echo", nonlinearity_echo),
        ("class-collapse echo", class_collapse_echo),
        ("SHAP exactness", shap_exactness),
        ("gain bookkeeping", gain_bookkeeping),
        ("end-to-end determinism", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} {:>2}. {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            started.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
