use super::{train, ClassifierSpec, Dataset, ModelError};
use crate::seed;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(counts: Vec<Vec<u64>>) -> Self {
        Self { counts }
    }

    pub fn from_labels(truth: &[usize], predicted: &[usize], n_classes: usize) -> Self {
        let mut counts = vec![vec![0u64; n_classes]; n_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            counts[t][p] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// κ = (p_o − p_e)/(1 − p_e). When chance agreement is already certain
/// (p_e = 1) the result is 1 for perfect agreement and 0 otherwise.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> f64 {
    let n = cm.total() as f64;
    assert!(n > 0.0, "kappa of an empty confusion matrix");
    let c = cm.counts.len();
    let trace: u64 = (0..c).map(|i| cm.counts[i][i]).sum();
    let p_o = trace as f64 / n;
    let p_e: f64 = (0..c)
        .map(|k| {
            let row: u64 = cm.counts[k].iter().sum();
            let col: u64 = cm.counts.iter().map(|r| r[k]).sum();
            row as f64 * col as f64
        })
        .sum::<f64>()
        / (n * n);
    if p_e >= 1.0 {
        return if p_o >= 1.0 { 1.0 } else { 0.0 };
    }
    (p_o - p_e) / (1.0 - p_e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_kappas: Vec<f64>,
    pub mean_kappa: f64,
    pub seed: u64,
}

/// Fold index per row. Each class is shuffled and dealt round-robin, with
/// every class starting where the previous one stopped, so per-fold class
/// counts differ by at most one.
pub fn stratified_folds(
    labels: &[usize],
    n_classes: usize,
    folds: usize,
    seed_value: u64,
    class_names: &[String],
) -> Result<Vec<usize>, ModelError> {
    if folds < 2 {
        return Err(ModelError::Params(format!("folds must be >= 2, got {folds}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    if let Some((c, members)) = by_class.iter().enumerate().find(|(_, m)| m.len() < folds) {
        return Err(ModelError::ClassTooSmall {
            class: class_names.get(c).cloned().unwrap_or_else(|| c.to_string()),
            count: members.len(),
            folds,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed_value);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = next;
            next = (next + 1) % folds;
        }
    }
    Ok(assignment)
}

/// Stratified k-fold kappa. Folds train in parallel; fold `i` trains with
/// a seed derived from the spec seed and `i`.
pub fn cross_validate(
    data: &Dataset,
    spec: &ClassifierSpec,
    folds: usize,
    seed_value: u64,
) -> Result<CvResult, ModelError> {
    spec.validate()?;
    data.validate_for_training()?;
    let assignment = stratified_folds(&data.labels, data.n_classes, folds, seed_value, &data.class_names)?;
    let fold_kappas = (0..folds)
        .into_par_iter()
        .map(|fold| {
            let (test, trn): (Vec<usize>, Vec<usize>) = (0..data.n_rows()).partition(|&i| assignment[i] == fold);
            let fold_spec = spec.with_seed(seed::derive(spec.seed, &format!("fold-{fold}")));
            let model = train(&data.subset(&trn), &fold_spec)?;
            let held_out = data.subset(&test);
            let pred = model.predict(&held_out.rows)?;
            let cm = ConfusionMatrix::from_labels(&held_out.labels, &pred.labels, data.n_classes);
            Ok(cohen_kappa(&cm))
        })
        .collect::<Result<Vec<f64>, ModelError>>()?;
    let mean_kappa = fold_kappas.iter().sum::<f64>() / folds as f64;
    Ok(CvResult {
        fold_kappas,
        mean_kappa,
        seed: seed_value,
    })
}

/// `model,scheme,fold_1..fold_k,mean_kappa`, one row per entry.
pub fn write_cv_csv<W: Write>(rows: &[(String, String, CvResult)], out: W) -> Result<(), ModelError> {
    let io = |e: csv::Error| ModelError::Io(e.to_string());
    let folds = rows.iter().map(|r| r.2.fold_kappas.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["model".to_owned(), "scheme".to_owned()];
    header.extend((1..=folds).map(|i| format!("fold_{i}")));
    header.push("mean_kappa".into());
    w.write_record(&header).map_err(io)?;
    for (model, scheme, cv) in rows {
        let mut rec = vec![model.clone(), scheme.clone()];
        rec.extend((0..folds).map(|i| cv.fold_kappas.get(i).map(|k| format!("{k:.4}")).unwrap_or_default()));
        rec.push(format!("{:.4}", cv.mean_kappa));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| ModelError::Io(e.to_string()))
}
