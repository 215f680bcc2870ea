//! Path-dependent TreeSHAP (polynomial-time algorithm over root-to-leaf
//! paths with extend/unwind of the permutation weights).

use super::ExplainError;
use crate::models::{FittedModel, Node, TrainedModel, Tree, TreeEnsemble, TreeOutput};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElement {
        feature,
        zero,
        one,
        weight: if l == 0 { 1.0 } else { 0.0 },
    });
    let denom = (l + 1) as f64;
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / denom;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / denom;
    }
}

fn unwind(path: &mut Vec<PathElement>, i: usize) {
    let l = path.len() - 1;
    let (one, zero) = (path[i].one, path[i].zero);
    let denom = (l + 1) as f64;
    let mut next = path[l].weight;
    for j in (0..l).rev() {
        if one != 0.0 {
            let tmp = path[j].weight;
            path[j].weight = next * denom / ((j + 1) as f64 * one);
            next = tmp - path[j].weight * zero * (l - j) as f64 / denom;
        } else {
            path[j].weight = path[j].weight * denom / (zero * (l - j) as f64);
        }
    }
    for j in i..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    path.pop();
}

/// Total weight that the path would have after unwinding element `i`.
fn unwound_sum(path: &[PathElement], i: usize) -> f64 {
    let l = path.len() - 1;
    let (one, zero) = (path[i].one, path[i].zero);
    let denom = (l + 1) as f64;
    let mut total = 0.0;
    if one != 0.0 {
        let mut next = path[l].weight;
        for j in (0..l).rev() {
            let tmp = next * denom / ((j + 1) as f64 * one);
            total += tmp;
            next = path[j].weight - tmp * zero * (l - j) as f64 / denom;
        }
    } else {
        for j in (0..l).rev() {
            total += path[j].weight * denom / (zero * (l - j) as f64);
        }
    }
    total
}

struct Walk<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    output: usize,
    phi: &'a mut [f64],
}

impl Walk<'_> {
    fn recurse(&mut self, node: usize, mut path: Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
        extend(&mut path, zero, one, feature);
        match &self.tree.nodes[node] {
            Node::Leaf { values, .. } => {
                let v = values[self.output];
                for i in 1..path.len() {
                    let w = unwound_sum(&path, i);
                    let e = path[i];
                    self.phi[e.feature.expect("only the root element lacks a feature")] += w * (e.one - e.zero) * v;
                }
            }
            Node::Split {
                feature: d,
                threshold,
                left,
                right,
                cover,
                ..
            } => {
                let (hot, cold) = if self.x[*d] < *threshold {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                let (mut iz, mut io) = (1.0, 1.0);
                if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(*d)) {
                    iz = path[k].zero;
                    io = path[k].one;
                    unwind(&mut path, k);
                }
                let r_hot = self.tree.nodes[hot].cover() / cover;
                let r_cold = self.tree.nodes[cold].cover() / cover;
                self.recurse(hot, path.clone(), iz * r_hot, io, Some(*d));
                self.recurse(cold, path, iz * r_cold, 0.0, Some(*d));
            }
        }
    }
}

fn check_cover(tree: &Tree, tree_index: usize) -> Result<(), ExplainError> {
    match tree
        .nodes
        .iter()
        .position(|n| !(n.cover() > 0.0 && n.cover().is_finite()))
    {
        Some(node) if tree.nodes.len() > 1 => Err(ExplainError::MissingCover { tree: tree_index, node }),
        _ => Ok(()),
    }
}

/// Shapley values of one tree output for one row, added into `phi`.
pub fn tree_shap_single(tree: &Tree, x: &[f64], output: usize, phi: &mut [f64]) {
    let mut walk = Walk { tree, x, output, phi };
    walk.recurse(0, Vec::with_capacity(tree.depth() + 2), 1.0, 1.0, None);
}

/// Cover-weighted mean leaf value of one tree output.
pub fn expected_value(tree: &Tree, output: usize) -> f64 {
    fn walk(t: &Tree, i: usize, o: usize) -> f64 {
        match &t.nodes[i] {
            Node::Leaf { values, .. } => values[o],
            Node::Split { left, right, cover, .. } => {
                (t.nodes[*left].cover() * walk(t, *left, o) + t.nodes[*right].cover() * walk(t, *right, o)) / cover
            }
        }
    }
    walk(tree, 0, output)
}

/// Attributions for one row: `phi[class][feature]` and per-class base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapRow {
    pub phi: Vec<Vec<f64>>,
    pub base: Vec<f64>,
}

fn ensemble_of(model: &TrainedModel) -> Result<&TreeEnsemble, ExplainError> {
    match &model.model {
        FittedModel::Trees(e) => Ok(e),
        FittedModel::Logistic(_) => Err(ExplainError::UnsupportedKind(model.spec.kind().to_string())),
    }
}

fn base_values(e: &TreeEnsemble) -> Vec<f64> {
    let mut base = e.base_score.clone();
    for t in &e.trees {
        match t.output {
            TreeOutput::Class(c) => base[c] += t.scale * expected_value(&t.tree, 0),
            TreeOutput::AllClasses => {
                for (c, b) in base.iter_mut().enumerate() {
                    *b += t.scale * expected_value(&t.tree, c);
                }
            }
        }
    }
    base
}

fn row_shap(e: &TreeEnsemble, x: &[f64], base: &[f64]) -> ShapRow {
    let f = x.len();
    let mut phi = vec![vec![0.0; f]; e.n_classes];
    let mut scratch = vec![0.0; f];
    for t in &e.trees {
        let classes: Vec<(usize, usize)> = match t.output {
            TreeOutput::Class(c) => vec![(c, 0)],
            TreeOutput::AllClasses => (0..e.n_classes).map(|c| (c, c)).collect(),
        };
        for (class, output) in classes {
            scratch.iter_mut().for_each(|v| *v = 0.0);
            tree_shap_single(&t.tree, x, output, &mut scratch);
            for (p, s) in phi[class].iter_mut().zip(&scratch) {
                *p += t.scale * s;
            }
        }
    }
    ShapRow { phi, base: base.to_vec() }
}

fn check_model(model: &TrainedModel, x_len: usize) -> Result<&TreeEnsemble, ExplainError> {
    let e = ensemble_of(model)?;
    if x_len != model.n_features() {
        return Err(ExplainError::Dimension {
            expected: model.n_features(),
            found: x_len,
        });
    }
    for (i, t) in e.trees.iter().enumerate() {
        check_cover(&t.tree, i)?;
    }
    Ok(e)
}

/// Per-class attributions on the raw margin scale; for every class
/// `Σ_j phi[c][j] + base[c]` equals the model margin.
pub fn tree_shap(model: &TrainedModel, x: &[f64]) -> Result<ShapRow, ExplainError> {
    let e = check_model(model, x.len())?;
    Ok(row_shap(e, x, &base_values(e)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub base_values: Vec<f64>,
    /// `values[class][row][feature]`
    pub values: Vec<Vec<Vec<f64>>>,
}

pub fn shap_matrix(model: &TrainedModel, rows: &[Vec<f64>]) -> Result<ShapMatrix, ExplainError> {
    let f = model.n_features();
    let e = check_model(model, f)?;
    if let Some(r) = rows.iter().find(|r| r.len() != f) {
        return Err(ExplainError::Dimension { expected: f, found: r.len() });
    }
    let base = base_values(e);
    let per_row: Vec<ShapRow> = rows.par_iter().map(|x| row_shap(e, x, &base)).collect();
    let values = (0..e.n_classes)
        .map(|c| per_row.iter().map(|r| r.phi[c].clone()).collect())
        .collect();
    Ok(ShapMatrix {
        class_names: model.class_names.clone(),
        feature_names: model.feature_names.clone(),
        base_values: base,
        values,
    })
}

impl ShapMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// `row_id,class,<features>,base_value`
    pub fn write_csv<W: Write>(&self, row_ids: &[String], out: W) -> Result<(), ExplainError> {
        let io = |e: csv::Error| ExplainError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row_id".to_owned(), "class".to_owned()];
        header.extend(self.feature_names.iter().cloned());
        header.push("base_value".into());
        w.write_record(&header).map_err(io)?;
        for (c, class) in self.class_names.iter().enumerate() {
            for (r, phi) in self.values[c].iter().enumerate() {
                let mut rec = vec![row_ids.get(r).cloned().unwrap_or_else(|| r.to_string()), class.clone()];
                rec.extend(phi.iter().map(|v| format!("{v:.6}")));
                rec.push(format!("{:.6}", self.base_values[c]));
                w.write_record(&rec).map_err(io)?;
            }
        }
        w.flush().map_err(|e| ExplainError::Io(e.to_string()))
    }
}
