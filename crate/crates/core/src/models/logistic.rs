//! Multinomial logistic regression with an L2 penalty on the weights,
//! fitted by L-BFGS.

use super::Dataset;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrParams {
    pub lambda: f64,
    /// Stop when the largest absolute gradient component falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LrParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            tolerance: 1e-6,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// One weight vector per class.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    fn from_theta(theta: &[f64], c: usize, f: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let weights = (0..c).map(|k| theta[k * (f + 1)..k * (f + 1) + f].to_vec()).collect();
        let intercepts = (0..c).map(|k| theta[k * (f + 1) + f]).collect();
        (weights, intercepts)
    }
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

/// Penalized mean deviance and its gradient. `theta` holds, per class, the
/// feature weights followed by the intercept; intercepts are not penalized.
///
/// J = (1/n) [ Σ_i −ln p(y_i | x_i) + (λ/2) ‖W‖² ]
pub fn objective(theta: &[f64], data: &Dataset, lambda: f64) -> (f64, Vec<f64>) {
    let c = data.n_classes;
    let f = data.n_features();
    let n = data.n_rows() as f64;
    let stride = f + 1;
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    let mut z = vec![0.0; c];
    for (x, &y) in data.rows.iter().zip(&data.labels) {
        for k in 0..c {
            let w = &theta[k * stride..k * stride + f];
            z[k] = theta[k * stride + f] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[y];
        for k in 0..c {
            let p = (z[k] - lse).exp();
            let r = p - if k == y { 1.0 } else { 0.0 };
            let g = &mut grad[k * stride..(k + 1) * stride];
            for j in 0..f {
                g[j] += r * x[j];
            }
            g[f] += r;
        }
    }
    for k in 0..c {
        for j in 0..f {
            let w = theta[k * stride + j];
            loss += 0.5 * lambda * w * w;
            grad[k * stride + j] += lambda * w;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn fit_logistic(data: &Dataset, params: &LrParams) -> LogisticModel {
    const MEMORY: usize = 10;
    let c = data.n_classes;
    let f = data.n_features();
    let mut theta = vec![0.0; c * (f + 1)];
    let (mut fx, mut g) = objective(&theta, data, params.lambda);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    let mut converged = max_abs(&g) <= params.tolerance;

    while !converged && iterations < params.max_iterations {
        iterations += 1;
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let a = dot(s, &d) / dot(y, s);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => 1.0 / max_abs(&g).max(1.0),
        };
        d.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y), a) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = dot(y, &d) / dot(y, s);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            // not a descent direction; restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            d = g.iter().map(|v| -v / max_abs(&g).max(1.0)).collect();
            slope = dot(&g, &d);
        }

        // backtracking Armijo line search
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&d).map(|(t, di)| t + step * di).collect();
            let (ft, gt) = objective(&trial, data, params.lambda);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((next, f_next, g_next)) = accepted else {
            log::debug!("logistic regression line search stalled at iteration {iterations}");
            break;
        };
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        theta = next;
        fx = f_next;
        g = g_next;
        converged = max_abs(&g) <= params.tolerance;
    }
    if !converged {
        log::warn!(
            "logistic regression stopped after {iterations} iterations, gradient {:.2e}",
            max_abs(&g)
        );
    }
    let (weights, intercepts) = LogisticModel::from_theta(&theta, c, f);
    LogisticModel {
        weights,
        intercepts,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(rows: Vec<Vec<f64>>, labels: Vec<usize>, c: usize) -> Dataset {
        let f = rows[0].len();
        Dataset {
            rows,
            labels,
            n_classes: c,
            feature_names: (0..f).map(|j| format!("f{j}")).collect(),
            class_names: (0..c).map(|k| k.to_string()).collect(),
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = data(
            vec![vec![0.5, -1.0], vec![1.5, 2.0], vec![-0.3, 0.7], vec![2.2, -0.4], vec![0.0, 0.1]],
            vec![0, 1, 2, 1, 0],
            3,
        );
        let theta: Vec<f64> = (0..9).map(|i| 0.1 * i as f64 - 0.4).collect();
        let (_, g) = objective(&theta, &d, 0.7);
        for i in 0..theta.len() {
            let h = 1e-6;
            let mut up = theta.clone();
            up[i] += h;
            let mut down = theta.clone();
            down[i] -= h;
            let fd = (objective(&up, &d, 0.7).0 - objective(&down, &d, 0.7).0) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * fd.abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn converges_to_stationary_point() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 7) as f64 - 3.0, ((i * 5) % 11) as f64 / 3.0]).collect();
        let labels: Vec<usize> = (0..60).map(|i| (i * 7 % 13) % 3).collect();
        let d = data(rows, labels, 3);
        let m = fit_logistic(&d, &LrParams::default());
        assert!(m.converged);
        let mut theta = Vec::new();
        for k in 0..3 {
            theta.extend(&m.weights[k]);
            theta.push(m.intercepts[k]);
        }
        let (_, g) = objective(&theta, &d, 1.0);
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-4);
    }

    #[test]
    fn separable_one_dimensional() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![if i < 10 { -2.0 - i as f64 * 0.1 } else { 2.0 + i as f64 * 0.1 }]).collect();
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let d = data(rows.clone(), labels.clone(), 2);
        let m = fit_logistic(&d, &LrParams::default());
        for (x, y) in rows.iter().zip(labels) {
            let z = m.margins(x);
            assert_eq!(usize::from(z[1] > z[0]), y);
        }
    }
}
