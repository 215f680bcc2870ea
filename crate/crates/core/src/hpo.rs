//! Tree-structured Parzen Estimator search over LDA hyperparameters
//! (topic count K, document prior α, topic prior η), maximizing an objective.
//!
//! α and η are modelled on a log scale with truncated Gaussian Parzen
//! windows; K is modelled with add-one smoothed categorical counts. Each
//! density carries one prior component so that an empty "bad" set still has
//! a proper density.

use crate::seed;
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use std::fmt::Display;
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum HpoError {
    #[error("invalid search space: {0}")]
    Space(String),
    #[error("invalid TPE configuration: {0}")]
    Config(String),
    #[error("writing search history: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub k_min: usize,
    pub k_max: usize,
    pub alpha: (f64, f64),
    pub eta: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            k_min: 3,
            k_max: 15,
            alpha: (0.01, 5.0),
            eta: (0.01, 5.0),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), HpoError> {
        if self.k_min < 2 {
            return Err(HpoError::Space(format!("K_min must be >= 2, got {}", self.k_min)));
        }
        if self.k_min > self.k_max {
            return Err(HpoError::Space(format!("empty K range [{}, {}]", self.k_min, self.k_max)));
        }
        for (name, (lo, hi)) in [("alpha", self.alpha), ("eta", self.eta)] {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(HpoError::Space(format!("{name} range ({lo}, {hi}) must satisfy 0 < lo < hi")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Params) -> bool {
        (self.k_min..=self.k_max).contains(&p.k)
            && p.alpha >= self.alpha.0
            && p.alpha <= self.alpha.1
            && p.eta >= self.eta.0
            && p.eta <= self.eta.1
    }

    /// Uniform K, log-uniform α and η.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Params {
        let k = rng.random_range(self.k_min..=self.k_max);
        let alpha = log_uniform(self.alpha, rng);
        let eta = log_uniform(self.eta, rng);
        Params { k, alpha, eta }
    }
}

fn log_uniform<R: Rng + ?Sized>((lo, hi): (f64, f64), rng: &mut R) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    (a + rng.random::<f64>() * (b - a)).exp().clamp(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub number: usize,
    pub params: Params,
    /// Present exactly when `status` is `Ok`.
    pub objective: Option<f64>,
    pub status: TrialStatus,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trial {
    pub fn ok(number: usize, params: Params, objective: f64, seed: u64) -> Self {
        Self {
            number,
            params,
            objective: Some(objective),
            status: TrialStatus::Ok,
            seed,
            error: None,
        }
    }

    pub fn failed(number: usize, params: Params, seed: u64, error: impl Into<String>) -> Self {
        Self {
            number,
            params,
            objective: None,
            status: TrialStatus::Failed,
            seed,
            error: Some(error.into()),
        }
    }

    fn ok_objective(&self) -> Option<f64> {
        match self.status {
            TrialStatus::Ok => self.objective.filter(|v| v.is_finite()),
            TrialStatus::Failed => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    /// Fraction of ok trials treated as "good".
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
    /// Lower bound for Parzen bandwidths, in log units.
    pub min_bandwidth: f64,
    pub seed: u64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 5,
            n_candidates: 24,
            min_bandwidth: 1e-3,
            seed: 0,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<(), HpoError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(HpoError::Config(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        if self.n_startup < 1 || self.n_candidates < 1 {
            return Err(HpoError::Config("n_startup and n_candidates must be >= 1".into()));
        }
        if !(self.min_bandwidth > 0.0) {
            return Err(HpoError::Config("min_bandwidth must be > 0".into()));
        }
        Ok(())
    }
}

/// Mixture of truncated Gaussians on `[lo, hi]` with equal weights.
#[derive(Debug, Clone)]
struct Parzen {
    components: Vec<(f64, f64, f64)>, // (mean, sd, truncation mass)
    lo: f64,
    hi: f64,
}

impl Parzen {
    fn fit(points: &[f64], lo: f64, hi: f64, min_bandwidth: f64) -> Self {
        let width = hi - lo;
        let mut sorted = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut comps: Vec<(f64, f64)> = sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let left = if i == 0 { lo } else { sorted[i - 1] };
                let right = sorted.get(i + 1).copied().unwrap_or(hi);
                let sd = (x - left).max(right - x).max(min_bandwidth).min(width);
                (x, sd)
            })
            .collect();
        comps.push((0.5 * (lo + hi), width));
        let components = comps
            .into_iter()
            .map(|(m, s)| {
                let n = Normal::new(m, s).expect("positive sd");
                (m, s, (n.cdf(hi) - n.cdf(lo)).max(1e-300))
            })
            .collect();
        Self { components, lo, hi }
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let w = 1.0 / self.components.len() as f64;
        let density: f64 = self
            .components
            .iter()
            .map(|&(m, s, mass)| w * Normal::new(m, s).expect("positive sd").pdf(x) / mass)
            .sum();
        density.max(f64::MIN_POSITIVE).ln()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (m, s, _) = self.components[rng.random_range(0..self.components.len())];
        let normal = rand_distr::Normal::new(m, s).expect("positive sd");
        for _ in 0..64 {
            let x = normal.sample(rng);
            if x >= self.lo && x <= self.hi {
                return x;
            }
        }
        self.lo + rng.random::<f64>() * (self.hi - self.lo)
    }
}

/// Add-one smoothed categorical density over K values.
#[derive(Debug, Clone)]
struct Categorical {
    k_min: usize,
    probs: Vec<f64>,
}

impl Categorical {
    fn fit(points: &[usize], k_min: usize, k_max: usize) -> Self {
        let m = k_max - k_min + 1;
        let mut counts = vec![1.0; m];
        for &k in points {
            counts[k - k_min] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        Self {
            k_min,
            probs: counts.into_iter().map(|c| c / total).collect(),
        }
    }

    fn log_pmf(&self, k: usize) -> f64 {
        self.probs
            .get(k.wrapping_sub(self.k_min))
            .map_or(f64::NEG_INFINITY, |p| p.ln())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.k_min + WeightedIndex::new(&self.probs).expect("positive weights").sample(rng)
    }
}

#[derive(Debug, Clone)]
struct JointDensity {
    k: Categorical,
    log_alpha: Parzen,
    log_eta: Parzen,
}

impl JointDensity {
    fn fit(trials: &[&Trial], space: &SearchSpace, min_bandwidth: f64) -> Self {
        let ks: Vec<usize> = trials.iter().map(|t| t.params.k).collect();
        let la: Vec<f64> = trials.iter().map(|t| t.params.alpha.ln()).collect();
        let le: Vec<f64> = trials.iter().map(|t| t.params.eta.ln()).collect();
        Self {
            k: Categorical::fit(&ks, space.k_min, space.k_max),
            log_alpha: Parzen::fit(&la, space.alpha.0.ln(), space.alpha.1.ln(), min_bandwidth),
            log_eta: Parzen::fit(&le, space.eta.0.ln(), space.eta.1.ln(), min_bandwidth),
        }
    }

    fn log_density(&self, p: &Params) -> f64 {
        self.k.log_pmf(p.k) + self.log_alpha.log_pdf(p.alpha.ln()) + self.log_eta.log_pdf(p.eta.ln())
    }

    fn sample<R: Rng + ?Sized>(&self, space: &SearchSpace, rng: &mut R) -> Params {
        Params {
            k: self.k.sample(rng),
            alpha: self.log_alpha.sample(rng).exp().clamp(space.alpha.0, space.alpha.1),
            eta: self.log_eta.sample(rng).exp().clamp(space.eta.0, space.eta.1),
        }
    }
}

/// The pair of densities l (good trials) and g (bad trials).
#[derive(Debug, Clone)]
pub struct FittedTpe {
    space: SearchSpace,
    good: JointDensity,
    bad: JointDensity,
    n_good: usize,
}

impl FittedTpe {
    /// Splits ok trials at the γ-quantile of the objective (top ⌈γn⌉ are
    /// good) and fits both densities. `None` when there are no ok trials.
    pub fn fit(history: &[Trial], space: &SearchSpace, config: &TpeConfig) -> Option<Self> {
        let mut ok: Vec<&Trial> = history.iter().filter(|t| t.ok_objective().is_some()).collect();
        if ok.is_empty() {
            return None;
        }
        ok.sort_by(|a, b| {
            b.ok_objective()
                .unwrap()
                .total_cmp(&a.ok_objective().unwrap())
                .then(a.number.cmp(&b.number))
        });
        let n_good = ((config.gamma * ok.len() as f64).ceil() as usize).clamp(1, ok.len());
        let (good, bad) = ok.split_at(n_good);
        Some(Self {
            space: *space,
            good: JointDensity::fit(good, space, config.min_bandwidth),
            bad: JointDensity::fit(bad, space, config.min_bandwidth),
            n_good,
        })
    }

    pub fn n_good(&self) -> usize {
        self.n_good
    }

    /// ln l(x) − ln g(x).
    pub fn log_ratio(&self, p: &Params) -> f64 {
        self.good.log_density(p) - self.bad.log_density(p)
    }

    pub fn sample_good<R: Rng + ?Sized>(&self, rng: &mut R) -> Params {
        self.good.sample(&self.space, rng)
    }

    /// The candidate with the largest l/g; the earliest wins ties.
    pub fn select(&self, candidates: &[Params]) -> Option<Params> {
        let mut best: Option<(f64, Params)> = None;
        for c in candidates {
            let r = self.log_ratio(c);
            if best.is_none_or(|(b, _)| r > b) {
                best = Some((r, *c));
            }
        }
        best.map(|(_, p)| p)
    }
}

/// Proposes the next parameters: uniform while fewer than `n_startup` ok
/// trials exist, otherwise the best of `n_candidates` draws from l by l/g.
pub fn suggest<R: Rng + ?Sized>(
    history: &[Trial],
    space: &SearchSpace,
    config: &TpeConfig,
    rng: &mut R,
) -> Result<Params, HpoError> {
    space.validate()?;
    config.validate()?;
    let n_ok = history.iter().filter(|t| t.ok_objective().is_some()).count();
    if n_ok < config.n_startup {
        return Ok(space.sample_uniform(rng));
    }
    let fitted = FittedTpe::fit(history, space, config).expect("at least one ok trial");
    let candidates: Vec<Params> = (0..config.n_candidates).map(|_| fitted.sample_good(rng)).collect();
    Ok(fitted.select(&candidates).expect("non-empty candidate set"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Option<Trial>,
    pub history: Vec<Trial>,
}

/// Runs exactly `budget` objective evaluations. An objective error or a
/// non-finite value marks that trial failed and the search continues.
pub fn optimize<F, E>(
    mut objective: F,
    space: &SearchSpace,
    budget: usize,
    config: &TpeConfig,
) -> Result<SearchOutcome, HpoError>
where
    F: FnMut(&Params, u64) -> Result<f64, E>,
    E: Display,
{
    space.validate()?;
    config.validate()?;
    if budget < 1 {
        return Err(HpoError::Config("budget must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history: Vec<Trial> = Vec::with_capacity(budget);
    for number in 0..budget {
        let params = suggest(&history, space, config, &mut rng)?;
        let trial_seed = seed::derive(config.seed, &format!("trial-{number}"));
        let trial = match objective(&params, trial_seed) {
            Ok(v) if v.is_finite() => Trial::ok(number, params, v, trial_seed),
            Ok(v) => Trial::failed(number, params, trial_seed, format!("non-finite objective {v}")),
            Err(e) => Trial::failed(number, params, trial_seed, e.to_string()),
        };
        log::info!(
            "trial {number}: K={} alpha={:.4} eta={:.4} -> {:?}",
            params.k,
            params.alpha,
            params.eta,
            trial.objective
        );
        history.push(trial);
    }
    let best = history
        .iter()
        .filter(|t| t.ok_objective().is_some())
        .fold(None::<&Trial>, |best, t| match best {
            Some(b) if b.objective >= t.objective => Some(b),
            _ => Some(t),
        })
        .cloned();
    Ok(SearchOutcome { best, history })
}

/// `trial,K,alpha,eta,coherence,status,seed`
pub fn write_history_csv<W: Write>(history: &[Trial], out: W) -> Result<(), HpoError> {
    let io = |e: csv::Error| HpoError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "K", "alpha", "eta", "coherence", "status", "seed"])
        .map_err(io)?;
    for t in history {
        w.write_record([
            t.number.to_string(),
            t.params.k.to_string(),
            format!("{:.6}", t.params.alpha),
            format!("{:.6}", t.params.eta),
            t.objective.map(|v| format!("{v:.6}")).unwrap_or_default(),
            match t.status {
                TrialStatus::Ok => "ok".into(),
                TrialStatus::Failed => "failed".into(),
            },
            t.seed.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| HpoError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    fn history_from(space: &SearchSpace, n: usize, seed: u64, f: impl Fn(&Params) -> f64) -> Vec<Trial> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let p = space.sample_uniform(&mut rng);
                Trial::ok(i, p, f(&p), 0)
            })
            .collect()
    }

    #[test]
    fn warm_up_draws_uniformly() {
        let space = SearchSpace::default();
        let cfg = TpeConfig::default();
        let history = history_from(&space, 2, 1, |p| p.alpha);
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = a.clone();
        let suggested = suggest(&history, &space, &cfg, &mut a).unwrap();
        assert_eq!(suggested, space.sample_uniform(&mut b));
        assert!(space.contains(&suggested));
    }

    #[test]
    fn all_failed_behaves_as_warm_up() {
        let space = SearchSpace::default();
        let history: Vec<Trial> = (0..10)
            .map(|i| Trial::failed(i, space.sample_uniform(&mut ChaCha8Rng::seed_from_u64(i as u64)), 0, "boom"))
            .collect();
        let mut a = ChaCha8Rng::seed_from_u64(8);
        let mut b = a.clone();
        assert_eq!(
            suggest(&history, &space, &TpeConfig::default(), &mut a).unwrap(),
            space.sample_uniform(&mut b)
        );
        assert!(FittedTpe::fit(&history, &space, &TpeConfig::default()).is_none());
    }

    #[test]
    fn warm_up_samples_stay_in_bounds() {
        let space = SearchSpace {
            k_min: 4,
            k_max: 6,
            alpha: (0.05, 0.2),
            eta: (1.0, 2.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..2000 {
            assert!(space.contains(&space.sample_uniform(&mut rng)));
        }
    }

    #[test]
    fn degenerate_spaces_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = TpeConfig::default();
        for bad in [
            SearchSpace { k_min: 5, k_max: 4, ..Default::default() },
            SearchSpace { k_min: 1, ..Default::default() },
            SearchSpace { alpha: (0.5, 0.5), ..Default::default() },
            SearchSpace { eta: (0.0, 1.0), ..Default::default() },
        ] {
            assert!(matches!(suggest(&[], &bad, &cfg, &mut rng), Err(HpoError::Space(_))));
        }
        let bad_cfg = TpeConfig { gamma: 1.0, ..Default::default() };
        assert!(suggest(&[], &SearchSpace::default(), &bad_cfg, &mut rng).is_err());
    }

    #[test]
    fn selection_maximizes_ratio_over_candidates() {
        let space = SearchSpace::default();
        let cfg = TpeConfig::default();
        let history = history_from(&space, 30, 2, |p| -(p.alpha - 0.15).powi(2) - (p.k as f64 - 7.0).abs());
        let fitted = FittedTpe::fit(&history, &space, &cfg).unwrap();
        assert_eq!(fitted.n_good(), 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let candidates: Vec<Params> = (0..50).map(|_| fitted.sample_good(&mut rng)).collect();
        let chosen = fitted.select(&candidates).unwrap();
        let best_ratio = candidates
            .iter()
            .map(|c| fitted.log_ratio(c))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(fitted.log_ratio(&chosen), best_ratio);
        assert!(candidates.contains(&chosen));
    }

    #[test]
    fn suggestion_concentrates_near_optimum() {
        // objective −(α − 0.15)², with K and η irrelevant
        let space = SearchSpace::default();
        let cfg = TpeConfig::default();
        let mut tpe_dist = Vec::new();
        let mut uniform_dist = Vec::new();
        for seed in 0..20 {
            let history = history_from(&space, 20, 100 + seed, |p| -(p.alpha - 0.15).powi(2));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = suggest(&history, &space, &cfg, &mut rng).unwrap();
            tpe_dist.push((p.alpha - 0.15).abs());
            uniform_dist.push((space.sample_uniform(&mut rng).alpha - 0.15).abs());
        }
        assert!(median(tpe_dist.clone()) < median(uniform_dist.clone()), "{tpe_dist:?} vs {uniform_dist:?}");
    }

    #[test]
    fn optimize_counts_evaluations_and_is_deterministic() {
        let space = SearchSpace::default();
        let cfg = TpeConfig { seed: 4, ..Default::default() };
        let f = |p: &Params, _seed: u64| -> Result<f64, String> { Ok(-(p.alpha - 0.15).powi(2) - (p.eta - 0.5).powi(2)) };
        let a = optimize(f, &space, 12, &cfg).unwrap();
        let b = optimize(f, &space, 12, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 12);
        let best = a.best.unwrap();
        assert!(a.history.iter().all(|t| t.objective <= best.objective));
    }

    #[test]
    fn budget_of_one() {
        let out = optimize(|_: &Params, _| Ok::<_, String>(1.0), &SearchSpace::default(), 1, &TpeConfig::default()).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.best.as_ref(), out.history.first());
    }

    #[test]
    fn failing_objective_marks_trial_failed() {
        let mut calls = 0;
        let out = optimize(
            |p: &Params, _| {
                calls += 1;
                if calls % 2 == 0 {
                    Err("lda diverged")
                } else {
                    Ok(p.alpha)
                }
            },
            &SearchSpace::default(),
            6,
            &TpeConfig::default(),
        )
        .unwrap();
        assert_eq!(out.history.len(), 6);
        let failed = out.history.iter().filter(|t| t.status == TrialStatus::Failed).count();
        assert_eq!(failed, 3);
        assert!(out.history.iter().all(|t| t.objective.is_some() == (t.status == TrialStatus::Ok)));
        assert_eq!(out.best.unwrap().status, TrialStatus::Ok);
    }

    #[test]
    fn history_csv() {
        let t = vec![
            Trial::ok(0, Params { k: 7, alpha: 0.149, eta: 0.501 }, 0.65, 9),
            Trial::failed(1, Params { k: 3, alpha: 1.0, eta: 1.0 }, 10, "x"),
        ];
        let mut buf = Vec::new();
        write_history_csv(&t, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "trial,K,alpha,eta,coherence,status,seed\n0,7,0.149000,0.501000,0.650000,ok,9\n1,3,1.000000,1.000000,,failed,10\n"
        );
    }
}
