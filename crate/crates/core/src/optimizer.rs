//! Ask/tell maximization of the grasp score over the design variables.
//!
//! Suggestions come from a Tree-structured Parzen Estimator after a number
//! of uniform startup trials. Each dimension gets its own truncated
//! Gaussian mixture; candidates drawn from the density of the good trials
//! are ranked by the summed log density ratio. The IP pulley radius is
//! always drawn after the IP moment arm so that its upper bound can follow
//! the arm.

use crate::scenario::{mix_seed, Evaluation};
use crate::transmission::{DesignParams, PARAM_BOUNDS, PARAM_NAMES, TENDON_MARGIN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use std::time::Instant;

pub const DIMS: usize = 8;

/// Point in the search space, in [`DesignParams`] vector order.
pub type Point = [f64; DIMS];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Upper bound of dimension `dim` capped at `x[on] - margin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dependency {
    pub dim: usize,
    pub on: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid search space: {0}")]
pub struct SpaceError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
    pub dependency: Option<Dependency>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self::table()
    }
}

impl SearchSpace {
    /// The admissible design box with the pulley radius tied to the IP
    /// moment arm.
    pub fn table() -> Self {
        Self {
            dims: PARAM_NAMES
                .iter()
                .zip(PARAM_BOUNDS)
                .map(|(name, (lower, upper))| Dimension {
                    name: name.to_string(),
                    lower,
                    upper,
                })
                .collect(),
            dependency: Some(Dependency {
                dim: 3,
                on: 4,
                margin: TENDON_MARGIN,
            }),
        }
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        if self.dims.len() != DIMS {
            return Err(SpaceError(format!("expected {DIMS} dimensions, got {}", self.dims.len())));
        }
        for d in &self.dims {
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(SpaceError(format!(
                    "{}: lower {} must be below upper {}",
                    d.name, d.lower, d.upper
                )));
            }
        }
        if let Some(dep) = self.dependency {
            if dep.dim >= DIMS || dep.on >= DIMS || dep.dim == dep.on {
                return Err(SpaceError("dependency refers to an invalid dimension".into()));
            }
            let d = &self.dims[dep.dim];
            let cap = self.dims[dep.on].lower - dep.margin;
            if !(d.lower < cap) {
                return Err(SpaceError(format!(
                    "{}: lower {} leaves no room below {} - {}",
                    d.name, d.lower, self.dims[dep.on].name, dep.margin
                )));
            }
        }
        Ok(())
    }

    /// Upper bound of dimension `i` given the already fixed coordinates.
    pub fn upper_at(&self, i: usize, x: &Point) -> f64 {
        match self.dependency {
            Some(dep) if dep.dim == i => self.dims[i].upper.min(x[dep.on] - dep.margin),
            _ => self.dims[i].upper,
        }
    }

    /// Dimension order in which a point has to be drawn.
    fn order(&self) -> [usize; DIMS] {
        let mut order: [usize; DIMS] = std::array::from_fn(|i| i);
        if let Some(dep) = self.dependency {
            let (a, b) = (
                order.iter().position(|&i| i == dep.dim).unwrap(),
                order.iter().position(|&i| i == dep.on).unwrap(),
            );
            if a < b {
                order[a..=b].rotate_left(b - a);
            }
        }
        order
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..DIMS).all(|i| x[i] >= self.dims[i].lower && x[i] <= self.upper_at(i, x))
    }

    pub fn clamp(&self, x: &mut Point) {
        for i in self.order() {
            x[i] = x[i].clamp(self.dims[i].lower, self.upper_at(i, x));
        }
    }

    /// Uniform sample of the feasible region, dependent dimension last.
    pub fn sample_uniform(&self, rng: &mut impl Rng) -> Point {
        let mut x = [0.0; DIMS];
        for i in self.order() {
            x[i] = rng.gen_range(self.dims[i].lower..=self.upper_at(i, &x));
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TpeConfig {
    /// Number of uniform trials before the estimator takes over.
    pub startup: usize,
    /// Candidates drawn per suggestion.
    pub candidates: usize,
    /// Good set size is `min(ceil(gamma_fraction * n), gamma_cap)`.
    pub gamma_fraction: f64,
    pub gamma_cap: usize,
    /// Weight of the uniform-ish prior component in every mixture.
    pub prior_weight: f64,
    /// Floor the kernel widths at `range / min(100, 1 + components)`.
    pub magic_clip: bool,
    /// The most recent trials that keep full weight; older ones fade out.
    pub full_weight_window: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            startup: 10,
            candidates: 24,
            gamma_fraction: 0.1,
            gamma_cap: 25,
            prior_weight: 1.0,
            magic_clip: true,
            full_weight_window: 25,
        }
    }
}

impl TpeConfig {
    /// Never leaves the startup phase.
    pub fn random_search() -> Self {
        Self {
            startup: usize::MAX,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        if self.startup < 2 {
            return Err(SpaceError("tpe.startup must be at least 2".into()));
        }
        if self.candidates < 1 {
            return Err(SpaceError("tpe.candidates must be at least 1".into()));
        }
        if !(self.gamma_fraction > 0.0 && self.gamma_fraction <= 1.0) || self.gamma_cap < 1 {
            return Err(SpaceError("tpe gamma must select at least one trial".into()));
        }
        if !(self.prior_weight > 0.0 && self.prior_weight.is_finite()) {
            return Err(SpaceError("tpe.prior_weight must be positive".into()));
        }
        Ok(())
    }

    fn n_good(&self, n: usize) -> usize {
        ((self.gamma_fraction * n as f64).ceil() as usize).min(self.gamma_cap).max(1)
    }

    /// Weights of `n` observations ordered oldest first.
    fn weights(&self, n: usize) -> Vec<f64> {
        let w = self.full_weight_window;
        if n <= w {
            return vec![1.0; n];
        }
        let ramp = n - w;
        (0..ramp)
            .map(|k| {
                let lo = 1.0 / n as f64;
                if ramp == 1 {
                    lo
                } else {
                    lo + (1.0 - lo) * k as f64 / (ramp - 1) as f64
                }
            })
            .chain(std::iter::repeat(1.0).take(w))
            .collect()
    }
}

/// Truncated Gaussian mixture over one dimension.
#[derive(Debug, Clone)]
struct Parzen {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    weights: Vec<f64>,
    /// Log of the mass of each component inside the bounds.
    log_mass: Vec<f64>,
    low: f64,
    high: f64,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

impl Parzen {
    fn fit(obs: &[f64], obs_weights: &[f64], low: f64, high: f64, cfg: &TpeConfig) -> Self {
        let range = high - low;
        let mut mus = obs.to_vec();
        mus.push(0.5 * (low + high));
        let n = mus.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| mus[a].total_cmp(&mus[b]));
        let mut edges = Vec::with_capacity(n + 2);
        edges.push(low);
        edges.extend(order.iter().map(|&i| mus[i]));
        edges.push(high);
        let gaps: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
        let mut sorted_sigmas: Vec<f64> = (0..n).map(|k| gaps[k].max(gaps[k + 1])).collect();
        if n >= 2 {
            sorted_sigmas[0] = gaps[1];
            sorted_sigmas[n - 1] = gaps[n - 1];
        }
        let min_sigma = if cfg.magic_clip {
            range / (100.0f64).min(1.0 + n as f64)
        } else {
            f64::EPSILON
        };
        let mut sigmas = vec![0.0; n];
        for (k, &i) in order.iter().enumerate() {
            sigmas[i] = sorted_sigmas[k].clamp(min_sigma, range);
        }
        sigmas[n - 1] = range;
        let mut weights = obs_weights.to_vec();
        weights.push(cfg.prior_weight);
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let log_mass = mus
            .iter()
            .zip(&sigmas)
            .map(|(m, s)| {
                let mass = normal_cdf((high - m) / s) - normal_cdf((low - m) / s);
                mass.max(1e-300).ln()
            })
            .collect();
        Self {
            mus,
            sigmas,
            weights,
            log_mass,
            low,
            high,
        }
    }

    /// Draws from the mixture restricted to `[low, upper]`.
    fn sample(&self, upper: f64, rng: &mut impl Rng) -> f64 {
        let upper = upper.min(self.high);
        for _ in 0..1000 {
            let mut pick: f64 = rng.gen();
            let mut k = self.weights.len() - 1;
            for (i, w) in self.weights.iter().enumerate() {
                if pick < *w {
                    k = i;
                    break;
                }
                pick -= w;
            }
            let z: f64 = rng.sample(StandardNormal);
            let x = self.mus[k] + self.sigmas[k] * z;
            if x >= self.low && x <= upper {
                return x;
            }
        }
        rng.gen_range(self.low..=upper)
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = (0..self.mus.len())
            .map(|k| {
                let z = (x - self.mus[k]) / self.sigmas[k];
                self.weights[k].ln() - 0.5 * z * z - LOG_SQRT_2PI - self.sigmas[k].ln() - self.log_mass[k]
            })
            .collect();
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }
}

/// Suggests the next point from scored observations (higher is better).
pub fn suggest(
    points: &[Point],
    scores: &[f64],
    space: &SearchSpace,
    cfg: &TpeConfig,
    rng: &mut impl Rng,
) -> Point {
    let n = points.len();
    if n < cfg.startup {
        return space.sample_uniform(rng);
    }
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let n_good = cfg.n_good(n);
    let mut good = ranked[..n_good].to_vec();
    let mut bad = ranked[n_good..].to_vec();
    good.sort_unstable();
    bad.sort_unstable();
    let (wg, wb) = (cfg.weights(good.len()), cfg.weights(bad.len()));
    let fit = |set: &[usize], w: &[f64], d: usize| {
        let obs: Vec<f64> = set.iter().map(|&i| points[i][d]).collect();
        let dim = &space.dims[d];
        Parzen::fit(&obs, w, dim.lower, dim.upper, cfg)
    };
    let l: Vec<Parzen> = (0..DIMS).map(|d| fit(&good, &wg, d)).collect();
    let g: Vec<Parzen> = (0..DIMS).map(|d| fit(&bad, &wb, d)).collect();
    let order = space.order();
    let mut best = space.sample_uniform(rng);
    let mut best_ratio = f64::NEG_INFINITY;
    for _ in 0..cfg.candidates {
        let mut x = [0.0; DIMS];
        for &d in &order {
            x[d] = l[d].sample(space.upper_at(d, &x), rng);
        }
        let ratio: f64 = (0..DIMS).map(|d| l[d].log_pdf(x[d]) - g[d].log_pdf(x[d])).sum();
        if ratio > best_ratio {
            best_ratio = ratio;
            best = x;
        }
    }
    space.clamp(&mut best);
    best
}

/// Suggests the next design from a study history.
pub fn ask(history: &[Trial], space: &SearchSpace, cfg: &TpeConfig, rng: &mut impl Rng) -> DesignParams {
    let points: Vec<Point> = history.iter().map(|t| t.params.to_array()).collect();
    let scores: Vec<f64> = history.iter().map(|t| t.score).collect();
    DesignParams::from_array(suggest(&points, &scores, space, cfg, rng))
}

/// One evaluated design. Field order is the study log line layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trial {
    pub index: usize,
    pub params: DesignParams,
    pub per_object_h: Vec<f64>,
    pub score: f64,
    pub seed: u64,
    pub wall_ms: u64,
}

impl Trial {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trial serializes")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StudyError {
    #[error("trial index {got} told out of order, expected {expected}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("study log is empty")]
    Empty,
}

/// Append-only history of evaluated designs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyRecord {
    trials: Vec<Trial>,
    best: Option<usize>,
}

impl StudyRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn best(&self) -> Option<&Trial> {
        self.best.map(|i| &self.trials[i])
    }

    /// Appends the next trial. Ties keep the earlier best.
    pub fn tell(&mut self, trial: Trial) -> Result<(), StudyError> {
        if trial.index != self.trials.len() {
            return Err(StudyError::OutOfOrder {
                expected: self.trials.len(),
                got: trial.index,
            });
        }
        if self.best().map_or(true, |b| trial.score > b.score) {
            self.best = Some(trial.index);
        }
        self.trials.push(trial);
        Ok(())
    }

    /// Best score after each trial.
    pub fn best_curve(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.trials
            .iter()
            .map(|t| {
                best = best.max(t.score);
                best
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        self.trials.iter().map(|t| t.to_json_line() + "\n").collect()
    }

    /// Parses a study log. Blank lines are skipped; line numbers in errors
    /// start at 1.
    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, StudyError> {
        let mut study = Self::new();
        for (k, line) in reader.lines().enumerate() {
            let corrupt = |message: String| StudyError::Corrupt { line: k + 1, message };
            let line = line.map_err(|e| corrupt(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let trial: Trial = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            study.tell(trial).map_err(|e| corrupt(e.to_string()))?;
        }
        Ok(study)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeConfig {
    /// Total number of trials the study should hold when done.
    pub n_iter: usize,
    pub seed: u64,
    /// Designs evaluated concurrently.
    pub parallelism: usize,
    pub tpe: TpeConfig,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            n_iter: 2000,
            seed: 0,
            parallelism: 1,
            tpe: TpeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completion {
    Finished,
    Interrupted,
}

/// Seed of the suggestion for trial `index`.
pub fn ask_seed(seed: u64, index: usize) -> u64 {
    mix_seed(&[seed, index as u64, 0])
}

/// Seed handed to the objective for trial `index`.
pub fn evaluation_seed(seed: u64, index: usize) -> u64 {
    mix_seed(&[seed, index as u64, 1])
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => 1.0,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Extends `study` to `cfg.n_iter` trials.
///
/// Trials are suggested and evaluated in batches of `parallelism` aligned
/// to multiples of it, so the outcome does not depend on thread timing.
/// Within a batch, pending suggestions count as observations scored at the
/// median so far. A failing objective scores 1. `on_trial` sees every
/// trial in index order right after it is told; `stop` is polled between
/// batches.
pub fn optimize<O, E>(
    objective: &O,
    space: &SearchSpace,
    cfg: &OptimizeConfig,
    study: &mut StudyRecord,
    mut on_trial: impl FnMut(&Trial) -> Result<(), E>,
    stop: impl Fn() -> bool,
) -> Result<Completion, E>
where
    O: Fn(&DesignParams, u64) -> Result<Evaluation, String> + Sync,
{
    let k = cfg.parallelism.max(1);
    while study.len() < cfg.n_iter {
        if stop() {
            return Ok(Completion::Interrupted);
        }
        let start = study.len();
        let end = ((start / k + 1) * k).min(cfg.n_iter);
        let mut points: Vec<Point> = study.trials.iter().map(|t| t.params.to_array()).collect();
        let mut scores: Vec<f64> = study.trials.iter().map(|t| t.score).collect();
        let liar = median(&scores);
        let mut batch = Vec::with_capacity(end - start);
        for index in start..end {
            let mut rng = ChaCha8Rng::seed_from_u64(ask_seed(cfg.seed, index));
            let x = suggest(&points, &scores, space, &cfg.tpe, &mut rng);
            points.push(x);
            scores.push(liar);
            batch.push((index, DesignParams::from_array(x)));
        }
        let run = |&(index, params): &(usize, DesignParams)| {
            let seed = evaluation_seed(cfg.seed, index);
            let t0 = Instant::now();
            let eval = match objective(&params, seed) {
                Ok(e) if e.score.is_finite() => e,
                _ => Evaluation {
                    per_object_h: Vec::new(),
                    score: 1.0,
                },
            };
            Trial {
                index,
                params,
                per_object_h: eval.per_object_h,
                score: eval.score,
                seed,
                wall_ms: t0.elapsed().as_millis() as u64,
            }
        };
        let trials: Vec<Trial> = if batch.len() == 1 {
            vec![run(&batch[0])]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = batch.iter().map(|b| s.spawn(|| run(b))).collect();
                handles.into_iter().map(|h| h.join().expect("objective panicked")).collect()
            })
        };
        for trial in trials {
            on_trial(&trial)?;
            study.tell(trial).expect("batch trials arrive in order");
        }
    }
    Ok(Completion::Finished)
}

/// Runs a fresh study to completion without persistence.
pub fn run_study<O>(objective: &O, space: &SearchSpace, cfg: &OptimizeConfig) -> StudyRecord
where
    O: Fn(&DesignParams, u64) -> Result<Evaluation, String> + Sync,
{
    let mut study = StudyRecord::new();
    let _ = optimize::<O, std::convert::Infallible>(objective, space, cfg, &mut study, |_| Ok(()), || false);
    study
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_space_is_valid_and_orders_arm_before_pulley() {
        let s = SearchSpace::table();
        s.validate().unwrap();
        let order = s.order();
        let pos = |i| order.iter().position(|&d| d == i).unwrap();
        assert!(pos(4) < pos(3));
    }

    #[test]
    fn space_rejects_empty_dependent_range() {
        let mut s = SearchSpace::table();
        s.dims[3].lower = 0.0075;
        assert!(s.validate().is_err());
        let mut s = SearchSpace::table();
        s.dims[0].upper = s.dims[0].lower;
        assert!(s.validate().is_err());
    }

    #[test]
    fn clamp_respects_dependency() {
        let s = SearchSpace::table();
        let mut x = DesignParams::table_optimum().to_array();
        x[3] = 0.011;
        x[4] = 0.009;
        s.clamp(&mut x);
        assert!((x[3] - 0.008).abs() < 1e-15);
        assert!(s.contains(&x));
    }

    #[test]
    fn weights_fade_old_observations() {
        let cfg = TpeConfig::default();
        assert_eq!(cfg.weights(3), vec![1.0; 3]);
        let w = cfg.weights(30);
        assert_eq!(w.len(), 30);
        assert!((w[0] - 1.0 / 30.0).abs() < 1e-15);
        assert_eq!(w[4], 1.0);
        assert!(w.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn good_set_size_follows_gamma() {
        let cfg = TpeConfig::default();
        assert_eq!(cfg.n_good(10), 1);
        assert_eq!(cfg.n_good(11), 2);
        assert_eq!(cfg.n_good(1000), 25);
    }

    #[test]
    fn parzen_density_integrates_to_one() {
        let cfg = TpeConfig::default();
        let p = Parzen::fit(&[0.2, 0.25, 0.9], &[1.0; 3], 0.0, 1.0, &cfg);
        let n = 20_000;
        let integral: f64 = (0..n)
            .map(|i| p.log_pdf((i as f64 + 0.5) / n as f64).exp() / n as f64)
            .sum();
        assert!((integral - 1.0).abs() < 1e-6, "{integral}");
    }

    #[test]
    fn parzen_bandwidths_use_neighbour_gaps() {
        let cfg = TpeConfig {
            magic_clip: false,
            ..TpeConfig::default()
        };
        // Sorted centres 0.2, 0.5 (prior), 0.6 with edges 0 and 1.
        let p = Parzen::fit(&[0.6, 0.2], &[1.0, 1.0], 0.0, 1.0, &cfg);
        assert!((p.sigmas[0] - 0.1).abs() < 1e-12);
        assert!((p.sigmas[1] - 0.3).abs() < 1e-12);
        assert_eq!(p.sigmas[2], 1.0);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn median_of_even_and_empty() {
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
        assert_eq!(median(&[]), 1.0);
    }
}
