//! Multi-restart sampling and prediction.
//!
//! Independent EM runs from different random starts land on different local
//! optima whose group labels are not aligned. Predictions are therefore
//! combined at the level of rating distributions, and cold-start membership
//! vectors are computed inside each run before averaging.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::em::{fit, FitConfig, FitResult};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::scale::RatingScale;

/// Probability of each rating label for one (user, item) query.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingDistribution {
    probs: Vec<f64>,
}

impl RatingDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("rating distribution"));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "not a probability vector (sum {sum})"
            )));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (idx, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = idx;
            }
        }
        best
    }

    pub fn median(&self) -> usize {
        let mut cumulative = 0.0;
        for (idx, &p) in self.probs.iter().enumerate() {
            cumulative += p;
            if cumulative >= 0.5 {
                return idx;
            }
        }
        self.probs.len() - 1
    }

    pub fn mean(&self, scale: &RatingScale) -> f64 {
        self.probs
            .iter()
            .zip(scale.values())
            .map(|(p, v)| p * v)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Mode,
    Median,
    Mean,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Mode, Estimator::Median, Estimator::Mean];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mode => "mode",
            Estimator::Median => "median",
            Estimator::Mean => "mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate {
    /// Index into the rating scale.
    Label(usize),
    Value(f64),
}

impl Estimate {
    pub fn value(self, scale: &RatingScale) -> f64 {
        match self {
            Estimate::Label(idx) => scale.value(idx),
            Estimate::Value(v) => v,
        }
    }

    /// Label used for exact-match accuracy; real values round to the nearest
    /// label, ties down.
    pub fn label(self, scale: &RatingScale) -> usize {
        match self {
            Estimate::Label(idx) => idx,
            Estimate::Value(v) => scale.nearest_index(v),
        }
    }
}

/// Point estimate from a distribution. Ties in the mode go to the lowest label;
/// the median is the smallest label with cumulative probability ≥ 1/2.
pub fn estimate(dist: &RatingDistribution, estimator: Estimator, scale: &RatingScale) -> Estimate {
    match estimator {
        Estimator::Mode => Estimate::Label(dist.mode()),
        Estimator::Median => Estimate::Label(dist.median()),
        Estimator::Mean => Estimate::Value(dist.mean(scale)),
    }
}

/// Pr[r] = Σ_kl θ_uk η_il p_kl(r).
pub fn predict_distribution(params: &ModelParams, theta_u: &[f64], eta_i: &[f64]) -> Result<RatingDistribution> {
    if theta_u.len() != params.user_groups() {
        return Err(Error::DimensionMismatch {
            expected: params.user_groups(),
            found: theta_u.len(),
        });
    }
    if eta_i.len() != params.item_groups() {
        return Err(Error::DimensionMismatch {
            expected: params.item_groups(),
            found: eta_i.len(),
        });
    }
    Ok(RatingDistribution {
        probs: mix(params, theta_u, eta_i),
    })
}

fn mix(params: &ModelParams, theta_u: &[f64], eta_i: &[f64]) -> Vec<f64> {
    let l = params.item_groups();
    (0..params.n_labels())
        .map(|r| {
            let p = params.p_slice(r);
            theta_u
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    t * p[k * l..(k + 1) * l]
                        .iter()
                        .zip(eta_i)
                        .map(|(pr, e)| pr * e)
                        .sum::<f64>()
                })
                .sum()
        })
        .collect()
}

/// Component-wise mean of membership rows, used as the membership vector of
/// a user (or item) with no training data.
pub fn cold_start_vector<'a, I>(rows: I) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut rows = rows.into_iter();
    let first = rows.next().ok_or(Error::EmptyInput("membership rows"))?;
    // running mean: identical rows reproduce the row exactly
    let mut mean = first.to_vec();
    let mut count = 1usize;
    for row in rows {
        if row.len() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: row.len(),
            });
        }
        count += 1;
        let n = count as f64;
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += (x - *m) / n);
    }
    Ok(mean)
}

/// How per-run predictions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combination {
    /// Arithmetic mean of the runs' rating distributions.
    #[default]
    Average,
    /// Only the run with the highest final log-likelihood (earliest on ties).
    MaxLikelihood,
}

#[derive(Debug, Clone)]
struct Run {
    result: FitResult,
    seed: u64,
    cold_user: Vec<f64>,
    cold_item: Vec<f64>,
}

impl Run {
    fn new(result: FitResult, seed: u64) -> Result<Self> {
        let cold_user = cold_start_vector(result.params.theta_rows())?;
        let cold_item = cold_start_vector(result.params.eta_rows())?;
        Ok(Self {
            result,
            seed,
            cold_user,
            cold_item,
        })
    }

    fn predict(&self, user: Option<usize>, item: Option<usize>) -> Vec<f64> {
        let params = &self.result.params;
        let theta = user.map_or(self.cold_user.as_slice(), |u| params.theta_row(u));
        let eta = item.map_or(self.cold_item.as_slice(), |i| params.eta_row(i));
        mix(params, theta, eta)
    }
}

/// A set of independently seeded fits on the same data.
#[derive(Debug, Clone)]
pub struct Ensemble {
    scale: RatingScale,
    config: FitConfig,
    runs: Vec<Run>,
    combination: Combination,
}

impl Ensemble {
    /// Wraps already fitted runs, e.g. loaded from a snapshot.
    pub fn from_runs(scale: RatingScale, config: FitConfig, runs: Vec<(FitResult, u64)>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::EmptyInput("ensemble runs"));
        }
        let first = &runs[0].0.params;
        let shape = (first.user_groups(), first.item_groups(), first.n_users(), first.n_items());
        for (result, _) in &runs {
            let p = &result.params;
            if (p.user_groups(), p.item_groups(), p.n_users(), p.n_items()) != shape
                || p.n_labels() != scale.len()
            {
                return Err(Error::InvalidConfig("ensemble runs disagree in shape".into()));
            }
        }
        let runs = runs
            .into_iter()
            .map(|(result, seed)| Run::new(result, seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scale,
            config,
            runs,
            combination: Combination::Average,
        })
    }

    pub fn with_combination(mut self, combination: Combination) -> Self {
        self.combination = combination;
        self
    }

    pub fn combination(&self) -> Combination {
        self.combination
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn n_runs(&self) -> usize {
        self.runs.len()
    }

    pub fn run(&self, idx: usize) -> &FitResult {
        &self.runs[idx].result
    }

    pub fn seed(&self, idx: usize) -> u64 {
        self.runs[idx].seed
    }

    pub fn runs(&self) -> impl Iterator<Item = &FitResult> {
        self.runs.iter().map(|r| &r.result)
    }

    pub fn cold_user_vector(&self, run: usize) -> &[f64] {
        &self.runs[run].cold_user
    }

    pub fn cold_item_vector(&self, run: usize) -> &[f64] {
        &self.runs[run].cold_item
    }

    fn best_run(&self) -> usize {
        let mut best = 0;
        for (idx, run) in self.runs.iter().enumerate() {
            if run.result.log_likelihood() > self.runs[best].result.log_likelihood() {
                best = idx;
            }
        }
        best
    }

    /// Predicted rating distribution for a trained user/item index, or `None`
    /// for a user/item without training data.
    pub fn predict(&self, user: Option<usize>, item: Option<usize>) -> RatingDistribution {
        let probs = match self.combination {
            Combination::MaxLikelihood => self.runs[self.best_run()].predict(user, item),
            Combination::Average => {
                let mut acc = vec![0.0; self.scale.len()];
                for run in &self.runs {
                    acc.iter_mut()
                        .zip(run.predict(user, item))
                        .for_each(|(a, p)| *a += p);
                }
                let n = self.runs.len() as f64;
                acc.iter_mut().for_each(|a| *a /= n);
                acc
            }
        };
        RatingDistribution { probs }
    }

    /// Distribution predicted by a single run.
    pub fn predict_run(&self, run: usize, user: Option<usize>, item: Option<usize>) -> RatingDistribution {
        RatingDistribution {
            probs: self.runs[run].predict(user, item),
        }
    }
}

/// Fits `n_runs` models with seeds `base_seed, base_seed + 1, ...`. Runs are
/// executed on the current rayon pool; the result does not depend on the
/// number of workers.
pub fn ensemble_fit(dataset: &Dataset, config: &FitConfig, n_runs: usize, base_seed: u64) -> Result<Ensemble> {
    if n_runs == 0 {
        return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
    }
    config.validate(dataset.scale().len())?;
    let runs = (0..n_runs as u64)
        .into_par_iter()
        .map(|offset| {
            let seed = base_seed.wrapping_add(offset);
            let run_config = FitConfig {
                seed,
                ..config.clone()
            };
            fit(dataset, &run_config).map(|res| (res, seed))
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::from_runs(dataset.scale().clone(), config.clone(), runs)
}
