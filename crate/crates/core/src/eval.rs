//! Cross-validation, accuracy/MAE metrics and the EM scaling benchmark.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{item_item_fit, mf_fit, ItemItemModel, MfConfig, MfModel, NaiveModel, DEFAULT_NEIGHBORS};
use crate::dataset::Dataset;
use crate::em::{em_step_with_likelihood, init_params, FitConfig};
use crate::ensemble::{ensemble_fit, estimate, Ensemble, Estimate, Estimator, RatingDistribution};
use crate::error::{Error, Result};
use crate::scale::RatingScale;

/// Link indices of each fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldSplit {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Every link index not in fold `fold`, in increasing order.
    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(idx, _)| *idx != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        train.sort_unstable();
        train
    }
}

/// Seeded random partition of the ratings into `k` parts whose sizes differ
/// by at most one; the first `n mod k` folds get the extra element.
pub fn kfold_split(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldSplit> {
    let n = dataset.n_ratings();
    if k < 2 || k > n {
        return Err(Error::InvalidSplit { n_ratings: n, folds: k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(FoldSplit { folds, seed })
}

pub fn accuracy(predicted: &[usize], actual: &[usize]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput("accuracy"));
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / actual.len() as f64)
}

pub fn mae(predicted: &[f64], actual: &[usize], scale: &RatingScale) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput("mae"));
    }
    let total: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, &a)| (p - scale.value(a)).abs())
        .sum();
    Ok(total / actual.len() as f64)
}

/// A test-set query: external ids plus the training-set indices, where `None`
/// marks a user or item without training data.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub user_id: &'a str,
    pub item_id: &'a str,
    pub user: Option<usize>,
    pub item: Option<usize>,
}

impl Query<'_> {
    pub fn is_cold(&self) -> bool {
        self.user.is_none() || self.item.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Distribution(RatingDistribution),
    Value(f64),
}

/// A trained model able to answer queries.
pub trait Predictor: Sync {
    fn predict(&self, query: &Query<'_>) -> Prediction;
}

/// A recommendation method that can be trained on a fold.
pub trait Method: Sync {
    fn name(&self) -> String;
    fn train(&self, train: &Dataset) -> Result<Box<dyn Predictor + '_>>;
}

/// Built-in methods.
#[derive(Debug, Clone)]
pub enum MethodSpec {
    Mmsbm { config: FitConfig, n_runs: usize, base_seed: u64 },
    Naive,
    ItemItem { k_neighbors: usize },
    MatrixFactorization(MfConfig),
}

impl MethodSpec {
    pub fn mmsbm(config: FitConfig, n_runs: usize, base_seed: u64) -> Self {
        MethodSpec::Mmsbm { config, n_runs, base_seed }
    }

    pub fn item_item() -> Self {
        MethodSpec::ItemItem {
            k_neighbors: DEFAULT_NEIGHBORS,
        }
    }
}

struct EnsemblePredictor(Ensemble);
struct NaivePredictor(NaiveModel);
struct ItemItemPredictor {
    model: ItemItemModel,
    train: Dataset,
}
struct MfPredictor(MfModel);

impl Predictor for EnsemblePredictor {
    fn predict(&self, q: &Query<'_>) -> Prediction {
        Prediction::Distribution(self.0.predict(q.user, q.item))
    }
}

impl Predictor for NaivePredictor {
    fn predict(&self, q: &Query<'_>) -> Prediction {
        Prediction::Value(self.0.predict(q.item))
    }
}

impl Predictor for ItemItemPredictor {
    fn predict(&self, q: &Query<'_>) -> Prediction {
        Prediction::Value(self.model.predict(&self.train, q.user, q.item))
    }
}

impl Predictor for MfPredictor {
    fn predict(&self, q: &Query<'_>) -> Prediction {
        Prediction::Value(self.0.predict(q.user, q.item))
    }
}

impl Method for MethodSpec {
    fn name(&self) -> String {
        match self {
            MethodSpec::Mmsbm { .. } => "mmsbm".into(),
            MethodSpec::Naive => "naive".into(),
            MethodSpec::ItemItem { .. } => "item-item".into(),
            MethodSpec::MatrixFactorization(_) => "mf".into(),
        }
    }

    fn train(&self, train: &Dataset) -> Result<Box<dyn Predictor + '_>> {
        Ok(match self {
            MethodSpec::Mmsbm { config, n_runs, base_seed } => {
                Box::new(EnsemblePredictor(ensemble_fit(train, config, *n_runs, *base_seed)?))
            }
            MethodSpec::Naive => Box::new(NaivePredictor(NaiveModel::fit(train))),
            MethodSpec::ItemItem { k_neighbors } => Box::new(ItemItemPredictor {
                model: item_item_fit(train, *k_neighbors),
                train: train.clone(),
            }),
            MethodSpec::MatrixFactorization(config) => Box::new(MfPredictor(mf_fit(train, config)?)),
        })
    }
}

/// Accuracy and MAE of one point estimator on one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorMetrics {
    pub estimator: Estimator,
    pub accuracy: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    /// Exact-match accuracy (mode estimator for distributions, rounded value
    /// otherwise).
    pub accuracy: f64,
    /// MAE (median estimator for distributions, raw value otherwise).
    pub mae: f64,
    pub cold_count: usize,
    pub cold_accuracy: Option<f64>,
    pub cold_mae: Option<f64>,
    /// Per-estimator metrics; only filled for distribution-valued methods.
    pub estimators: Vec<EstimatorMetrics>,
    /// Largest |Σ p − 1| over the emitted distributions (0 for value methods).
    pub max_normalization_error: f64,
}

impl FoldMetrics {
    pub fn estimator(&self, estimator: Estimator) -> Option<&EstimatorMetrics> {
        self.estimators.iter().find(|m| m.estimator == estimator)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub method: String,
    pub folds: Vec<FoldMetrics>,
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sem: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len() as f64;
    if values.is_empty() {
        return Summary { mean: f64::NAN, sem: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Summary { mean, sem: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Summary { mean, sem: (var / n).sqrt() }
}

impl MethodReport {
    pub fn accuracy(&self) -> Summary {
        summarize(&self.folds.iter().map(|f| f.accuracy).collect::<Vec<_>>())
    }

    pub fn mae(&self) -> Summary {
        summarize(&self.folds.iter().map(|f| f.mae).collect::<Vec<_>>())
    }

    pub fn estimator_accuracy(&self, estimator: Estimator) -> Option<Summary> {
        self.estimator_values(estimator, |m| m.accuracy)
    }

    pub fn estimator_mae(&self, estimator: Estimator) -> Option<Summary> {
        self.estimator_values(estimator, |m| m.mae)
    }

    fn estimator_values(&self, estimator: Estimator, get: impl Fn(&EstimatorMetrics) -> f64) -> Option<Summary> {
        let values = self
            .folds
            .iter()
            .map(|f| f.estimator(estimator).map(&get))
            .collect::<Option<Vec<_>>>()?;
        Some(summarize(&values))
    }

    pub fn cold_fraction(&self) -> f64 {
        let cold: usize = self.folds.iter().map(|f| f.cold_count).sum();
        let total: usize = self.folds.iter().map(|f| f.n_test).sum();
        cold as f64 / total as f64
    }

    pub fn n_test(&self) -> usize {
        self.folds.iter().map(|f| f.n_test).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub methods: Vec<MethodReport>,
}

impl EvalReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }
}

struct Scored {
    label: usize,
    value: f64,
    per_estimator: Vec<(usize, f64)>,
    norm_error: f64,
}

fn score(prediction: Prediction, scale: &RatingScale) -> Scored {
    match prediction {
        Prediction::Value(v) => Scored {
            label: scale.nearest_index(v),
            value: v,
            per_estimator: Vec::new(),
            norm_error: 0.0,
        },
        Prediction::Distribution(dist) => {
            let per_estimator = Estimator::ALL
                .iter()
                .map(|&e| {
                    let est = estimate(&dist, e, scale);
                    (est.label(scale), est.value(scale))
                })
                .collect::<Vec<_>>();
            let mode = estimate(&dist, Estimator::Mode, scale);
            let median = estimate(&dist, Estimator::Median, scale);
            let norm_error = (dist.probs().iter().sum::<f64>() - 1.0).abs();
            Scored {
                label: mode.label(scale),
                value: match median {
                    Estimate::Label(idx) => scale.value(idx),
                    Estimate::Value(v) => v,
                },
                per_estimator,
                norm_error,
            }
        }
    }
}

/// Trains on the complement of fold `fold` and scores the held-out links.
pub fn evaluate_fold(method: &dyn Method, dataset: &Dataset, split: &FoldSplit, fold: usize) -> Result<FoldMetrics> {
    let train = dataset.subset(&split.training_indices(fold))?;
    let predictor = method.train(&train)?;
    let scale = dataset.scale();
    let test = &split.folds[fold];

    let mut actual = Vec::with_capacity(test.len());
    let mut labels = Vec::with_capacity(test.len());
    let mut values = Vec::with_capacity(test.len());
    let mut cold = Vec::with_capacity(test.len());
    let mut per_estimator: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    let mut max_norm_error: f64 = 0.0;
    for &idx in test {
        let link = dataset.links()[idx];
        let user_id = dataset.user_id(link.user as usize);
        let item_id = dataset.item_id(link.item as usize);
        let query = Query {
            user_id,
            item_id,
            user: train.user_index(user_id),
            item: train.item_index(item_id),
        };
        let scored = score(predictor.predict(&query), scale);
        if per_estimator.is_empty() && !scored.per_estimator.is_empty() {
            per_estimator = vec![(Vec::new(), Vec::new()); scored.per_estimator.len()];
        }
        for ((ls, vs), (l, v)) in per_estimator.iter_mut().zip(&scored.per_estimator) {
            ls.push(*l);
            vs.push(*v);
        }
        max_norm_error = max_norm_error.max(scored.norm_error);
        actual.push(link.rating as usize);
        labels.push(scored.label);
        values.push(scored.value);
        cold.push(query.is_cold());
    }

    let cold_idx: Vec<usize> = (0..test.len()).filter(|&n| cold[n]).collect();
    let pick = |v: &[usize]| cold_idx.iter().map(|&n| v[n]).collect::<Vec<_>>();
    let cold_actual = pick(&actual);
    let cold_labels = pick(&labels);
    let cold_values: Vec<f64> = cold_idx.iter().map(|&n| values[n]).collect();
    let (cold_accuracy, cold_mae) = if cold_idx.is_empty() {
        (None, None)
    } else {
        (
            Some(accuracy(&cold_labels, &cold_actual)?),
            Some(mae(&cold_values, &cold_actual, scale)?),
        )
    };
    let estimators = per_estimator
        .iter()
        .zip(Estimator::ALL)
        .map(|((ls, vs), estimator)| {
            Ok(EstimatorMetrics {
                estimator,
                accuracy: accuracy(ls, &actual)?,
                mae: mae(vs, &actual, scale)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FoldMetrics {
        fold,
        n_test: test.len(),
        accuracy: accuracy(&labels, &actual)?,
        mae: mae(&values, &actual, scale)?,
        cold_count: cold_idx.len(),
        cold_accuracy,
        cold_mae,
        estimators,
        max_normalization_error: max_norm_error,
    })
}

/// k-fold cross-validation of one method. Folds are evaluated on the current
/// rayon pool and merged in fold order.
pub fn cross_validate(method: &dyn Method, dataset: &Dataset, k: usize, seed: u64) -> Result<MethodReport> {
    let split = kfold_split(dataset, k, seed)?;
    cross_validate_split(method, dataset, &split)
}

pub fn cross_validate_split(method: &dyn Method, dataset: &Dataset, split: &FoldSplit) -> Result<MethodReport> {
    let folds = (0..split.len())
        .into_par_iter()
        .map(|fold| evaluate_fold(method, dataset, split, fold))
        .collect::<Result<Vec<_>>>()?;
    Ok(MethodReport {
        method: method.name(),
        folds,
    })
}

/// Cross-validates several methods on the same split.
pub fn compare(methods: &[&dyn Method], dataset: &Dataset, k: usize, seed: u64) -> Result<EvalReport> {
    let split = kfold_split(dataset, k, seed)?;
    let methods = methods
        .iter()
        .map(|m| cross_validate_split(*m, dataset, &split))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport { methods })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub fraction: f64,
    pub n_ratings: usize,
    pub seconds_per_iteration: f64,
}

/// Median wall time of one EM iteration on nested random subsets of the
/// ratings. Subsets are prefixes of one seeded permutation, so each contains
/// the previous one. After one warm-up step each, the subsets take turns for
/// `iterations` timed rounds.
pub fn scaling_benchmark(
    dataset: &Dataset,
    fractions: &[f64],
    config: &FitConfig,
    iterations: usize,
) -> Result<Vec<ScalingRow>> {
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidConfig(format!("subset fraction {f} outside (0, 1]")));
    }
    if iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be at least 1".into()));
    }
    config.validate(dataset.scale().len())?;
    let mut order: Vec<usize> = (0..dataset.n_ratings()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let mut sorted = fractions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cases = Vec::with_capacity(sorted.len());
    for fraction in sorted {
        let n = ((dataset.n_ratings() as f64 * fraction).round() as usize).max(1);
        let mut subset_idx = order[..n].to_vec();
        subset_idx.sort_unstable();
        let subset = dataset.subset(&subset_idx)?;
        let params = init_params(config, subset.n_users(), subset.n_items(), subset.scale().len());
        let params = em_step_with_likelihood(&params, &subset, config.prob_floor)?.0;
        cases.push((fraction, subset, params, Vec::with_capacity(iterations)));
    }
    // Interleave the sizes so slow drift in machine speed hits all of them alike.
    for _ in 0..iterations {
        for (_, subset, params, times) in cases.iter_mut() {
            let start = Instant::now();
            *params = em_step_with_likelihood(params, subset, config.prob_floor)?.0;
            times.push(start.elapsed().as_secs_f64());
        }
    }
    let mut rows = Vec::with_capacity(cases.len());
    for (fraction, subset, _, mut times) in cases {
        times.sort_by(f64::total_cmp);
        let mid = times.len() / 2;
        let median = if times.len() % 2 == 0 {
            0.5 * (times[mid - 1] + times[mid])
        } else {
            times[mid]
        };
        rows.push(ScalingRow {
            fraction,
            n_ratings: subset.n_ratings(),
            seconds_per_iteration: median,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RatingTriple;

    fn dataset(n: usize) -> Dataset {
        let triples = (0..n)
            .map(|k| RatingTriple::new(format!("u{}", k % 4), format!("i{k}"), ((k % 5) + 1).to_string()))
            .collect::<Vec<_>>();
        Dataset::from_triples(&triples, RatingScale::integer(1, 5).unwrap()).unwrap()
    }

    #[test]
    fn even_split() {
        let split = kfold_split(&dataset(10), 5, 1).unwrap();
        assert!(split.folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = split.folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn remainder_goes_to_first_fold() {
        let split = kfold_split(&dataset(11), 5, 1).unwrap();
        let sizes: Vec<usize> = split.folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn split_is_seeded() {
        let ds = dataset(30);
        assert_eq!(kfold_split(&ds, 5, 9).unwrap(), kfold_split(&ds, 5, 9).unwrap());
        assert_ne!(kfold_split(&ds, 5, 9).unwrap(), kfold_split(&ds, 5, 10).unwrap());
    }

    #[test]
    fn bad_fold_counts() {
        let ds = dataset(3);
        assert!(kfold_split(&ds, 4, 0).is_err());
        assert!(kfold_split(&ds, 1, 0).is_err());
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(), 0.75);
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn mae_cases() {
        let s = RatingScale::integer(1, 5).unwrap();
        assert_eq!(mae(&[1.0, 5.0], &[0, 4], &s).unwrap(), 0.0);
        assert_eq!(mae(&[2.0, 4.0, 4.0], &[0, 4, 2], &s).unwrap(), 1.0);
        let half = RatingScale::parse("0.5..5:0.5").unwrap();
        assert_eq!(mae(&[1.0, 3.0], &[2, 6], &half).unwrap(), 0.5);
        assert!(mae(&[1.0], &[], &s).is_err());
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.sem - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(summarize(&[4.0]).sem, 0.0);
    }

    #[test]
    fn scaling_rejects_bad_fractions() {
        let ds = dataset(20);
        let config = FitConfig::with_groups(2, 2);
        assert!(scaling_benchmark(&ds, &[0.0], &config, 1).is_err());
        assert!(scaling_benchmark(&ds, &[1.5], &config, 1).is_err());
        let rows = scaling_benchmark(&ds, &[1.0, 0.25, 0.5], &config, 1).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.windows(2).all(|w| w[0].n_ratings <= w[1].n_ratings));
    }
}
