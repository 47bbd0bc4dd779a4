//! Expectation-maximization for the mixed-membership block model.
//!
//! One iteration is a single fused pass over the observed links: each link's
//! responsibility matrix is computed from the current parameters and folded
//! straight into the numerators of the three updates, so nothing of size
//! |R| × K × L is ever stored. Cost per pass is O(|R|·K·L + N·K + M·L).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::params::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub user_groups: usize,
    pub item_groups: usize,
    pub max_iterations: usize,
    /// Relative change of the log-likelihood below which the fit stops.
    pub tol: f64,
    pub seed: u64,
    /// Lower bound applied to every p entry after the M-step.
    pub prob_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            user_groups: 10,
            item_groups: 10,
            max_iterations: 400,
            tol: 1e-6,
            seed: 0,
            prob_floor: 1e-12,
        }
    }
}

impl FitConfig {
    pub fn with_groups(user_groups: usize, item_groups: usize) -> Self {
        Self {
            user_groups,
            item_groups,
            ..Self::default()
        }
    }

    pub fn validate(&self, n_labels: usize) -> Result<()> {
        if self.user_groups == 0 || self.item_groups == 0 {
            return Err(Error::InvalidConfig("K and L must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if !(self.prob_floor >= 0.0 && self.prob_floor < 1.0 / n_labels as f64) {
            return Err(Error::InvalidConfig(format!(
                "prob_floor must lie in [0, 1/{n_labels})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    /// Log-likelihood of the initial parameters followed by one entry per
    /// completed iteration; the last entry belongs to `params`.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("trace is never empty")
    }
}

/// Random starting point: every membership row and every group-pair rating
/// distribution is an independent normalized vector of uniform draws.
pub fn init_params(config: &FitConfig, n_users: usize, n_items: usize, n_labels: usize) -> ModelParams {
    let (k, l) = (config.user_groups, config.item_groups);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::zeros(k, l, n_labels, n_users, n_items);
    for row in params.theta_mut().chunks_exact_mut(k) {
        fill_simplex(&mut rng, row);
    }
    for row in params.eta_mut().chunks_exact_mut(l) {
        fill_simplex(&mut rng, row);
    }
    let mut cell = vec![0.0; n_labels];
    for kk in 0..k {
        for ll in 0..l {
            fill_simplex(&mut rng, &mut cell);
            for (r, &v) in cell.iter().enumerate() {
                params.set_p(kk, ll, r, v);
            }
        }
    }
    params
}

fn fill_simplex(rng: &mut impl Rng, row: &mut [f64]) {
    loop {
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = rng.gen::<f64>();
            sum += *x;
        }
        if sum > 0.0 {
            row.iter_mut().for_each(|x| *x /= sum);
            return;
        }
    }
}

/// Posterior probability that the rating `rating` of user `user` on item
/// `item` was produced by each group pair; returned as a row-major K×L matrix.
pub fn responsibility(params: &ModelParams, user: usize, item: usize, rating: usize) -> Result<Vec<f64>> {
    let mut omega = vec![0.0; params.user_groups() * params.item_groups()];
    let mut row_sums = vec![0.0; params.user_groups()];
    let denom = fill_responsibility(params, user, item, rating, &mut omega, &mut row_sums);
    if !(denom > 0.0) {
        return Err(Error::DegenerateSupport { user, item });
    }
    omega.iter_mut().for_each(|w| *w /= denom);
    Ok(omega)
}

/// Writes the unnormalized products θ_uk η_il p_kl(r) into `omega`, their
/// per-k sums into `row_sums`, and returns the total.
#[inline]
fn fill_responsibility(
    params: &ModelParams,
    user: usize,
    item: usize,
    rating: usize,
    omega: &mut [f64],
    row_sums: &mut [f64],
) -> f64 {
    let l = params.item_groups();
    let eta = params.eta_row(item);
    let p = params.p_slice(rating);
    let rows = omega.chunks_exact_mut(l).zip(p.chunks_exact(l));
    for ((&t, (w_row, p_row)), sum) in params.theta_row(user).iter().zip(rows).zip(row_sums.iter_mut()) {
        let mut acc = 0.0;
        for ((w, &e), &pr) in w_row.iter_mut().zip(eta).zip(p_row) {
            *w = t * e * pr;
            acc += *w;
        }
        *sum = acc;
    }
    row_sums.iter().sum()
}

/// One E-step plus M-step. Returns the updated parameters together with the
/// log-likelihood of the *input* parameters, which falls out of the same pass.
pub fn em_step_with_likelihood(
    params: &ModelParams,
    dataset: &Dataset,
    prob_floor: f64,
) -> Result<(ModelParams, f64)> {
    check_dims(params, dataset)?;
    if dataset.n_ratings() == 0 {
        return Err(Error::EmptyDataset);
    }
    let (k, l, s) = (params.user_groups(), params.item_groups(), params.n_labels());
    let mut next = ModelParams::zeros(k, l, s, dataset.n_users(), dataset.n_items());
    let mut omega = vec![0.0; k * l];
    let mut row_sums = vec![0.0; k];
    let mut col_sums = vec![0.0; l];
    let mut log_likelihood = 0.0;

    for link in dataset.links() {
        let (u, i, r) = (link.user as usize, link.item as usize, link.rating as usize);
        let denom = fill_responsibility(params, u, i, r, &mut omega, &mut row_sums);
        if !(denom > 0.0) {
            return Err(Error::DegenerateSupport { user: u, item: i });
        }
        log_likelihood += denom.ln();
        let inv = 1.0 / denom;

        let theta_acc = &mut next.theta_mut()[u * k..(u + 1) * k];
        for (acc, &w) in theta_acc.iter_mut().zip(&row_sums) {
            *acc += w * inv;
        }
        col_sums.fill(0.0);
        for row in omega.chunks_exact(l) {
            for (acc, &w) in col_sums.iter_mut().zip(row) {
                *acc += w;
            }
        }
        let eta_acc = &mut next.eta_mut()[i * l..(i + 1) * l];
        for (acc, &w) in eta_acc.iter_mut().zip(&col_sums) {
            *acc += w * inv;
        }
        let p_acc = &mut next.p_mut()[r * k * l..(r + 1) * k * l];
        for (acc, &w) in p_acc.iter_mut().zip(&omega) {
            *acc += w * inv;
        }
    }

    for (u, row) in next.theta_mut().chunks_exact_mut(k).enumerate() {
        let d = dataset.user_degree(u) as f64;
        row.iter_mut().for_each(|x| *x /= d);
    }
    for (i, row) in next.eta_mut().chunks_exact_mut(l).enumerate() {
        let d = dataset.item_degree(i) as f64;
        row.iter_mut().for_each(|x| *x /= d);
    }
    normalize_p(&mut next, prob_floor);
    Ok((next, log_likelihood))
}

pub fn em_step(params: &ModelParams, dataset: &Dataset, prob_floor: f64) -> Result<ModelParams> {
    em_step_with_likelihood(params, dataset, prob_floor).map(|(next, _)| next)
}

/// Turns accumulated responsibilities into distributions over labels, then
/// applies the floor and renormalizes. A group pair that received no weight at
/// all gets the uniform distribution.
fn normalize_p(params: &mut ModelParams, prob_floor: f64) {
    let (k, l, s) = (params.user_groups(), params.item_groups(), params.n_labels());
    for kk in 0..k {
        for ll in 0..l {
            let total: f64 = (0..s).map(|r| params.p_at(kk, ll, r)).sum();
            for r in 0..s {
                let v = if total > 0.0 {
                    params.p_at(kk, ll, r) / total
                } else {
                    1.0 / s as f64
                };
                params.set_p(kk, ll, r, v);
            }
            if prob_floor > 0.0 && (0..s).any(|r| params.p_at(kk, ll, r) < prob_floor) {
                let mut sum = 0.0;
                for r in 0..s {
                    let v = params.p_at(kk, ll, r).max(prob_floor);
                    params.set_p(kk, ll, r, v);
                    sum += v;
                }
                for r in 0..s {
                    let v = params.p_at(kk, ll, r) / sum;
                    params.set_p(kk, ll, r, v);
                }
            }
        }
    }
}

/// Σ over observed links of log Σ_kl θ_uk η_il p_kl(r_ui).
pub fn log_likelihood(params: &ModelParams, dataset: &Dataset) -> Result<f64> {
    check_dims(params, dataset)?;
    let mut omega = vec![0.0; params.user_groups() * params.item_groups()];
    let mut row_sums = vec![0.0; params.user_groups()];
    let mut total = 0.0;
    for link in dataset.links() {
        let (u, i) = (link.user as usize, link.item as usize);
        let prob = fill_responsibility(params, u, i, link.rating as usize, &mut omega, &mut row_sums);
        if !(prob > 0.0) {
            return Err(Error::DegenerateSupport { user: u, item: i });
        }
        total += prob.ln();
    }
    Ok(total)
}

fn check_dims(params: &ModelParams, dataset: &Dataset) -> Result<()> {
    if params.n_users() != dataset.n_users() {
        return Err(Error::DimensionMismatch {
            expected: dataset.n_users(),
            found: params.n_users(),
        });
    }
    if params.n_items() != dataset.n_items() {
        return Err(Error::DimensionMismatch {
            expected: dataset.n_items(),
            found: params.n_items(),
        });
    }
    if params.n_labels() != dataset.scale().len() {
        return Err(Error::DimensionMismatch {
            expected: dataset.scale().len(),
            found: params.n_labels(),
        });
    }
    Ok(())
}

/// Runs EM from a seeded random start until the relative log-likelihood
/// change drops below `config.tol` or `config.max_iterations` is reached.
pub fn fit(dataset: &Dataset, config: &FitConfig) -> Result<FitResult> {
    let init = init_params(config, dataset.n_users(), dataset.n_items(), dataset.scale().len());
    fit_from(dataset, config, init)
}

/// Same as [`fit`] but starting from the given parameters.
pub fn fit_from(dataset: &Dataset, config: &FitConfig, init: ModelParams) -> Result<FitResult> {
    config.validate(dataset.scale().len())?;
    if dataset.n_ratings() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut current = init;
    let mut trace = Vec::with_capacity(config.max_iterations + 1);
    // Each pass yields the likelihood of the parameters it started from, so
    // trace[t] is filled during pass t + 1.
    let (mut next, ll0) = em_step_with_likelihood(&current, dataset, config.prob_floor)?;
    trace.push(ll0);
    for iteration in 1..=config.max_iterations {
        current = next;
        if iteration == config.max_iterations {
            trace.push(log_likelihood(&current, dataset)?);
            break;
        }
        let (following, ll) = em_step_with_likelihood(&current, dataset, config.prob_floor)?;
        let previous = trace[trace.len() - 1];
        trace.push(ll);
        if relative_change(previous, ll) < config.tol {
            return Ok(FitResult {
                params: current,
                log_likelihood_trace: trace,
                iterations_run: iteration,
                converged: true,
            });
        }
        next = following;
    }
    let n = trace.len();
    let converged = relative_change(trace[n - 2], trace[n - 1]) < config.tol;
    Ok(FitResult {
        params: current,
        log_likelihood_trace: trace,
        iterations_run: config.max_iterations,
        converged,
    })
}

pub(crate) fn relative_change(previous: f64, current: f64) -> f64 {
    if previous == current {
        return 0.0;
    }
    (current - previous).abs() / previous.abs().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RatingTriple;
    use crate::params::validate_params;
    use crate::scale::RatingScale;

    fn toy_dataset() -> Dataset {
        let triples = vec![
            RatingTriple::new("a", "x", "1"),
            RatingTriple::new("a", "y", "1"),
            RatingTriple::new("b", "x", "1"),
            RatingTriple::new("b", "y", "2"),
        ];
        Dataset::from_triples(&triples, RatingScale::integer(1, 2).unwrap()).unwrap()
    }

    fn pure(params: &mut ModelParams, user: usize, k: usize, item: usize, l: usize) {
        let kk = params.user_groups();
        let ll = params.item_groups();
        params.theta_mut()[user * kk..(user + 1) * kk].fill(0.0);
        params.theta_mut()[user * kk + k] = 1.0;
        params.eta_mut()[item * ll..(item + 1) * ll].fill(0.0);
        params.eta_mut()[item * ll + l] = 1.0;
    }

    #[test]
    fn single_group_init_is_all_ones() {
        let config = FitConfig { user_groups: 1, seed: 7, ..FitConfig::default() };
        let params = init_params(&config, 5, 3, 4);
        assert!(params.theta().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn init_is_seeded_and_normalized() {
        let config = FitConfig { seed: 99, ..FitConfig::with_groups(3, 4) };
        let a = init_params(&config, 6, 5, 5);
        let b = init_params(&config, 6, 5, 5);
        assert_eq!(a, b);
        assert!(validate_params(&a, 1e-12).is_empty());
        let other = init_params(&FitConfig { seed: 100, ..config }, 6, 5, 5);
        assert_ne!(a, other);
    }

    #[test]
    fn pure_memberships_concentrate_responsibility() {
        let config = FitConfig::with_groups(3, 4);
        let mut params = init_params(&config, 1, 1, 2);
        pure(&mut params, 0, 1, 0, 2);
        let omega = responsibility(&params, 0, 0, 1).unwrap();
        for (idx, w) in omega.iter().enumerate() {
            let expected = if idx == 1 * 4 + 2 { 1.0 } else { 0.0 };
            assert_eq!(*w, expected, "cell {idx}");
        }
    }

    #[test]
    fn symmetric_parameters_give_uniform_responsibility() {
        let (k, l) = (3, 2);
        let theta = vec![1.0 / 3.0; k];
        let eta = vec![0.5; l];
        let p = vec![0.5; k * l * 2];
        let params = ModelParams::new(k, l, 2, theta, eta, p).unwrap();
        let omega = responsibility(&params, 0, 0, 0).unwrap();
        for w in omega {
            assert!((w - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_denominator_is_degenerate() {
        let params = ModelParams::new(1, 1, 2, vec![1.0], vec![1.0], vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            responsibility(&params, 0, 0, 1),
            Err(Error::DegenerateSupport { .. })
        ));
    }

    #[test]
    fn single_group_step_recovers_empirical_frequencies() {
        let ds = toy_dataset();
        let config = FitConfig { seed: 3, ..FitConfig::with_groups(1, 1) };
        let init = init_params(&config, ds.n_users(), ds.n_items(), 2);
        let step = em_step(&init, &ds, 0.0).unwrap();
        assert!((step.p_at(0, 0, 0) - 0.75).abs() < 1e-15);
        assert!((step.p_at(0, 0, 1) - 0.25).abs() < 1e-15);
        let again = em_step(&step, &ds, 0.0).unwrap();
        for (a, b) in again.p().iter().zip(step.p()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_group_likelihood_closed_form() {
        let ds = toy_dataset();
        let params = ModelParams::new(
            1,
            1,
            2,
            vec![1.0; 2],
            vec![1.0; 2],
            vec![0.75, 0.25],
        )
        .unwrap();
        let expected = 3.0 * 0.75f64.ln() + 0.25f64.ln();
        let ll = log_likelihood(&params, &ds).unwrap();
        assert!((ll - expected).abs() < 1e-12);
    }

    #[test]
    fn deterministic_model_has_zero_log_likelihood() {
        let ds = toy_dataset();
        // user group = user; rating 2 only for (b, y)
        let a = ds.user_index("a").unwrap();
        let b = ds.user_index("b").unwrap();
        let x = ds.item_index("x").unwrap();
        let y = ds.item_index("y").unwrap();
        let mut params = ModelParams::zeros(2, 2, 2, 2, 2);
        pure(&mut params, a, 0, x, 0);
        pure(&mut params, b, 1, y, 1);
        for (k, l) in [(0, 0), (0, 1), (1, 0)] {
            params.set_p(k, l, 0, 1.0);
        }
        params.set_p(1, 1, 1, 1.0);
        assert_eq!(log_likelihood(&params, &ds).unwrap(), 0.0);
    }

    #[test]
    fn step_output_is_normalized() {
        let ds = toy_dataset();
        let config = FitConfig { seed: 11, ..FitConfig::with_groups(2, 3) };
        let init = init_params(&config, ds.n_users(), ds.n_items(), 2);
        let next = em_step(&init, &ds, config.prob_floor).unwrap();
        assert!(validate_params(&next, 1e-9).is_empty());
    }

    #[test]
    fn fit_is_deterministic_and_monotone() {
        let ds = toy_dataset();
        let config = FitConfig { seed: 5, max_iterations: 50, ..FitConfig::with_groups(2, 2) };
        let a = fit(&ds, &config).unwrap();
        let b = fit(&ds, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.log_likelihood_trace.len(), a.iterations_run + 1);
        for w in a.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
        }
        assert_eq!(a.log_likelihood(), log_likelihood(&a.params, &ds).unwrap());
    }

    #[test]
    fn max_iterations_respected() {
        let ds = toy_dataset();
        let config = FitConfig { seed: 5, max_iterations: 1, tol: 1e-300, ..FitConfig::with_groups(2, 2) };
        let res = fit(&ds, &config).unwrap();
        assert_eq!(res.iterations_run, 1);
        assert_eq!(res.log_likelihood_trace.len(), 2);
    }

    #[test]
    fn config_validation() {
        let ok = FitConfig::default();
        assert!(ok.validate(5).is_ok());
        assert!(FitConfig { user_groups: 0, ..ok.clone() }.validate(5).is_err());
        assert!(FitConfig { max_iterations: 0, ..ok.clone() }.validate(5).is_err());
        assert!(FitConfig { tol: 0.0, ..ok.clone() }.validate(5).is_err());
        assert!(FitConfig { prob_floor: 0.2, ..ok }.validate(5).is_err());
    }

    #[test]
    fn relative_change_handles_equal_values() {
        assert_eq!(relative_change(-3.0, -3.0), 0.0);
        assert!((relative_change(-100.0, -99.0) - 0.01).abs() < 1e-15);
    }
}
