use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct MfConfig {
    pub k_factors: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Factors start uniform in [-init_scale, init_scale].
    pub init_scale: f64,
}

impl Default for MfConfig {
    fn default() -> Self {
        Self {
            k_factors: 50,
            learning_rate: 0.002,
            lambda: 0.02,
            epochs: 100,
            seed: 0,
            init_scale: 0.01,
        }
    }
}

/// Biased matrix factorization: r̂ = p_u · q_i + μ + b_u + b_i.
#[derive(Debug, Clone, PartialEq)]
pub struct MfModel {
    k_factors: usize,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    mu: f64,
    lambda: f64,
    learning_rate: f64,
    epochs: usize,
    min_value: f64,
    max_value: f64,
}

impl MfModel {
    /// Builds a model from explicit parameters; mostly useful in tests.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        k_factors: usize,
        user_factors: Vec<f64>,
        item_factors: Vec<f64>,
        user_bias: Vec<f64>,
        item_bias: Vec<f64>,
        mu: f64,
        value_range: (f64, f64),
    ) -> Result<Self> {
        if user_factors.len() != user_bias.len() * k_factors {
            return Err(Error::DimensionMismatch {
                expected: user_bias.len() * k_factors,
                found: user_factors.len(),
            });
        }
        if item_factors.len() != item_bias.len() * k_factors {
            return Err(Error::DimensionMismatch {
                expected: item_bias.len() * k_factors,
                found: item_factors.len(),
            });
        }
        Ok(Self {
            k_factors,
            user_factors,
            item_factors,
            user_bias,
            item_bias,
            mu,
            lambda: 0.0,
            learning_rate: 0.0,
            epochs: 0,
            min_value: value_range.0,
            max_value: value_range.1,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn k_factors(&self) -> usize {
        self.k_factors
    }

    pub fn user_factors(&self, user: usize) -> &[f64] {
        &self.user_factors[user * self.k_factors..(user + 1) * self.k_factors]
    }

    pub fn item_factors(&self, item: usize) -> &[f64] {
        &self.item_factors[item * self.k_factors..(item + 1) * self.k_factors]
    }

    pub fn user_bias(&self, user: usize) -> f64 {
        self.user_bias[user]
    }

    pub fn item_bias(&self, item: usize) -> f64 {
        self.item_bias[item]
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    fn raw(&self, user: usize, item: usize) -> f64 {
        let dot: f64 = self
            .user_factors(user)
            .iter()
            .zip(self.item_factors(item))
            .map(|(a, b)| a * b)
            .sum();
        dot + self.mu + self.user_bias[user] + self.item_bias[item]
    }

    /// Prediction clamped to the scale's value range. A user or item without
    /// training data contributes a zero factor vector and zero bias.
    pub fn predict(&self, user: Option<usize>, item: Option<usize>) -> f64 {
        let raw = match (user, item) {
            (Some(u), Some(i)) => self.raw(u, i),
            (Some(u), None) => self.mu + self.user_bias[u],
            (None, Some(i)) => self.mu + self.item_bias[i],
            (None, None) => self.mu,
        };
        raw.clamp(self.min_value, self.max_value)
    }

    /// Σ (r − r̂)² + λ(‖p_u‖² + ‖q_i‖² + b_u² + b_i²) over the observed ratings,
    /// with r̂ unclamped.
    pub fn objective(&self, dataset: &Dataset) -> f64 {
        dataset
            .links()
            .iter()
            .map(|link| {
                let (u, i) = (link.user as usize, link.item as usize);
                let err = dataset.rating_value(link) - self.raw(u, i);
                let norm: f64 = self.user_factors(u).iter().chain(self.item_factors(i)).map(|x| x * x).sum();
                err * err
                    + self.lambda
                        * (norm + self.user_bias[u] * self.user_bias[u] + self.item_bias[i] * self.item_bias[i])
            })
            .sum()
    }

    /// One SGD pass over the links in the given order.
    fn sgd_epoch(&mut self, dataset: &Dataset, order: &[usize]) {
        let k = self.k_factors;
        let (lr, lambda) = (self.learning_rate, self.lambda);
        for &idx in order {
            let link = dataset.links()[idx];
            let (u, i) = (link.user as usize, link.item as usize);
            let err = dataset.rating_value(&link) - self.raw(u, i);
            self.user_bias[u] += lr * (err - lambda * self.user_bias[u]);
            self.item_bias[i] += lr * (err - lambda * self.item_bias[i]);
            let pu = &mut self.user_factors[u * k..(u + 1) * k];
            let qi = &mut self.item_factors[i * k..(i + 1) * k];
            for (p, q) in pu.iter_mut().zip(qi.iter_mut()) {
                let (p0, q0) = (*p, *q);
                *p += lr * (err * q0 - lambda * p0);
                *q += lr * (err * p0 - lambda * q0);
            }
        }
    }
}

/// Trains biased MF by stochastic gradient descent, visiting the ratings in a
/// freshly shuffled order every epoch.
pub fn mf_fit(dataset: &Dataset, config: &MfConfig) -> Result<MfModel> {
    let mut trace = Vec::new();
    mf_fit_traced(dataset, config, &mut trace)
}

/// Like [`mf_fit`], additionally recording the training objective before the
/// first epoch and after every epoch.
pub fn mf_fit_traced(dataset: &Dataset, config: &MfConfig, objective_trace: &mut Vec<f64>) -> Result<MfModel> {
    if config.epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be at least 1".into()));
    }
    if config.k_factors == 0 || !(config.learning_rate > 0.0) || !(config.lambda >= 0.0) {
        return Err(Error::InvalidConfig(
            "k_factors, learning_rate must be positive and lambda non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.k_factors;
    let mut draw = |n: usize| {
        (0..n)
            .map(|_| rng.gen_range(-config.init_scale..=config.init_scale))
            .collect::<Vec<_>>()
    };
    let user_factors = draw(dataset.n_users() * k);
    let item_factors = draw(dataset.n_items() * k);
    let scale = dataset.scale();
    let mut model = MfModel {
        k_factors: k,
        user_factors,
        item_factors,
        user_bias: vec![0.0; dataset.n_users()],
        item_bias: vec![0.0; dataset.n_items()],
        mu: dataset.global_mean(),
        lambda: config.lambda,
        learning_rate: config.learning_rate,
        epochs: config.epochs,
        min_value: scale.min_value(),
        max_value: scale.max_value(),
    };
    objective_trace.clear();
    objective_trace.push(model.objective(dataset));
    let mut order: Vec<usize> = (0..dataset.n_ratings()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        model.sgd_epoch(dataset, &order);
        let objective = model.objective(dataset);
        objective_trace.push(objective);
        if !(objective <= DIVERGENCE_LIMIT * dataset.n_ratings().max(1) as f64) {
            return Err(Error::Diverged { epoch, objective });
        }
    }
    Ok(model)
}
