//! Browser demo: generate planted ratings, fit a small ensemble, and inspect
//! predicted rating distributions. Every entry point returns JSON text.
//!
//! The logic lives in [`Session`] and [`synthesize_ratings`], which are plain
//! Rust and testable natively; the `#[wasm_bindgen]` wrappers only convert
//! errors. Runs are fitted one after another, so no worker threads are needed.

use std::io::Cursor;
use std::path::Path;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use mmsbm::io::ratings::{read_ratings, RatingFormat};
use mmsbm::io::synthetic::{generate_synthetic, BlockSpec, MembershipSpec, SyntheticSpec};
use mmsbm::{estimate, fit, Dataset, Ensemble, Estimator, FitConfig, RatingScale};

const MAX_RATINGS: usize = 200_000;

/// Tab-separated `user item rating` lines drawn from a planted model with
/// `groups` pure user and item groups.
pub fn synthesize_ratings(
    users: usize,
    items: usize,
    groups: usize,
    ratings_per_user: usize,
    seed: u64,
) -> Result<String, String> {
    if users.saturating_mul(ratings_per_user) > MAX_RATINGS {
        return Err(format!("at most {MAX_RATINGS} ratings in the demo"));
    }
    let spec = SyntheticSpec {
        n_users: users,
        n_items: items,
        user_groups: groups,
        item_groups: groups,
        scale: RatingScale::integer(1, 5).map_err(|e| e.to_string())?,
        theta: MembershipSpec::Pure,
        eta: MembershipSpec::Pure,
        p: BlockSpec::NearDeterministic { peak: 0.9 },
        ratings_per_user,
        seed,
    };
    let (data, _) = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    let mut out = String::new();
    for t in data.to_triples() {
        out.push_str(&format!("{}\t{}\t{}\n", t.user, t.item, t.label));
    }
    Ok(out)
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    iterations: usize,
    converged: bool,
    log_likelihood_trace: Vec<f64>,
}

#[derive(Serialize)]
struct Summary<'a> {
    users: &'a [String],
    items: &'a [String],
    n_ratings: usize,
    user_groups: usize,
    item_groups: usize,
    runs: Vec<RunSummary>,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct PredictionView {
    pub cold_user: bool,
    pub cold_item: bool,
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
    pub mode: String,
    pub median: String,
    pub mean: f64,
}

/// A fitted ensemble together with the data it was fitted on.
pub struct Session {
    data: Dataset,
    ensemble: Ensemble,
}

impl Session {
    /// Parses ratings text (`user item rating`, whitespace separated, scale
    /// 1..5) and fits `runs` seeded EM runs with K = L = `groups`.
    pub fn fit(ratings: &str, groups: usize, runs: usize, seed: u64, max_iterations: usize) -> Result<Self, String> {
        if runs == 0 || runs > 64 {
            return Err("runs must lie in 1..=64".into());
        }
        let scale = RatingScale::integer(1, 5).map_err(|e| e.to_string())?;
        let format = RatingFormat {
            delimiter: "ws".parse().map_err(|e: mmsbm::Error| e.to_string())?,
            ..RatingFormat::movielens_100k()
        };
        let triples =
            read_ratings(Cursor::new(ratings), Path::new("input"), &format, &scale).map_err(|e| e.to_string())?;
        if triples.len() > MAX_RATINGS {
            return Err(format!("at most {MAX_RATINGS} ratings in the demo"));
        }
        let data = Dataset::from_triples(&triples, scale.clone()).map_err(|e| e.to_string())?;
        let config = FitConfig {
            max_iterations,
            ..FitConfig::with_groups(groups, groups)
        };
        config.validate(scale.len()).map_err(|e| e.to_string())?;
        let mut fitted = Vec::with_capacity(runs);
        for offset in 0..runs as u64 {
            let run_seed = seed.wrapping_add(offset);
            let result = fit(&data, &FitConfig { seed: run_seed, ..config.clone() }).map_err(|e| e.to_string())?;
            fitted.push((result, run_seed));
        }
        let ensemble = Ensemble::from_runs(scale, config, fitted).map_err(|e| e.to_string())?;
        Ok(Self { data, ensemble })
    }

    pub fn summary_json(&self) -> String {
        let runs = (0..self.ensemble.n_runs())
            .map(|idx| {
                let r = self.ensemble.run(idx);
                RunSummary {
                    seed: self.ensemble.seed(idx),
                    iterations: r.iterations_run,
                    converged: r.converged,
                    log_likelihood_trace: r.log_likelihood_trace.clone(),
                }
            })
            .collect();
        let config = self.ensemble.config();
        serde_json::to_string(&Summary {
            users: self.data.user_ids(),
            items: self.data.item_ids(),
            n_ratings: self.data.n_ratings(),
            user_groups: config.user_groups,
            item_groups: config.item_groups,
            runs,
        })
        .expect("summary serializes")
    }

    /// Ensemble prediction; unknown ids take the cold-start path.
    pub fn predict(&self, user: &str, item: &str) -> PredictionView {
        let (u, i) = (self.data.user_index(user), self.data.item_index(item));
        let dist = self.ensemble.predict(u, i);
        let scale = self.data.scale();
        let label = |e| scale.label(estimate(&dist, e, scale).label(scale)).to_string();
        PredictionView {
            cold_user: u.is_none(),
            cold_item: i.is_none(),
            labels: scale.labels().to_vec(),
            mode: label(Estimator::Mode),
            median: label(Estimator::Median),
            mean: estimate(&dist, Estimator::Mean, scale).value(scale),
            probs: dist.into_probs(),
        }
    }

    /// Membership vector of a user in the first run, or the cold-start vector.
    pub fn user_membership(&self, user: &str) -> Vec<f64> {
        match self.data.user_index(user) {
            Some(u) => self.ensemble.run(0).params.theta_row(u).to_vec(),
            None => self.ensemble.cold_user_vector(0).to_vec(),
        }
    }
}

#[wasm_bindgen]
pub fn synthesize(users: usize, items: usize, groups: usize, ratings_per_user: usize, seed: u32) -> Result<String, JsError> {
    synthesize_ratings(users, items, groups, ratings_per_user, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(ratings: &str, groups: usize, runs: usize, seed: u32, max_iterations: usize) -> Result<Demo, JsError> {
        Session::fit(ratings, groups, runs, seed as u64, max_iterations)
            .map(|session| Demo { session })
            .map_err(|e| JsError::new(&e))
    }

    pub fn summary(&self) -> String {
        self.session.summary_json()
    }

    pub fn predict(&self, user: &str, item: &str) -> String {
        serde_json::to_string(&self.session.predict(user, item)).expect("prediction serializes")
    }

    pub fn membership(&self, user: &str) -> String {
        serde_json::to_string(&self.session.user_membership(user)).expect("vector serializes")
    }
}
