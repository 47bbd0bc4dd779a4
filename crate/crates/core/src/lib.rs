//! Collaborative filtering with a mixed-membership stochastic block model.
//!
//! Users and items each belong to a mixture of latent groups; the rating a
//! user gives an item is drawn from a distribution that depends only on the
//! pair of groups. Parameters are fitted by expectation-maximization whose
//! cost per iteration is linear in the number of observed ratings. The crate
//! also ships the usual comparison baselines, a cross-validation harness, file
//! formats and a profile-similarity analysis.
//!
//! ```
//! use mmsbm::{Dataset, FitConfig, RatingScale, RatingTriple};
//!
//! let scale = RatingScale::integer(1, 5).unwrap();
//! let triples = vec![
//!     RatingTriple::new("alice", "dune", "5"),
//!     RatingTriple::new("alice", "heat", "2"),
//!     RatingTriple::new("bob", "dune", "4"),
//! ];
//! let data = Dataset::from_triples(&triples, scale).unwrap();
//! let config = FitConfig { max_iterations: 50, ..FitConfig::with_groups(2, 2) };
//! let ensemble = mmsbm::ensemble_fit(&data, &config, 4, 0).unwrap();
//! let dist = ensemble.predict(data.user_index("bob"), data.item_index("heat"));
//! assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
//! ```

pub mod analysis;
pub mod baselines;
pub mod dataset;
pub mod em;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod io;
pub mod params;
pub mod scale;

pub use dataset::{Dataset, Link, RatingTriple};
pub use em::{em_step, fit, init_params, log_likelihood, responsibility, FitConfig, FitResult};
pub use ensemble::{
    cold_start_vector, ensemble_fit, estimate, predict_distribution, Combination, Ensemble, Estimate, Estimator,
    RatingDistribution,
};
pub use error::{Error, Result};
pub use params::{validate_params, ModelParams, Violation};
pub use scale::RatingScale;
