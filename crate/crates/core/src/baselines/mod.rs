//! Comparison recommenders: item mean, item-item neighbors and biased matrix
//! factorization. All of them predict real-valued ratings.

mod item_item;
mod mf;
mod naive;

pub use item_item::{adjusted_cosine, item_item_fit, ItemItemModel, DEFAULT_NEIGHBORS};
pub use mf::{mf_fit, mf_fit_traced, MfConfig, MfModel};
pub use naive::{naive_predict, NaiveModel};
