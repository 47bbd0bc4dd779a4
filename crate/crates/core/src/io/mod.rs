//! File formats and synthetic data.

pub mod metadata;
pub mod ratings;
pub mod report;
pub mod snapshot;
pub mod synthetic;
