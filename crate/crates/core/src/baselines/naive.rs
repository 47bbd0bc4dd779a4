use crate::dataset::Dataset;

/// Mean observed rating of an item; falls back to the global mean for items
/// without ratings.
pub fn naive_predict(dataset: &Dataset, item: Option<usize>) -> f64 {
    match item {
        Some(i) if dataset.item_degree(i) > 0 => item_mean(dataset, i),
        _ => dataset.global_mean(),
    }
}

fn item_mean(dataset: &Dataset, item: usize) -> f64 {
    let scale = dataset.scale();
    let ratings = dataset.item_ratings(item);
    ratings
        .iter()
        .map(|&(_, r)| scale.value(r as usize))
        .sum::<f64>()
        / ratings.len() as f64
}

/// Precomputed item means.
#[derive(Debug, Clone)]
pub struct NaiveModel {
    item_means: Vec<f64>,
    global_mean: f64,
}

impl NaiveModel {
    pub fn fit(dataset: &Dataset) -> Self {
        Self {
            item_means: (0..dataset.n_items()).map(|i| item_mean(dataset, i)).collect(),
            global_mean: dataset.global_mean(),
        }
    }

    pub fn predict(&self, item: Option<usize>) -> f64 {
        item.and_then(|i| self.item_means.get(i).copied())
            .unwrap_or(self.global_mean)
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }
}
