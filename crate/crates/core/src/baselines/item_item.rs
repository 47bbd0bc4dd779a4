use rayon::prelude::*;

use super::naive::NaiveModel;
use crate::dataset::Dataset;

pub const DEFAULT_NEIGHBORS: usize = 50;

/// Item-item nearest neighbors on user-mean-centered ratings.
///
/// Every item keeps all other items with positive similarity, sorted by
/// descending similarity. The neighborhood size is applied per query: a
/// prediction for (u, i) uses the `k_neighbors` items most similar to i among
/// those u has rated.
#[derive(Debug, Clone)]
pub struct ItemItemModel {
    k_neighbors: usize,
    user_means: Vec<f64>,
    /// Per item, (neighbor, similarity) by descending similarity.
    neighbors: Vec<Vec<(u32, f64)>>,
    /// Same entries, ordered by neighbor index for lookups.
    by_index: Vec<Vec<(u32, f64)>>,
    naive: NaiveModel,
}

fn user_means(dataset: &Dataset) -> Vec<f64> {
    let scale = dataset.scale();
    (0..dataset.n_users())
        .map(|u| {
            let ratings = dataset.user_ratings(u);
            ratings.iter().map(|&(_, r)| scale.value(r as usize)).sum::<f64>() / ratings.len() as f64
        })
        .collect()
}

/// Adjusted cosine similarity of two items over the users who rated both,
/// with each rating centered on its user's mean. Zero when the overlap is
/// empty or either centered vector vanishes.
pub fn adjusted_cosine(dataset: &Dataset, user_means: &[f64], a: usize, b: usize) -> f64 {
    let scale = dataset.scale();
    let (mut dot, mut ssa, mut ssb) = (0.0, 0.0, 0.0);
    for &(u, ra) in dataset.item_ratings(a) {
        if let Some(&(_, rb)) = dataset.item_ratings(b).iter().find(|(v, _)| *v == u) {
            let ca = scale.value(ra as usize) - user_means[u as usize];
            let cb = scale.value(rb as usize) - user_means[u as usize];
            dot += ca * cb;
            ssa += ca * ca;
            ssb += cb * cb;
        }
    }
    if ssa > 0.0 && ssb > 0.0 {
        (dot / (ssa.sqrt() * ssb.sqrt())).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Similarities of `item` with every item of larger index, accumulated through
/// the co-raters in one sweep.
fn upper_similarities(dataset: &Dataset, means: &[f64], item: usize, scratch: &mut Scratch) -> Vec<(u32, f64)> {
    let scale = dataset.scale();
    for &(u, ri) in dataset.item_ratings(item) {
        let ci = scale.value(ri as usize) - means[u as usize];
        for &(j, rj) in dataset.user_ratings(u as usize) {
            let j = j as usize;
            if j <= item {
                continue;
            }
            let cj = scale.value(rj as usize) - means[u as usize];
            if !scratch.seen[j] {
                scratch.seen[j] = true;
                scratch.touched.push(j);
            }
            scratch.dot[j] += ci * cj;
            scratch.ss_self[j] += ci * ci;
            scratch.ss_other[j] += cj * cj;
        }
    }
    scratch.touched.sort_unstable();
    let mut out = Vec::new();
    for &j in &scratch.touched {
        let (dot, a, b) = (scratch.dot[j], scratch.ss_self[j], scratch.ss_other[j]);
        if a > 0.0 && b > 0.0 {
            let sim = (dot / (a.sqrt() * b.sqrt())).clamp(-1.0, 1.0);
            if sim > 0.0 {
                out.push((j as u32, sim));
            }
        }
        scratch.dot[j] = 0.0;
        scratch.ss_self[j] = 0.0;
        scratch.ss_other[j] = 0.0;
        scratch.seen[j] = false;
    }
    scratch.touched.clear();
    out
}

struct Scratch {
    dot: Vec<f64>,
    ss_self: Vec<f64>,
    ss_other: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            dot: vec![0.0; n],
            ss_self: vec![0.0; n],
            ss_other: vec![0.0; n],
            seen: vec![false; n],
            touched: Vec::new(),
        }
    }
}

pub fn item_item_fit(dataset: &Dataset, k_neighbors: usize) -> ItemItemModel {
    let k_neighbors = k_neighbors.max(1);
    let means = user_means(dataset);
    let n_items = dataset.n_items();
    let upper: Vec<Vec<(u32, f64)>> = (0..n_items)
        .into_par_iter()
        .map_init(
            || Scratch::new(n_items),
            |scratch, item| upper_similarities(dataset, &means, item, scratch),
        )
        .collect();

    let mut by_index = vec![Vec::new(); n_items];
    for (i, row) in upper.iter().enumerate() {
        for &(j, sim) in row {
            by_index[i].push((j, sim));
            by_index[j as usize].push((i as u32, sim));
        }
    }
    for row in &mut by_index {
        row.sort_unstable_by_key(|&(j, _)| j);
    }
    let neighbors = by_index
        .iter()
        .map(|row| {
            let mut sorted = row.clone();
            sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            sorted
        })
        .collect();
    ItemItemModel {
        k_neighbors,
        user_means: means,
        neighbors,
        by_index,
        naive: NaiveModel::fit(dataset),
    }
}

impl ItemItemModel {
    pub fn k_neighbors(&self) -> usize {
        self.k_neighbors
    }

    pub fn user_means(&self) -> &[f64] {
        &self.user_means
    }

    pub fn neighbors(&self, item: usize) -> &[(u32, f64)] {
        &self.neighbors[item]
    }

    /// Stored similarity; zero for pairs that are not neighbors.
    pub fn similarity(&self, a: usize, b: usize) -> f64 {
        let row = &self.by_index[a];
        row.binary_search_by_key(&(b as u32), |&(j, _)| j)
            .map(|pos| row[pos].1)
            .unwrap_or(0.0)
    }

    /// Similarity-weighted mean of the user's ratings on the `k_neighbors`
    /// items most similar to `item`. Falls back to the item mean when the user
    /// has rated none of its neighbors.
    pub fn predict(&self, dataset: &Dataset, user: Option<usize>, item: Option<usize>) -> f64 {
        let (Some(u), Some(i)) = (user, item) else {
            return self.naive.predict(item);
        };
        let scale = dataset.scale();
        let mut candidates: Vec<(f64, u32, f64)> = dataset
            .user_ratings(u)
            .iter()
            .filter_map(|&(j, r)| {
                let sim = self.similarity(i, j as usize);
                (sim > 0.0).then(|| (sim, j, scale.value(r as usize)))
            })
            .collect();
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        candidates.truncate(self.k_neighbors);
        let weight: f64 = candidates.iter().map(|c| c.0.abs()).sum();
        if candidates.is_empty() || weight <= 0.0 {
            return self.naive.predict(item);
        }
        candidates.iter().map(|c| c.0 * c.2).sum::<f64>() / weight
    }
}
