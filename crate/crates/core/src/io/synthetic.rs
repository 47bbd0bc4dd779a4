//! Planted-model data: draws parameters from a spec, then ratings from the
//! generative model, so the ground truth is known.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Link};
use crate::error::{Error, Result};
use crate::params::{validate_params, ModelParams};
use crate::scale::RatingScale;

/// How membership vectors are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum MembershipSpec {
    /// Each node belongs entirely to one uniformly chosen group.
    Pure,
    /// A uniformly chosen dominant group gets `weight`, the rest share the remainder equally.
    Dominant { weight: f64 },
    /// Normalized independent uniform draws.
    Random,
    /// Row-major rows given explicitly.
    Explicit(Vec<f64>),
}

/// How the group-pair rating distributions are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockSpec {
    /// Every group pair puts `peak` on one uniformly chosen label and spreads
    /// the rest evenly; `peak = 1` gives point masses.
    NearDeterministic { peak: f64 },
    /// Normalized independent uniform draws.
    Random,
    /// In [`ModelParams`] p layout.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub user_groups: usize,
    pub item_groups: usize,
    pub scale: RatingScale,
    pub theta: MembershipSpec,
    pub eta: MembershipSpec,
    pub p: BlockSpec,
    pub ratings_per_user: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Pure memberships and near-deterministic blocks.
    pub fn planted(n_users: usize, n_items: usize, groups: usize, ratings_per_user: usize, seed: u64) -> Self {
        Self {
            n_users,
            n_items,
            user_groups: groups,
            item_groups: groups,
            scale: RatingScale::integer(1, 5).expect("valid scale"),
            theta: MembershipSpec::Pure,
            eta: MembershipSpec::Pure,
            p: BlockSpec::NearDeterministic { peak: 0.98 },
            ratings_per_user,
            seed,
        }
    }
}

fn memberships(rng: &mut ChaCha8Rng, spec: &MembershipSpec, n: usize, groups: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n * groups];
    match spec {
        MembershipSpec::Pure => {
            for row in out.chunks_exact_mut(groups) {
                row[rng.gen_range(0..groups)] = 1.0;
            }
        }
        MembershipSpec::Dominant { weight } => {
            if !(0.0..=1.0).contains(weight) {
                return Err(Error::InvalidConfig(format!("dominant weight {weight} outside [0, 1]")));
            }
            let rest = if groups > 1 { (1.0 - weight) / (groups - 1) as f64 } else { 0.0 };
            for row in out.chunks_exact_mut(groups) {
                row.fill(rest);
                row[rng.gen_range(0..groups)] = if groups > 1 { *weight } else { 1.0 };
            }
        }
        MembershipSpec::Random => {
            for row in out.chunks_exact_mut(groups) {
                row.iter_mut().for_each(|x| *x = rng.gen::<f64>() + f64::MIN_POSITIVE);
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= sum);
            }
        }
        MembershipSpec::Explicit(values) => {
            if values.len() != n * groups {
                return Err(Error::DimensionMismatch {
                    expected: n * groups,
                    found: values.len(),
                });
            }
            out.copy_from_slice(values);
        }
    }
    Ok(out)
}

fn blocks(rng: &mut ChaCha8Rng, spec: &BlockSpec, k: usize, l: usize, s: usize) -> Result<Vec<f64>> {
    let mut params = ModelParams::zeros(k, l, s, 0, 0);
    match spec {
        BlockSpec::NearDeterministic { peak } => {
            if !(0.0..=1.0).contains(peak) {
                return Err(Error::InvalidConfig(format!("peak {peak} outside [0, 1]")));
            }
            let rest = (1.0 - peak) / (s - 1) as f64;
            for kk in 0..k {
                for ll in 0..l {
                    let top = rng.gen_range(0..s);
                    for r in 0..s {
                        params.set_p(kk, ll, r, if r == top { *peak } else { rest });
                    }
                }
            }
        }
        BlockSpec::Random => {
            for kk in 0..k {
                for ll in 0..l {
                    let cell: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + f64::MIN_POSITIVE).collect();
                    let sum: f64 = cell.iter().sum();
                    for (r, v) in cell.iter().enumerate() {
                        params.set_p(kk, ll, r, v / sum);
                    }
                }
            }
        }
        BlockSpec::Explicit(values) => {
            if values.len() != k * l * s {
                return Err(Error::DimensionMismatch {
                    expected: k * l * s,
                    found: values.len(),
                });
            }
            params.p_mut().copy_from_slice(values);
        }
    }
    Ok(params.p().to_vec())
}

/// Generates a planted dataset and its ground-truth parameters.
///
/// Every user rates `ratings_per_user` distinct items chosen uniformly. Each
/// rating is drawn by picking a user group from θ_u, an item group from η_i and
/// a label from p_kl. Ids are the decimal node numbers; items that received no
/// rating are absent from the dataset, and the returned parameters are
/// re-indexed to match the dataset's dense indices.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, ModelParams)> {
    if spec.ratings_per_user > spec.n_items {
        return Err(Error::InvalidConfig(format!(
            "{} ratings per user but only {} items",
            spec.ratings_per_user, spec.n_items
        )));
    }
    if spec.n_users == 0 || spec.ratings_per_user == 0 {
        return Err(Error::EmptyDataset);
    }
    let (k, l, s) = (spec.user_groups, spec.item_groups, spec.scale.len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let theta = memberships(&mut rng, &spec.theta, spec.n_users, k)?;
    let eta = memberships(&mut rng, &spec.eta, spec.n_items, l)?;
    let p = blocks(&mut rng, &spec.p, k, l, s)?;
    let planted = ModelParams::new(k, l, s, theta, eta, p)?;
    if let Some(v) = validate_params(&planted, 1e-9).first() {
        return Err(Error::InvalidConfig(format!("planted parameters invalid: {v}")));
    }

    let theta_dists = planted
        .theta_rows()
        .map(WeightedIndex::new)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let eta_dists = planted
        .eta_rows()
        .map(WeightedIndex::new)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut cell_dists = Vec::with_capacity(k * l);
    for kk in 0..k {
        for ll in 0..l {
            cell_dists.push(
                WeightedIndex::new(planted.p_cell(kk, ll)).map_err(|e| Error::InvalidConfig(e.to_string()))?,
            );
        }
    }

    // Dense ids in order of first appearance.
    let mut item_slot = vec![u32::MAX; spec.n_items];
    let mut item_order = Vec::new();
    let mut links = Vec::with_capacity(spec.n_users * spec.ratings_per_user);
    for u in 0..spec.n_users {
        let mut items = sample(&mut rng, spec.n_items, spec.ratings_per_user).into_vec();
        items.sort_unstable();
        for i in items {
            let kk = theta_dists[u].sample(&mut rng);
            let ll = eta_dists[i].sample(&mut rng);
            let r = cell_dists[kk * l + ll].sample(&mut rng);
            if item_slot[i] == u32::MAX {
                item_slot[i] = item_order.len() as u32;
                item_order.push(i);
            }
            links.push(Link {
                user: u as u32,
                item: item_slot[i],
                rating: r as u16,
            });
        }
    }

    let user_ids = (0..spec.n_users).map(|u| u.to_string()).collect();
    let item_ids = item_order.iter().map(|i| i.to_string()).collect();
    let mut eta_dense = Vec::with_capacity(item_order.len() * l);
    for &i in &item_order {
        eta_dense.extend_from_slice(planted.eta_row(i));
    }
    let truth = ModelParams::new(k, l, s, planted.theta().to_vec(), eta_dense, planted.p().to_vec())?;
    let dataset = Dataset::from_links(spec.scale.clone(), user_ids, item_ids, links)?;
    Ok((dataset, truth))
}
