//! Sparse store of observed ratings.
//!
//! Users and items carry arbitrary external ids; internally they are densely
//! re-indexed in order of first appearance. Adjacency is kept in CSR form for
//! both sides of the bipartite graph.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scale::RatingScale;

/// One observed rating, in dense index space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Link {
    pub user: u32,
    pub item: u32,
    pub rating: u16,
}

/// A rating as it appears in an input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingTriple {
    pub user: String,
    pub item: String,
    pub label: String,
}

impl RatingTriple {
    pub fn new(user: impl Into<String>, item: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            user: user.into(),
            item: item.into(),
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Adjacency {
    offsets: Vec<usize>,
    /// (neighbor index, rating index)
    entries: Vec<(u32, u16)>,
}

impl Adjacency {
    fn build(n: usize, links: &[Link], key: impl Fn(&Link) -> (u32, u32)) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for link in links {
            offsets[key(link).0 as usize + 1] += 1;
        }
        for idx in 0..n {
            offsets[idx + 1] += offsets[idx];
        }
        let mut cursor = offsets.clone();
        let mut entries = vec![(0u32, 0u16); links.len()];
        for link in links {
            let (node, other) = key(link);
            let slot = &mut cursor[node as usize];
            entries[*slot] = (other, link.rating);
            *slot += 1;
        }
        Self { offsets, entries }
    }

    fn row(&self, node: usize) -> &[(u32, u16)] {
        &self.entries[self.offsets[node]..self.offsets[node + 1]]
    }

    fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    scale: Arc<RatingScale>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
    links: Vec<Link>,
    by_user: Adjacency,
    by_item: Adjacency,
}

impl Dataset {
    /// Builds a dataset from externally identified ratings.
    pub fn from_triples(triples: &[RatingTriple], scale: RatingScale) -> Result<Self> {
        if triples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut user_index = HashMap::new();
        let mut item_index = HashMap::new();
        let mut links = Vec::with_capacity(triples.len());
        for t in triples {
            let rating = scale
                .index_of(&t.label)
                .ok_or_else(|| Error::UnknownLabel(t.label.clone()))?;
            let user = intern(&t.user, &mut user_ids, &mut user_index);
            let item = intern(&t.item, &mut item_ids, &mut item_index);
            links.push(Link {
                user,
                item,
                rating: rating as u16,
            });
        }
        Self::assemble(Arc::new(scale), user_ids, item_ids, user_index, item_index, links)
    }

    /// Builds a dataset from dense links. Every id in the tables must be used by
    /// at least one link.
    pub fn from_links(
        scale: RatingScale,
        user_ids: Vec<String>,
        item_ids: Vec<String>,
        links: Vec<Link>,
    ) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let user_index = index_table(&user_ids, "user")?;
        let item_index = index_table(&item_ids, "item")?;
        for link in &links {
            if link.user as usize >= user_ids.len() {
                return Err(Error::DimensionMismatch {
                    expected: user_ids.len(),
                    found: link.user as usize,
                });
            }
            if link.item as usize >= item_ids.len() {
                return Err(Error::DimensionMismatch {
                    expected: item_ids.len(),
                    found: link.item as usize,
                });
            }
            if link.rating as usize >= scale.len() {
                return Err(Error::UnknownLabel(format!("rating index {}", link.rating)));
            }
        }
        let ds = Self::assemble(
            Arc::new(scale),
            user_ids,
            item_ids,
            user_index,
            item_index,
            links,
        )?;
        if (0..ds.n_users()).any(|u| ds.user_degree(u) == 0) {
            return Err(Error::InvalidConfig("user without ratings".into()));
        }
        if (0..ds.n_items()).any(|i| ds.item_degree(i) == 0) {
            return Err(Error::InvalidConfig("item without ratings".into()));
        }
        Ok(ds)
    }

    fn assemble(
        scale: Arc<RatingScale>,
        user_ids: Vec<String>,
        item_ids: Vec<String>,
        user_index: HashMap<String, u32>,
        item_index: HashMap<String, u32>,
        links: Vec<Link>,
    ) -> Result<Self> {
        let by_user = Adjacency::build(user_ids.len(), &links, |l| (l.user, l.item));
        let by_item = Adjacency::build(item_ids.len(), &links, |l| (l.item, l.user));
        for u in 0..user_ids.len() {
            let mut items = by_user.row(u).iter().map(|(i, _)| *i).collect::<Vec<_>>();
            items.sort_unstable();
            if let Some(w) = items.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicatePair {
                    user: user_ids[u].clone(),
                    item: item_ids[w[0] as usize].clone(),
                });
            }
        }
        Ok(Self {
            scale,
            user_ids,
            item_ids,
            user_index,
            item_index,
            links,
            by_user,
            by_item,
        })
    }

    /// Restriction to the given links, re-indexed so that only users and items
    /// that appear in them remain. External ids are preserved.
    pub fn subset(&self, link_indices: &[usize]) -> Result<Self> {
        if link_indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut user_index = HashMap::new();
        let mut item_index = HashMap::new();
        let mut links = Vec::with_capacity(link_indices.len());
        for &idx in link_indices {
            let link = self.links[idx];
            let user = intern(&self.user_ids[link.user as usize], &mut user_ids, &mut user_index);
            let item = intern(&self.item_ids[link.item as usize], &mut item_ids, &mut item_index);
            links.push(Link {
                user,
                item,
                rating: link.rating,
            });
        }
        Self::assemble(
            Arc::clone(&self.scale),
            user_ids,
            item_ids,
            user_index,
            item_index,
            links,
        )
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn n_ratings(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.user_ids[user]
    }

    pub fn item_id(&self, item: usize) -> &str {
        &self.item_ids[item]
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).map(|&u| u as usize)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).map(|&i| i as usize)
    }

    /// Items rated by `user`, as (item, rating index).
    pub fn user_ratings(&self, user: usize) -> &[(u32, u16)] {
        self.by_user.row(user)
    }

    /// Users who rated `item`, as (user, rating index).
    pub fn item_ratings(&self, item: usize) -> &[(u32, u16)] {
        self.by_item.row(item)
    }

    pub fn user_degree(&self, user: usize) -> usize {
        self.by_user.degree(user)
    }

    pub fn item_degree(&self, item: usize) -> usize {
        self.by_item.degree(item)
    }

    pub fn rating_value(&self, link: &Link) -> f64 {
        self.scale.value(link.rating as usize)
    }

    /// Mean numeric rating value over all observed links.
    pub fn global_mean(&self) -> f64 {
        self.links.iter().map(|l| self.rating_value(l)).sum::<f64>() / self.links.len() as f64
    }

    /// Number of observations of each rating label.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.scale.len()];
        for link in &self.links {
            counts[link.rating as usize] += 1;
        }
        counts
    }

    pub fn to_triples(&self) -> Vec<RatingTriple> {
        self.links
            .iter()
            .map(|l| {
                RatingTriple::new(
                    self.user_id(l.user as usize),
                    self.item_id(l.item as usize),
                    self.scale.label(l.rating as usize),
                )
            })
            .collect()
    }
}

fn intern(id: &str, ids: &mut Vec<String>, index: &mut HashMap<String, u32>) -> u32 {
    if let Some(&idx) = index.get(id) {
        return idx;
    }
    let idx = ids.len() as u32;
    ids.push(id.to_string());
    index.insert(id.to_string(), idx);
    idx
}

fn index_table(ids: &[String], what: &str) -> Result<HashMap<String, u32>> {
    let mut table = HashMap::with_capacity(ids.len());
    for (idx, id) in ids.iter().enumerate() {
        if table.insert(id.clone(), idx as u32).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate {what} id {id:?}")));
        }
    }
    Ok(table)
}
