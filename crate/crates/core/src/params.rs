//! Model parameters: user memberships, item memberships and the per-group-pair
//! rating distributions.

use std::fmt;

use crate::error::{Error, Result};

/// Parameters of a fitted (or planted) block model.
///
/// Storage is flat and row-major:
/// * `theta[u * K + k]`
/// * `eta[i * L + l]`
/// * `p[(r * K + k) * L + l]`, rating-major so that all group pairs for one
///   rating label are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    user_groups: usize,
    item_groups: usize,
    n_labels: usize,
    theta: Vec<f64>,
    eta: Vec<f64>,
    p: Vec<f64>,
}

impl ModelParams {
    pub fn new(
        user_groups: usize,
        item_groups: usize,
        n_labels: usize,
        theta: Vec<f64>,
        eta: Vec<f64>,
        p: Vec<f64>,
    ) -> Result<Self> {
        if user_groups == 0 || item_groups == 0 || n_labels == 0 {
            return Err(Error::InvalidConfig("group and label counts must be positive".into()));
        }
        if theta.len() % user_groups != 0 {
            return Err(Error::DimensionMismatch {
                expected: user_groups,
                found: theta.len(),
            });
        }
        if eta.len() % item_groups != 0 {
            return Err(Error::DimensionMismatch {
                expected: item_groups,
                found: eta.len(),
            });
        }
        let cells = user_groups * item_groups * n_labels;
        if p.len() != cells {
            return Err(Error::DimensionMismatch {
                expected: cells,
                found: p.len(),
            });
        }
        Ok(Self {
            user_groups,
            item_groups,
            n_labels,
            theta,
            eta,
            p,
        })
    }

    pub fn zeros(user_groups: usize, item_groups: usize, n_labels: usize, n_users: usize, n_items: usize) -> Self {
        Self {
            user_groups,
            item_groups,
            n_labels,
            theta: vec![0.0; n_users * user_groups],
            eta: vec![0.0; n_items * item_groups],
            p: vec![0.0; user_groups * item_groups * n_labels],
        }
    }

    pub fn user_groups(&self) -> usize {
        self.user_groups
    }

    pub fn item_groups(&self) -> usize {
        self.item_groups
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn n_users(&self) -> usize {
        self.theta.len() / self.user_groups
    }

    pub fn n_items(&self) -> usize {
        self.eta.len() / self.item_groups
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn eta_mut(&mut self) -> &mut [f64] {
        &mut self.eta
    }

    pub fn p_mut(&mut self) -> &mut [f64] {
        &mut self.p
    }

    pub fn theta_row(&self, user: usize) -> &[f64] {
        let k = self.user_groups;
        &self.theta[user * k..(user + 1) * k]
    }

    pub fn eta_row(&self, item: usize) -> &[f64] {
        let l = self.item_groups;
        &self.eta[item * l..(item + 1) * l]
    }

    /// All K×L group-pair probabilities of one rating label.
    pub fn p_slice(&self, rating: usize) -> &[f64] {
        let kl = self.user_groups * self.item_groups;
        &self.p[rating * kl..(rating + 1) * kl]
    }

    pub fn p_at(&self, k: usize, l: usize, rating: usize) -> f64 {
        self.p[(rating * self.user_groups + k) * self.item_groups + l]
    }

    pub fn set_p(&mut self, k: usize, l: usize, rating: usize, value: f64) {
        self.p[(rating * self.user_groups + k) * self.item_groups + l] = value;
    }

    /// Rating distribution of the group pair (k, l).
    pub fn p_cell(&self, k: usize, l: usize) -> Vec<f64> {
        (0..self.n_labels).map(|r| self.p_at(k, l, r)).collect()
    }

    pub fn theta_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.theta.chunks_exact(self.user_groups)
    }

    pub fn eta_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.eta.chunks_exact(self.item_groups)
    }
}

/// Which parameter block a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Theta,
    Eta,
    P,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Block::Theta => "theta",
            Block::Eta => "eta",
            Block::P => "p",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A row (theta, eta) or a group-pair distribution (p, row = k * L + l)
    /// does not sum to one.
    RowSum { block: Block, row: usize, sum: f64 },
    OutOfRange { block: Block, index: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { block, row, sum } => write!(f, "{block} row {row}: row sum {sum}"),
            Violation::OutOfRange { block, index, value } => {
                write!(f, "{block} entry {index}: {value} outside [0, 1]")
            }
        }
    }
}

/// Checks normalization and range of every parameter block.
pub fn validate_params(params: &ModelParams, tol: f64) -> Vec<Violation> {
    let mut violations = Vec::new();
    let check_range = |block: Block, values: &[f64], out: &mut Vec<Violation>| {
        for (index, &value) in values.iter().enumerate() {
            if !(value >= -tol && value <= 1.0 + tol) {
                out.push(Violation::OutOfRange { block, index, value });
            }
        }
    };
    check_range(Block::Theta, &params.theta, &mut violations);
    check_range(Block::Eta, &params.eta, &mut violations);
    check_range(Block::P, &params.p, &mut violations);

    for (row, values) in params.theta_rows().enumerate() {
        let sum: f64 = values.iter().sum();
        if !((sum - 1.0).abs() <= tol) {
            violations.push(Violation::RowSum { block: Block::Theta, row, sum });
        }
    }
    for (row, values) in params.eta_rows().enumerate() {
        let sum: f64 = values.iter().sum();
        if !((sum - 1.0).abs() <= tol) {
            violations.push(Violation::RowSum { block: Block::Eta, row, sum });
        }
    }
    for k in 0..params.user_groups {
        for l in 0..params.item_groups {
            let sum: f64 = (0..params.n_labels).map(|r| params.p_at(k, l, r)).sum();
            if !((sum - 1.0).abs() <= tol) {
                violations.push(Violation::RowSum {
                    block: Block::P,
                    row: k * params.item_groups + l,
                    sum,
                });
            }
        }
    }
    violations
}
