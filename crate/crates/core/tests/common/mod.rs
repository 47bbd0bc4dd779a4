//! Dense reference implementations used as test oracles. Deliberately naive:
//! nested Vecs, explicit loops, per-link responsibilities stored in full.
#![allow(dead_code)]

use mmsbm::{Dataset, ModelParams, RatingScale, RatingTriple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Dense {
    pub theta: Vec<Vec<f64>>,        // [u][k]
    pub eta: Vec<Vec<f64>>,          // [i][l]
    pub p: Vec<Vec<Vec<f64>>>,       // [k][l][r]
}

impl Dense {
    pub fn from_params(params: &ModelParams) -> Self {
        let (k, l, s) = (params.user_groups(), params.item_groups(), params.n_labels());
        Dense {
            theta: (0..params.n_users()).map(|u| params.theta_row(u).to_vec()).collect(),
            eta: (0..params.n_items()).map(|i| params.eta_row(i).to_vec()).collect(),
            p: (0..k)
                .map(|a| (0..l).map(|b| (0..s).map(|r| params.p_at(a, b, r)).collect()).collect())
                .collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }

    pub fn l(&self) -> usize {
        self.p[0].len()
    }

    pub fn s(&self) -> usize {
        self.p[0][0].len()
    }

    pub fn prob(&self, u: usize, i: usize, r: usize) -> f64 {
        let mut total = 0.0;
        for k in 0..self.k() {
            for l in 0..self.l() {
                total += self.theta[u][k] * self.eta[i][l] * self.p[k][l][r];
            }
        }
        total
    }

    pub fn distribution(theta_u: &[f64], eta_i: &[f64], p: &[Vec<Vec<f64>>]) -> Vec<f64> {
        let s = p[0][0].len();
        (0..s)
            .map(|r| {
                let mut total = 0.0;
                for (k, t) in theta_u.iter().enumerate() {
                    for (l, e) in eta_i.iter().enumerate() {
                        total += t * e * p[k][l][r];
                    }
                }
                total
            })
            .collect()
    }

    pub fn omega(&self, u: usize, i: usize, r: usize) -> Vec<Vec<f64>> {
        let z = self.prob(u, i, r);
        (0..self.k())
            .map(|k| {
                (0..self.l())
                    .map(|l| self.theta[u][k] * self.eta[i][l] * self.p[k][l][r] / z)
                    .collect()
            })
            .collect()
    }

    pub fn log_likelihood(&self, data: &Dataset) -> f64 {
        data.links()
            .iter()
            .map(|x| self.prob(x.user as usize, x.item as usize, x.rating as usize).ln())
            .sum()
    }

    /// One EM update written term by term from the update formulas.
    pub fn step(&self, data: &Dataset, floor: f64) -> Dense {
        let (kk, ll, s) = (self.k(), self.l(), self.s());
        let omegas: Vec<Vec<Vec<f64>>> = data
            .links()
            .iter()
            .map(|x| self.omega(x.user as usize, x.item as usize, x.rating as usize))
            .collect();

        let theta = (0..data.n_users())
            .map(|u| {
                let d = data.links().iter().filter(|x| x.user as usize == u).count() as f64;
                (0..kk)
                    .map(|k| {
                        let mut acc = 0.0;
                        for (x, w) in data.links().iter().zip(&omegas) {
                            if x.user as usize == u {
                                acc += w[k].iter().sum::<f64>();
                            }
                        }
                        acc / d
                    })
                    .collect()
            })
            .collect();
        let eta = (0..data.n_items())
            .map(|i| {
                let d = data.links().iter().filter(|x| x.item as usize == i).count() as f64;
                (0..ll)
                    .map(|l| {
                        let mut acc = 0.0;
                        for (x, w) in data.links().iter().zip(&omegas) {
                            if x.item as usize == i {
                                acc += (0..kk).map(|k| w[k][l]).sum::<f64>();
                            }
                        }
                        acc / d
                    })
                    .collect()
            })
            .collect();
        let p = (0..kk)
            .map(|k| {
                (0..ll)
                    .map(|l| {
                        let mut num = vec![0.0; s];
                        for (x, w) in data.links().iter().zip(&omegas) {
                            num[x.rating as usize] += w[k][l];
                        }
                        let den: f64 = num.iter().sum();
                        let mut cell: Vec<f64> = if den > 0.0 {
                            num.iter().map(|v| v / den).collect()
                        } else {
                            vec![1.0 / s as f64; s]
                        };
                        if cell.iter().any(|&v| v < floor) {
                            cell.iter_mut().for_each(|v| *v = v.max(floor));
                            let z: f64 = cell.iter().sum();
                            cell.iter_mut().for_each(|v| *v /= z);
                        }
                        cell
                    })
                    .collect()
            })
            .collect();
        Dense { theta, eta, p }
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
    let z: f64 = v.iter().sum();
    v.into_iter().map(|x| x / z).collect()
}

/// A random small problem: dataset plus strictly positive parameters.
pub fn random_instance(seed: u64) -> (Dataset, ModelParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=8);
    let m = rng.gen_range(1..=8);
    let k = rng.gen_range(1..=3);
    let l = rng.gen_range(1..=3);
    let s = rng.gen_range(2..=5);
    let scale = RatingScale::integer(1, s as i64).unwrap();

    let mut triples = Vec::new();
    for u in 0..n {
        for i in 0..m {
            if rng.gen_bool(0.6) {
                triples.push(RatingTriple::new(u.to_string(), i.to_string(), rng.gen_range(1..=s).to_string()));
            }
        }
    }
    if triples.is_empty() {
        triples.push(RatingTriple::new("0", "0", "1"));
    }
    let data = Dataset::from_triples(&triples, scale).unwrap();

    let theta: Vec<f64> = (0..data.n_users()).flat_map(|_| simplex(&mut rng, k)).collect();
    let eta: Vec<f64> = (0..data.n_items()).flat_map(|_| simplex(&mut rng, l)).collect();
    let mut params = ModelParams::new(k, l, s, theta, eta, vec![0.0; k * l * s]).unwrap();
    for a in 0..k {
        for b in 0..l {
            for (r, v) in simplex(&mut rng, s).into_iter().enumerate() {
                params.set_p(a, b, r, v);
            }
        }
    }
    (data, params)
}

/// Largest absolute entrywise difference between a fitted step and the dense one.
pub fn max_diff(params: &ModelParams, dense: &Dense) -> f64 {
    let other = Dense::from_params(params);
    let mut worst: f64 = 0.0;
    for (a, b) in other.theta.iter().flatten().zip(dense.theta.iter().flatten()) {
        worst = worst.max((a - b).abs());
    }
    for (a, b) in other.eta.iter().flatten().zip(dense.eta.iter().flatten()) {
        worst = worst.max((a - b).abs());
    }
    for (a, b) in other.p.iter().flatten().flatten().zip(dense.p.iter().flatten().flatten()) {
        worst = worst.max((a - b).abs());
    }
    worst
}

pub fn toy_triples(rows: &[(&str, &str, &str)]) -> Vec<RatingTriple> {
    rows.iter().map(|(u, i, r)| RatingTriple::new(*u, *i, *r)).collect()
}
