//! Similarity of inferred user profiles across demographic groups.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::metadata::UserMetadata;
use crate::params::ModelParams;

/// Cosine of two membership vectors.
pub fn profile_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgeBinning {
    pub start: i64,
    pub width: i64,
}

impl Default for AgeBinning {
    fn default() -> Self {
        Self { start: 10, width: 10 }
    }
}

impl AgeBinning {
    /// Lower edge of the bin containing `age`; bins extend below `start` too.
    pub fn bin(&self, age: u32) -> i64 {
        self.start + (age as i64 - self.start).div_euclid(self.width) * self.width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStat {
    /// Gender pairing such as `F-M` (genders in sorted order).
    pub pairing: String,
    /// Lower edge of the shared age bin, for age groups.
    pub age_bin: Option<i64>,
    pub mean: f64,
    pub sem: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankCorrelation {
    pub pairing: String,
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimilarityReport {
    pub gender_pairs: Vec<GroupStat>,
    pub age_groups: Vec<GroupStat>,
    /// Spearman correlation between pair similarity and mean pair age over
    /// pairs sharing an age bin, per gender pairing.
    pub correlations: Vec<RankCorrelation>,
    pub warnings: Vec<String>,
}

impl SimilarityReport {
    pub fn gender_pair(&self, pairing: &str) -> Option<&GroupStat> {
        self.gender_pairs.iter().find(|g| g.pairing == pairing)
    }

    pub fn correlation(&self, pairing: &str) -> Option<&RankCorrelation> {
        self.correlations.iter().find(|c| c.pairing == pairing)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn stat(&self, pairing: String, age_bin: Option<i64>) -> GroupStat {
        let n = self.n as f64;
        let mean = self.sum / n;
        let sem = if self.n > 1 {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        GroupStat {
            pairing,
            age_bin,
            mean,
            sem,
            count: self.n,
        }
    }
}

#[derive(Default)]
struct RunAccumulator {
    by_pairing: BTreeMap<String, Moments>,
    by_age: BTreeMap<(String, i64), Moments>,
    /// (mean pair age, similarity) for same-bin pairs
    age_points: BTreeMap<String, Vec<(f64, f64)>>,
}

fn pairing(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}-{b}")
    } else {
        format!("{b}-{a}")
    }
}

/// Averages profile similarity over all user pairs within each gender pairing
/// and within each (gender pairing, age bin). With several runs, every run
/// contributes its own pairs and the statistics are pooled.
///
/// `user_ids[u]` is the external id of row `u` of every run's θ.
pub fn group_similarity(
    runs: &[&ModelParams],
    user_ids: &[String],
    metadata: &UserMetadata,
    binning: AgeBinning,
) -> Result<SimilarityReport> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("model runs"));
    }
    if binning.width <= 0 {
        return Err(Error::InvalidConfig("age bin width must be positive".into()));
    }
    let mut warnings = Vec::new();
    let mut users = Vec::new();
    for (row, id) in user_ids.iter().enumerate() {
        match metadata.get(id) {
            Some(info) => users.push((row, info)),
            None => warnings.push(format!("user {id:?} has no metadata")),
        }
    }
    for id in metadata.users.keys() {
        if !user_ids.contains(id) {
            warnings.push(format!("metadata for user {id:?} who is not in the model"));
        }
    }

    let per_run = runs
        .par_iter()
        .map(|params| {
            let mut acc = RunAccumulator::default();
            for (a, &(ua, info_a)) in users.iter().enumerate() {
                for &(ub, info_b) in &users[a + 1..] {
                    let sim = profile_similarity(params.theta_row(ua), params.theta_row(ub))?;
                    let key = pairing(&info_a.gender, &info_b.gender);
                    acc.by_pairing.entry(key.clone()).or_default().push(sim);
                    let (bin_a, bin_b) = (binning.bin(info_a.age), binning.bin(info_b.age));
                    if bin_a == bin_b {
                        acc.by_age.entry((key.clone(), bin_a)).or_default().push(sim);
                        let age = 0.5 * (info_a.age as f64 + info_b.age as f64);
                        acc.age_points.entry(key).or_default().push((age, sim));
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut by_pairing: BTreeMap<String, Moments> = BTreeMap::new();
    let mut by_age: BTreeMap<(String, i64), Moments> = BTreeMap::new();
    let mut age_points: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for acc in per_run {
        for (k, m) in acc.by_pairing {
            by_pairing.entry(k).or_default().merge(&m);
        }
        for (k, m) in acc.by_age {
            by_age.entry(k).or_default().merge(&m);
        }
        for (k, pts) in acc.age_points {
            age_points.entry(k).or_default().extend(pts);
        }
    }

    // Genders and bins that cannot form a single pair.
    let mut gender_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, info) in &users {
        *gender_counts.entry(info.gender.as_str()).or_default() += 1;
    }
    for (gender, count) in &gender_counts {
        if *count < 2 {
            warnings.push(format!("{gender}-{gender}: fewer than 2 members, omitted"));
        }
    }

    let gender_pairs = by_pairing
        .iter()
        .map(|(k, m)| m.stat(k.clone(), None))
        .collect();
    let age_groups = by_age
        .iter()
        .map(|((k, bin), m)| m.stat(k.clone(), Some(*bin)))
        .collect();
    let correlations = age_points
        .iter()
        .filter(|(_, pts)| pts.len() >= 3)
        .map(|(k, pts)| {
            let (ages, sims): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
            let rho = spearman(&ages, &sims);
            RankCorrelation {
                pairing: k.clone(),
                rho,
                p_value: spearman_p_value(rho, pts.len()),
                n: pts.len(),
            }
        })
        .collect();
    Ok(SimilarityReport {
        gender_pairs,
        age_groups,
        correlations,
        warnings,
    })
}

/// Ranks starting at 1; tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's rank correlation (Pearson correlation of average ranks).
/// Zero when either variable is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    pearson(&average_ranks(x), &average_ranks(y))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Two-sided p-value of a rank correlation under the large-sample normal
/// approximation z = ρ√(n−1).
pub fn spearman_p_value(rho: f64, n: usize) -> f64 {
    if n < 2 {
        return 1.0;
    }
    let z = rho.abs() * ((n - 1) as f64).sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::metadata::UserInfo;

    fn meta(rows: &[(&str, u32, &str)]) -> UserMetadata {
        UserMetadata {
            users: rows
                .iter()
                .map(|(id, age, g)| {
                    (
                        id.to_string(),
                        UserInfo {
                            age: *age,
                            gender: g.to_string(),
                        },
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn cosine_cases() {
        let v = [0.3, 0.2, 0.5];
        assert_eq!(profile_similarity(&v, &v).unwrap(), 1.0);
        assert_eq!(profile_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = profile_similarity(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(profile_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn single_pair_group() {
        let params = ModelParams::new(2, 1, 2, vec![1.0, 0.0, 0.5, 0.5], vec![1.0], vec![0.5; 4]).unwrap();
        let ids = vec!["a".to_string(), "b".to_string()];
        let report = group_similarity(&[&params], &ids, &meta(&[("a", 25, "F"), ("b", 27, "F")]), AgeBinning::default())
            .unwrap();
        let ff = report.gender_pair("F-F").unwrap();
        assert_eq!(ff.count, 1);
        assert!((ff.mean - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(report.age_groups.len(), 1);
        assert_eq!(report.age_groups[0].age_bin, Some(20));
        assert!(report.warnings.iter().any(|w| w.contains("fewer than 2")) == false);
    }

    #[test]
    fn identical_profiles_have_unit_means() {
        let theta = [0.2, 0.8].repeat(4);
        let params = ModelParams::new(2, 1, 2, theta, vec![1.0], vec![0.5; 4]).unwrap();
        let ids: Vec<String> = (0..4).map(|u| u.to_string()).collect();
        let m = meta(&[("0", 20, "F"), ("1", 30, "M"), ("2", 31, "M"), ("3", 22, "F")]);
        let report = group_similarity(&[&params, &params], &ids, &m, AgeBinning::default()).unwrap();
        for g in report.gender_pairs.iter().chain(&report.age_groups) {
            assert_eq!(g.mean, 1.0, "{g:?}");
        }
        assert_eq!(report.gender_pair("F-M").unwrap().count, 8);
    }

    #[test]
    fn warnings_for_missing_metadata() {
        let params = ModelParams::new(1, 1, 2, vec![1.0; 3], vec![1.0], vec![0.5, 0.5]).unwrap();
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let m = meta(&[("a", 20, "F"), ("b", 30, "M"), ("z", 40, "M")]);
        let report = group_similarity(&[&params], &ids, &m, AgeBinning::default()).unwrap();
        assert!(report.warnings.iter().any(|w| w.contains("\"c\"")));
        assert!(report.warnings.iter().any(|w| w.contains("\"z\"")));
        assert!(report.warnings.iter().any(|w| w.starts_with("F-F")));
        assert!(report.gender_pair("F-F").is_none());
    }

    #[test]
    fn age_bins() {
        let b = AgeBinning::default();
        assert_eq!(b.bin(7), 0);
        assert_eq!(b.bin(10), 10);
        assert_eq!(b.bin(19), 10);
        assert_eq!(b.bin(73), 70);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [10.0, 20.0, 25.0, 100.0, 1000.0];
        assert!((spearman(&x, &y) - 1.0).abs() < 1e-15);
        let rev: Vec<f64> = y.iter().rev().copied().collect();
        assert!((spearman(&x, &rev) + 1.0).abs() < 1e-15);
        assert_eq!(spearman(&x, &[1.0; 5]), 0.0);
    }

    #[test]
    fn p_value_normal_approximation() {
        // z = 1.959964 → p ≈ 0.05
        let n = 101;
        let rho = 1.959963984540054 / 10.0;
        assert!((spearman_p_value(rho, n) - 0.05).abs() < 1e-9);
        assert_eq!(spearman_p_value(0.0, n), 1.0);
    }
}
