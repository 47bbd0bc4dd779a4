//! Ordered rating alphabets.
//!
//! Ratings are symbols: the model only ever sees a label's index. The numeric
//! value attached to each label is used for MAE, the mean estimator and the
//! baselines that regress on rating values.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RatingScale {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl RatingScale {
    pub fn new<S: Into<String>>(labels: Vec<S>, values: Vec<f64>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != values.len() {
            return Err(Error::InvalidScale(format!(
                "{} labels but {} values",
                labels.len(),
                values.len()
            )));
        }
        if labels.len() < 2 {
            return Err(Error::InvalidScale(
                "a scale needs at least two labels".into(),
            ));
        }
        for (idx, label) in labels.iter().enumerate() {
            if labels[..idx].contains(label) {
                return Err(Error::InvalidScale(format!("duplicate label {label:?}")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidScale("non-finite label value".into()));
        }
        if let Some(w) = values.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidScale(format!(
                "values must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { labels, values })
    }

    /// A scale whose labels are the textual form of its values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let labels = values.iter().map(|v| format_value(*v)).collect::<Vec<_>>();
        Self::new(labels, values.to_vec())
    }

    /// Integer scale `lo..=hi`.
    pub fn integer(lo: i64, hi: i64) -> Result<Self> {
        let values = (lo..=hi).map(|v| v as f64).collect::<Vec<_>>();
        Self::from_values(&values)
    }

    /// Parses a compact scale description:
    ///
    /// * `1..5` integer range,
    /// * `0.5..5:0.5` range with a step,
    /// * `1,2,3` explicit list, or `lo=1,mid=2,hi=3` for named labels.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if let Some((lo, rest)) = spec.split_once("..") {
            let (hi, step) = match rest.split_once(':') {
                Some((hi, step)) => (hi, parse_number(step)?),
                None => (rest, 1.0),
            };
            let lo = parse_number(lo)?;
            let hi = parse_number(hi)?;
            if step <= 0.0 || hi < lo {
                return Err(Error::InvalidScale(format!("bad range {spec:?}")));
            }
            let count = ((hi - lo) / step).round() as usize + 1;
            let values = (0..count)
                .map(|n| lo + step * n as f64)
                .collect::<Vec<_>>();
            return Self::from_values(&values);
        }
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for part in spec.split(',') {
            let part = part.trim();
            match part.split_once('=') {
                Some((label, value)) => {
                    labels.push(label.trim().to_string());
                    values.push(parse_number(value)?);
                }
                None => {
                    let value = parse_number(part)?;
                    labels.push(format_value(value));
                    values.push(value);
                }
            }
        }
        Self::new(labels, values)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn min_value(&self) -> f64 {
        self.values[0]
    }

    pub fn max_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Looks a token up by label, falling back to numeric equality so that
    /// `"4"` and `"4.0"` resolve to the same label.
    pub fn index_of(&self, token: &str) -> Option<usize> {
        let token = token.trim();
        if let Some(idx) = self.labels.iter().position(|l| l == token) {
            return Some(idx);
        }
        let value: f64 = token.parse().ok()?;
        self.values.iter().position(|v| *v == value)
    }

    /// Index of the scale value closest to `x`; exact midpoints go to the lower value.
    pub fn nearest_index(&self, x: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (idx, v) in self.values.iter().enumerate() {
            let dist = (x - v).abs();
            if dist < best_dist {
                best = idx;
                best_dist = dist;
            }
        }
        best
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min_value(), self.max_value())
    }
}

impl fmt::Display for RatingScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts = self
            .labels
            .iter()
            .zip(&self.values)
            .map(|(l, v)| {
                if *l == format_value(*v) {
                    l.clone()
                } else {
                    format!("{l}={}", format_value(*v))
                }
            })
            .collect::<Vec<_>>();
        f.write_str(&parts.join(","))
    }
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidScale(format!("{s:?} is not a number")))
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
