//! Delimited-text reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::SimilarityReport;
use crate::error::Result;
use crate::eval::EvalReport;

pub const REPORT_COLUMNS: [&str; 7] = [
    "method",
    "fold",
    "accuracy",
    "mae",
    "cold_count",
    "cold_accuracy",
    "cold_mae",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFormat {
    pub delimiter: char,
}

impl Default for ReportFormat {
    fn default() -> Self {
        Self { delimiter: ',' }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// One row per (method, fold) in the fixed column order of [`REPORT_COLUMNS`].
pub fn render_report(report: &EvalReport, format: &ReportFormat) -> String {
    let d = format.delimiter.to_string();
    let mut out = REPORT_COLUMNS.join(&d);
    out.push('\n');
    for method in &report.methods {
        for f in &method.folds {
            let row = [
                method.method.clone(),
                f.fold.to_string(),
                f.accuracy.to_string(),
                f.mae.to_string(),
                f.cold_count.to_string(),
                opt(f.cold_accuracy),
                opt(f.cold_mae),
            ];
            out.push_str(&row.join(&d));
            out.push('\n');
        }
    }
    out
}

pub fn write_report(report: &EvalReport, path: &Path, format: &ReportFormat) -> Result<()> {
    fs::write(path, render_report(report, format))?;
    Ok(())
}

/// Human-readable fold averages with standard errors.
pub fn summary_text(report: &EvalReport) -> String {
    let mut out = String::new();
    for m in &report.methods {
        let (acc, mae) = (m.accuracy(), m.mae());
        let _ = writeln!(
            out,
            "{:<10} accuracy {:.4} ± {:.4}   MAE {:.4} ± {:.4}   cold {:.3}% of {} test ratings",
            m.method,
            acc.mean,
            acc.sem,
            mae.mean,
            mae.sem,
            100.0 * m.cold_fraction(),
            m.n_test()
        );
        for e in crate::ensemble::Estimator::ALL {
            if let (Some(a), Some(b)) = (m.estimator_accuracy(e), m.estimator_mae(e)) {
                let _ = writeln!(
                    out,
                    "           {:<6} estimator: accuracy {:.4} ± {:.4}   MAE {:.4} ± {:.4}",
                    e.name(),
                    a.mean,
                    a.sem,
                    b.mean,
                    b.sem
                );
            }
        }
    }
    out
}

/// Columns: kind, pairing, age_bin, mean, sem, count, rho, p_value.
pub fn render_similarity_report(report: &SimilarityReport, format: &ReportFormat) -> String {
    let d = format.delimiter.to_string();
    let mut out = ["kind", "pairing", "age_bin", "mean", "sem", "count", "rho", "p_value"].join(&d);
    out.push('\n');
    for (kind, groups) in [("gender", &report.gender_pairs), ("age", &report.age_groups)] {
        for g in groups {
            let row = [
                kind.to_string(),
                g.pairing.clone(),
                g.age_bin.map_or_else(|| "NA".into(), |b| b.to_string()),
                g.mean.to_string(),
                g.sem.to_string(),
                g.count.to_string(),
                "NA".into(),
                "NA".into(),
            ];
            out.push_str(&row.join(&d));
            out.push('\n');
        }
    }
    for c in &report.correlations {
        let row = [
            "spearman".to_string(),
            c.pairing.clone(),
            "NA".into(),
            "NA".into(),
            "NA".into(),
            c.n.to_string(),
            c.rho.to_string(),
            c.p_value.to_string(),
        ];
        out.push_str(&row.join(&d));
        out.push('\n');
    }
    out
}

pub fn write_similarity_report(report: &SimilarityReport, path: &Path, format: &ReportFormat) -> Result<()> {
    fs::write(path, render_similarity_report(report, format))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{FoldMetrics, MethodReport};

    fn fold(fold: usize) -> FoldMetrics {
        FoldMetrics {
            fold,
            n_test: 10,
            accuracy: 0.5,
            mae: 0.75,
            cold_count: usize::from(fold == 0),
            cold_accuracy: (fold == 0).then_some(1.0),
            cold_mae: (fold == 0).then_some(0.0),
            estimators: Vec::new(),
            max_normalization_error: 0.0,
        }
    }

    fn report() -> EvalReport {
        EvalReport {
            methods: ["mmsbm", "naive"]
                .iter()
                .map(|m| MethodReport {
                    method: m.to_string(),
                    folds: (0..5).map(fold).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn shape_and_header() {
        let text = render_report(&report(), &ReportFormat::default());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], "method,fold,accuracy,mae,cold_count,cold_accuracy,cold_mae");
        assert_eq!(lines[1], "mmsbm,0,0.5,0.75,1,1,0");
        assert_eq!(lines[2], "mmsbm,1,0.5,0.75,0,NA,NA");
    }

    #[test]
    fn empty_report_is_header_only() {
        let text = render_report(&EvalReport::default(), &ReportFormat { delimiter: '\t' });
        assert_eq!(text, "method\tfold\taccuracy\tmae\tcold_count\tcold_accuracy\tcold_mae\n");
    }

    #[test]
    fn rewriting_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_report(&report(), &a, &ReportFormat::default()).unwrap();
        write_report(&report(), &b, &ReportFormat::default()).unwrap();
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }

    #[test]
    fn unwritable_path() {
        let path = Path::new("/nonexistent-dir/report.csv");
        assert!(write_report(&report(), path, &ReportFormat::default()).is_err());
    }
}
