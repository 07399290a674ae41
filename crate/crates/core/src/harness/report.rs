//! Prediction reports: a fixed-width table for people and a line-delimited
//! JSON file that reads back losslessly. Accuracies are stored in percent.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::hex_digest;
use crate::error::{Error, Result};
use crate::stats::{mae, rmse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    /// Ground-truth accuracy in percent, when the set is labeled.
    pub truth: Option<f64>,
    /// One prediction per method, in the report's method order, in percent.
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub rho: f64,
    /// `(fd, accuracy in percent)` per meta-set record.
    pub points: Vec<(f64, f64)>,
}

/// Deterministic provenance; wall-clock time is logged, not stored, so
/// reruns produce identical files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub title: String,
    pub rng_seed: u64,
    pub config_hash: String,
    pub classifier_hash: String,
    pub manifest_hash: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub meta: ReportMeta,
    pub methods: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub summary: Vec<MethodSummary>,
    /// Set when at least one row has no ground truth, so no errors were computed.
    pub errors_omitted: bool,
    pub correlation: Option<CorrelationSummary>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header {
        #[serde(flatten)]
        meta: ReportMeta,
        methods: Vec<String>,
        errors_omitted: bool,
    },
    Row(ReportRow),
    Summary(MethodSummary),
    Correlation(CorrelationSummary),
}

fn to_percent(v: f64) -> f64 {
    100.0 * v
}

impl PredictionReport {
    /// Build a report from predictions in accuracy units. Errors are computed
    /// only when every row has a ground truth.
    pub fn new(meta: ReportMeta, methods: Vec<String>, rows: Vec<(String, Option<f64>, Vec<f64>)>) -> Result<Self> {
        let mut out_rows = Vec::with_capacity(rows.len());
        for (name, truth, preds) in rows {
            if preds.len() != methods.len() {
                return Err(Error::Shape(format!(
                    "row {name} has {} predictions for {} methods",
                    preds.len(),
                    methods.len()
                )));
            }
            let in_range = |v: &f64| (0.0..=1.0).contains(v);
            if !preds.iter().all(in_range) || !truth.iter().all(in_range) {
                return Err(Error::Validation(format!("row {name} has an accuracy outside [0, 1]")));
            }
            out_rows.push(ReportRow {
                name,
                truth: truth.map(to_percent),
                predictions: preds.into_iter().map(to_percent).collect(),
            });
        }
        let mut report = Self {
            meta,
            methods,
            rows: out_rows,
            summary: Vec::new(),
            errors_omitted: false,
            correlation: None,
        };
        report.summary = report.recompute_summary()?;
        report.errors_omitted = report.rows.iter().any(|r| r.truth.is_none());
        Ok(report)
    }

    pub fn with_correlation(mut self, rho: f64, points: &[(f64, f64)]) -> Self {
        self.correlation = Some(CorrelationSummary {
            rho,
            points: points.iter().map(|&(f, a)| (f, to_percent(a))).collect(),
        });
        self
    }

    /// RMSE and MAE per method from the report's own rows.
    pub fn recompute_summary(&self) -> Result<Vec<MethodSummary>> {
        let truths: Option<Vec<f64>> = self.rows.iter().map(|r| r.truth).collect();
        self.methods
            .iter()
            .enumerate()
            .map(|(m, name)| {
                let (rmse_v, mae_v) = match (&truths, self.rows.is_empty()) {
                    (Some(t), false) => {
                        let preds: Vec<f64> = self.rows.iter().map(|r| r.predictions[m]).collect();
                        (Some(rmse(&preds, t)?), Some(mae(&preds, t)?))
                    }
                    _ => (None, None),
                };
                Ok(MethodSummary {
                    method: name.clone(),
                    rmse: rmse_v,
                    mae: mae_v,
                })
            })
            .collect()
    }

    pub fn method_index(&self, method: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == method)
    }

    /// RMSE of `method` in percent.
    pub fn rmse_of(&self, method: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.method == method).and_then(|s| s.rmse)
    }

    /// Absolute errors of `method` per row, in percent.
    pub fn abs_errors(&self, method: &str) -> Option<Vec<f64>> {
        let m = self.method_index(method)?;
        self.rows.iter().map(|r| r.truth.map(|t| (r.predictions[m] - t).abs())).collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut lines = vec![Line::Header {
            meta: self.meta.clone(),
            methods: self.methods.clone(),
            errors_omitted: self.errors_omitted,
        }];
        lines.extend(self.rows.iter().cloned().map(Line::Row));
        lines.extend(self.summary.iter().cloned().map(Line::Summary));
        lines.extend(self.correlation.clone().map(Line::Correlation));
        let mut out = String::new();
        for l in &lines {
            out.push_str(&serde_json::to_string(l).map_err(|e| Error::Format(e.to_string()))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut report: Option<Self> = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: Line =
                serde_json::from_str(line).map_err(|e| Error::Format(format!("report line {}: {e}", i + 1)))?;
            match (parsed, report.as_mut()) {
                (
                    Line::Header {
                        meta,
                        methods,
                        errors_omitted,
                    },
                    None,
                ) => {
                    report = Some(Self {
                        meta,
                        methods,
                        rows: Vec::new(),
                        summary: Vec::new(),
                        errors_omitted,
                        correlation: None,
                    })
                }
                (Line::Header { .. }, Some(_)) => return Err(Error::Format("repeated report header".into())),
                (_, None) => return Err(Error::Format("report must start with a header".into())),
                (Line::Row(row), Some(r)) => {
                    if row.predictions.len() != r.methods.len() {
                        return Err(Error::Format(format!("row {} has the wrong width", row.name)));
                    }
                    r.rows.push(row)
                }
                (Line::Summary(s), Some(r)) => r.summary.push(s),
                (Line::Correlation(c), Some(r)) => r.correlation = Some(c),
            }
        }
        report.ok_or_else(|| Error::Format("empty report".into()))
    }

    pub fn to_table(&self) -> String {
        let name_w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(8);
        let col_w = self.methods.iter().map(|m| m.len()).max().unwrap_or(0).max(8);
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.meta.title);
        let _ = write!(out, "{:<name_w$}  {:>8}", "set", "truth");
        for m in &self.methods {
            let _ = write!(out, "  {m:>col_w$}");
        }
        out.push('\n');
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        for r in &self.rows {
            let _ = write!(out, "{:<name_w$}  {:>8}", r.name, fmt(r.truth));
            for p in &r.predictions {
                let _ = write!(out, "  {p:>col_w$.2}");
            }
            out.push('\n');
        }
        for (label, pick) in [("RMSE", 0), ("MAE", 1)] {
            let _ = write!(out, "{:<name_w$}  {:>8}", label, "");
            for s in &self.summary {
                let v = if pick == 0 { s.rmse } else { s.mae };
                let _ = write!(out, "  {:>col_w$}", fmt(v));
            }
            out.push('\n');
        }
        if self.errors_omitted {
            out.push_str("errors omitted: some sets have no labels\n");
        }
        if let Some(c) = &self.correlation {
            let _ = writeln!(out, "spearman rho (fd vs accuracy): {:.4} over {} sets", c.rho, c.points.len());
        }
        out
    }

    /// Write `<stem>.jsonl` and `<stem>.txt` into `dir`; returns the hash of the
    /// JSONL file.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<String> {
        std::fs::create_dir_all(dir)?;
        let jsonl = self.to_jsonl()?;
        std::fs::write(dir.join(format!("{stem}.jsonl")), &jsonl)?;
        std::fs::write(dir.join(format!("{stem}.txt")), self.to_table())?;
        Ok(hex_digest(jsonl.as_bytes()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

/// Two whitespace-separated columns, `fd accuracy`, one point per line.
pub fn scatter_text(points: &[(f64, f64)]) -> String {
    let mut out = String::from("# fd accuracy\n");
    for (f, a) in points {
        let _ = writeln!(out, "{f:.6} {a:.6}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PredictionReport {
        PredictionReport::new(
            ReportMeta {
                title: "t".into(),
                ..ReportMeta::default()
            },
            vec!["linear".into(), "neural".into()],
            vec![
                ("a".into(), Some(0.2752), vec![0.30, 0.27]),
                ("b".into(), Some(0.6411), vec![0.5, 0.6408]),
                ("c".into(), Some(0.1), vec![0.1 / 3.0, 0.123456789]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn jsonl_round_trip_is_lossless() {
        let r = sample().with_correlation(-0.8, &[(1.5, 0.3), (0.1, 0.9)]);
        let back = PredictionReport::from_jsonl(&r.to_jsonl().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_jsonl().unwrap(), r.to_jsonl().unwrap());
    }

    #[test]
    fn summary_matches_rows() {
        let r = sample();
        assert_eq!(r.recompute_summary().unwrap(), r.summary);
        let expected = rmse(&[30.0, 50.0, 10.0 / 3.0], &[27.52, 64.11, 10.0]).unwrap();
        assert!((r.rmse_of("linear").unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn unlabeled_rows_omit_errors() {
        let r = PredictionReport::new(
            ReportMeta::default(),
            vec!["neural".into()],
            vec![("a".into(), None, vec![0.5]), ("b".into(), Some(0.4), vec![0.5])],
        )
        .unwrap();
        assert!(r.errors_omitted);
        assert_eq!(r.rmse_of("neural"), None);
        assert!(r.to_table().contains("errors omitted"));
    }

    #[test]
    fn rejects_bad_rows() {
        let bad_width = PredictionReport::new(ReportMeta::default(), vec!["m".into()], vec![("a".into(), None, vec![])]);
        assert!(matches!(bad_width, Err(Error::Shape(_))));
        let out_of_range =
            PredictionReport::new(ReportMeta::default(), vec!["m".into()], vec![("a".into(), Some(1.2), vec![0.5])]);
        assert!(matches!(out_of_range, Err(Error::Validation(_))));
        assert!(PredictionReport::from_jsonl("{\"kind\":\"row\",\"name\":\"a\",\"truth\":null,\"predictions\":[]}").is_err());
    }
}
