//! Regressor error as a function of meta-set size and sample-set size.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::pipeline::{fit_predictors, Pipeline};
use super::{run_method_comparison, ReportMeta, LINEAR, NEURAL};
use crate::classifier::FeatureBundle;
use crate::error::{Error, Result};
use crate::metaset::MetaDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `meta_size` or `set_size`.
    pub axis: String,
    pub value: usize,
    /// RMSE over the test sets in accuracy units.
    pub linear_rmse: f64,
    pub neural_rmse: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn axis(&self, axis: &str) -> impl Iterator<Item = &AblationRow> {
        let axis = axis.to_string();
        self.rows.iter().filter(move |r| r.axis == axis)
    }

    /// Max minus min linear error across the meta-size grid.
    pub fn linear_spread(&self) -> Option<f64> {
        let errs: Vec<f64> = self.axis("meta_size").map(|r| r.linear_rmse).collect();
        if errs.is_empty() {
            return None;
        }
        let hi = errs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = errs.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(hi - lo)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<10} {:>6} {:>12} {:>12}\n", "axis", "value", "linear_rmse", "neural_rmse");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>6} {:>12.4} {:>12.4}",
                r.axis, r.value, r.linear_rmse, r.neural_rmse
            );
        }
        out
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::Format(format!("ablation row: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }
}

fn evaluate(
    pipeline: &Pipeline,
    meta: &MetaDataset,
    tests: &[FeatureBundle],
    axis: &str,
    value: usize,
) -> Result<AblationRow> {
    let cfg = &pipeline.config;
    let predictors = fit_predictors(meta, &pipeline.ori_stats, &cfg.neural, cfg.neural_seed)?;
    let report = run_method_comparison(&predictors, &[], tests, ReportMeta::default())?;
    let rmse = |m: &str| {
        report
            .rmse_of(m)
            .map(|v| v / 100.0)
            .ok_or_else(|| Error::InsufficientData("ablation test sets carry no labels".into()))
    };
    let row = AblationRow {
        axis: axis.into(),
        value,
        linear_rmse: rmse(LINEAR)?,
        neural_rmse: rmse(NEURAL)?,
    };
    log::info!(
        "ablation {axis}={value}: linear {:.4}, neural {:.4}",
        row.linear_rmse,
        row.neural_rmse
    );
    Ok(row)
}

/// Meta-size rows refit on prefixes of `meta` and score on `tests`. Set-size
/// rows rebuild the meta set and the test sets from the first `s` seed images;
/// a grid value equal to the full seed reuses `meta` and `tests`.
pub fn run_size_ablation(pipeline: &Pipeline, meta: &MetaDataset, tests: &[FeatureBundle]) -> Result<AblationTable> {
    let cfg = &pipeline.config;
    let grid = &cfg.ablation;
    if grid.meta_sizes.is_empty() && grid.set_sizes.is_empty() {
        return Err(Error::Config("ablation grids are empty".into()));
    }
    let mut table = AblationTable::default();
    for &m in &grid.meta_sizes {
        if m > meta.len() {
            return Err(Error::Config(format!(
                "ablation meta size {m} exceeds the meta set of {}",
                meta.len()
            )));
        }
        let sub = meta.prefix(m, cfg.split)?;
        table.rows.push(evaluate(pipeline, &sub, tests, "meta_size", m)?);
    }
    for &s in &grid.set_sizes {
        if s == pipeline.seed.len() {
            table.rows.push(evaluate(pipeline, meta, tests, "set_size", s)?);
            continue;
        }
        let p = pipeline.with_set_size(s)?;
        let sub_meta = p.build_meta()?;
        let sub_tests = p.test_bundles(tests.len())?;
        table.rows.push(evaluate(&p, &sub_meta, &sub_tests, "set_size", s)?);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(axis: &str, value: usize, l: f64) -> AblationRow {
        AblationRow {
            axis: axis.into(),
            value,
            linear_rmse: l,
            neural_rmse: 0.1,
        }
    }

    #[test]
    fn spread_uses_meta_axis_only() {
        let t = AblationTable {
            rows: vec![row("meta_size", 25, 0.2), row("meta_size", 200, 0.23), row("set_size", 100, 0.9)],
        };
        assert!((t.linear_spread().unwrap() - 0.03).abs() < 1e-12);
        assert_eq!(AblationTable::from_jsonl(&t.to_jsonl().unwrap()).unwrap(), t);
        assert_eq!(t.to_table().lines().count(), 4);
    }

    #[test]
    fn single_row_table() {
        let t = AblationTable {
            rows: vec![row("meta_size", 50, 0.2)],
        };
        assert_eq!(t.linear_spread(), Some(0.0));
        assert_eq!(t.to_table().lines().count(), 2);
    }
}
