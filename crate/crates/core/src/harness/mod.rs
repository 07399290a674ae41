//! Experiment orchestration: correlation study, method comparison on held-out
//! synthetic sets, robustness to unseen transforms, and size ablations.

mod ablation;
mod config;
mod pipeline;
mod report;
mod robustness;

use rayon::prelude::*;

pub use ablation::{run_size_ablation, AblationRow, AblationTable};
pub use config::{AblationConfig, ExperimentConfig, Thresholds};
pub use pipeline::{fit_predictors, reference_stats, train_reference_classifier, Pipeline};
pub use report::{scatter_text, CorrelationSummary, MethodSummary, PredictionReport, ReportMeta, ReportRow};
pub use robustness::{
    apply_holdout_recipe, holdout_bundles, sample_holdout_recipe, HoldoutRecipe, HoldoutTransform, HoldoutVariant,
};

use crate::classifier::FeatureBundle;
use crate::error::{Error, Result};
use crate::metaset::MetaDataset;
use crate::predictors::{assemble_representation, predict_confidence, predict_linear, PredictorSet};
use crate::stats::spearman_rho;

pub const LINEAR: &str = "linear";
pub const NEURAL: &str = "neural";

pub fn confidence_method(tau: f64) -> String {
    format!("confidence@{tau}")
}

/// Method names in report column order: one confidence column per tau, then
/// the two regressors.
pub fn method_names(taus: &[f64]) -> Vec<String> {
    let mut m: Vec<String> = taus.iter().map(|&t| confidence_method(t)).collect();
    m.push(LINEAR.into());
    m.push(NEURAL.into());
    m
}

/// Spearman correlation between fd and accuracy over every record, with the
/// `(fd, accuracy)` point cloud.
pub fn run_correlation_study(meta: &MetaDataset) -> Result<(f64, Vec<(f64, f64)>)> {
    let points: Vec<(f64, f64)> = meta.records.iter().map(|r| (r.fd, r.accuracy)).collect();
    let (fd, acc): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    Ok((spearman_rho(&fd, &acc)?, points))
}

/// Every method's estimate for one bundle, in [`method_names`] order.
pub fn predict_bundle(predictors: &PredictorSet, taus: &[f64], bundle: &FeatureBundle) -> Result<Vec<f64>> {
    let mut out = taus
        .iter()
        .map(|&t| predict_confidence(bundle, t))
        .collect::<Result<Vec<_>>>()?;
    let rep = assemble_representation(&bundle.stats()?, &predictors.ori_stats)?;
    out.push(predict_linear(&predictors.linear, rep.fd));
    out.push(predictors.neural.predict(&rep)?);
    Ok(out)
}

/// Predict every bundle with every method. Labeled bundles contribute ground
/// truth; if any bundle is unlabeled the report carries predictions only.
pub fn run_method_comparison(
    predictors: &PredictorSet,
    taus: &[f64],
    bundles: &[FeatureBundle],
    meta: ReportMeta,
) -> Result<PredictionReport> {
    if bundles.is_empty() {
        return Err(Error::InsufficientData("no test sets to evaluate".into()));
    }
    let rows = bundles
        .par_iter()
        .map(|b| {
            let preds = predict_bundle(predictors, taus, b)?;
            let truth = match b.labels() {
                Some(_) => Some(b.accuracy()?),
                None => None,
            };
            Ok((b.source_id().to_string(), truth, preds))
        })
        .collect::<Result<Vec<_>>>()?;
    PredictionReport::new(meta, method_names(taus), rows)
}

pub struct RobustnessOutcome {
    pub report: PredictionReport,
    pub recipes: Vec<HoldoutRecipe>,
    /// Classifier accuracy on the clean seed, for comparison with every row.
    pub seed_accuracy: f64,
}

impl RobustnessOutcome {
    /// Fraction of sets whose neural absolute error is at most `bound`
    /// (accuracy units).
    pub fn neural_within(&self, bound: f64) -> f64 {
        let errs = self.report.abs_errors(NEURAL).unwrap_or_default();
        let ok = errs.iter().filter(|&&e| e <= 100.0 * bound).count();
        ok as f64 / errs.len().max(1) as f64
    }

    /// Whether every set's ground truth is below the clean seed accuracy.
    pub fn all_below_seed(&self) -> bool {
        self.report
            .rows
            .iter()
            .all(|r| r.truth.is_some_and(|t| t < 100.0 * self.seed_accuracy))
    }
}

pub fn run_robustness_suite(
    pipeline: &Pipeline,
    predictors: &PredictorSet,
    meta: ReportMeta,
) -> Result<RobustnessOutcome> {
    let sets = holdout_bundles(pipeline, pipeline.config.robustness_sets_per_variant)?;
    let (recipes, bundles): (Vec<_>, Vec<_>) = sets.into_iter().unzip();
    let report = run_method_comparison(predictors, &pipeline.config.taus, &bundles, meta)?;
    Ok(RobustnessOutcome {
        report,
        recipes,
        seed_accuracy: pipeline.seed_accuracy,
    })
}

/// Threshold violations as human-readable messages; empty when all pass.
pub fn check_thresholds(
    t: &Thresholds,
    rho: Option<f64>,
    comparison: Option<&PredictionReport>,
    robustness: Option<&RobustnessOutcome>,
    ablation: Option<&AblationTable>,
) -> Vec<String> {
    let mut out = Vec::new();
    if let (Some(max), Some(rho)) = (t.max_rho, rho) {
        if rho > max {
            out.push(format!("spearman rho {rho:.4} above {max}"));
        }
    }
    if let Some(r) = comparison {
        let neural = r.rmse_of(NEURAL).map(|v| v / 100.0);
        let linear = r.rmse_of(LINEAR).map(|v| v / 100.0);
        if let (Some(max), Some(n)) = (t.max_neural_rmse, neural) {
            if n > max {
                out.push(format!("neural rmse {n:.4} above {max}"));
            }
        }
        if let (Some(true), Some(n), Some(l)) = (t.neural_beats_linear, neural, linear) {
            if n > l {
                out.push(format!("neural rmse {n:.4} above linear rmse {l:.4}"));
            }
        }
    }
    if let (Some(bound), Some(frac), Some(r)) = (t.robustness_max_error, t.robustness_min_fraction, robustness) {
        let got = r.neural_within(bound);
        if got < frac {
            out.push(format!("only {:.0}% of robustness sets within {bound}", 100.0 * got));
        }
    }
    if let (Some(max), Some(a)) = (t.max_linear_spread, ablation) {
        if let Some(spread) = a.linear_spread() {
            if spread > max {
                out.push(format!("linear error spread {spread:.4} above {max}"));
            }
        }
    }
    out
}
