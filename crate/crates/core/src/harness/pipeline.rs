//! Shared experiment state: the trained classifier, its reference statistics,
//! the glyph seed and the background corpus.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::classifier::{accuracy, extract_features, train_classifier, FeatureBundle, LabeledImageSet, Raster, TinyClassifier};
use crate::error::{Error, Result};
use crate::metaset::{
    build_meta_dataset, render_seed, sample_recipe, BackgroundCorpus, MetaDataset, SynthesisContext,
};
use crate::predictors::{fit_linear, fit_neural, DatasetRepresentation, NeuralConfig, PredictorSet};
use crate::rng::{stream, Domain};
use crate::stats::DatasetStats;

pub struct Pipeline {
    pub config: ExperimentConfig,
    pub classifier: TinyClassifier,
    pub ori_stats: DatasetStats,
    pub seed: LabeledImageSet,
    pub masks: Vec<Raster>,
    pub backgrounds: BackgroundCorpus,
    /// Classifier accuracy on the clean seed images.
    pub seed_accuracy: f64,
}

/// Train the classifier on the reference glyph set.
pub fn train_reference_classifier(cfg: &ExperimentConfig) -> Result<TinyClassifier> {
    let (reference, _) = render_seed(&cfg.reference)?;
    train_classifier(&reference, &cfg.classifier, cfg.classifier_seed)
}

/// Feature statistics of the classifier's own training set.
pub fn reference_stats(cfg: &ExperimentConfig, clf: &TinyClassifier) -> Result<DatasetStats> {
    let (reference, _) = render_seed(&cfg.reference)?;
    extract_features(clf, reference.images(), "reference")?.stats()
}

impl Pipeline {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let classifier = train_reference_classifier(&config)?;
        Self::with_classifier(config, classifier)
    }

    pub fn with_classifier(config: ExperimentConfig, classifier: TinyClassifier) -> Result<Self> {
        config.validate()?;
        let ori_stats = reference_stats(&config, &classifier)?;
        Self::from_parts(config, classifier, ori_stats)
    }

    pub fn from_parts(config: ExperimentConfig, classifier: TinyClassifier, ori_stats: DatasetStats) -> Result<Self> {
        config.validate()?;
        if classifier.feature_dim() != ori_stats.dim() {
            return Err(Error::Shape("classifier and reference statistics disagree on feature dim".into()));
        }
        let backgrounds = BackgroundCorpus::from_config(&config.backgrounds)?;
        let (seed, masks) = render_seed(&config.seed)?;
        let seed_accuracy = accuracy(&classifier, &seed)?;
        log::info!("classifier accuracy on the clean seed: {:.4}", seed_accuracy);
        Ok(Self {
            config,
            classifier,
            ori_stats,
            seed,
            masks,
            backgrounds,
            seed_accuracy,
        })
    }

    pub fn context(&self) -> SynthesisContext<'_> {
        SynthesisContext {
            seed: &self.seed,
            masks: &self.masks,
            classifier: &self.classifier,
            ori_stats: &self.ori_stats,
            backgrounds: &self.backgrounds,
            seed_config: Some(self.config.seed.clone()),
        }
    }

    /// The pipeline restricted to the first `size` seed images.
    pub fn with_set_size(&self, size: usize) -> Result<Pipeline> {
        if size < 2 || size > self.seed.len() {
            return Err(Error::Config(format!("set size {size} outside 2..={}", self.seed.len())));
        }
        let seed = LabeledImageSet::new(
            self.seed.images()[..size].to_vec(),
            self.seed.labels()[..size].to_vec(),
            self.seed.classes(),
        )?;
        let seed_accuracy = accuracy(&self.classifier, &seed)?;
        Ok(Pipeline {
            config: self.config.clone(),
            classifier: self.classifier.clone(),
            ori_stats: self.ori_stats.clone(),
            seed,
            masks: self.masks[..size].to_vec(),
            backgrounds: self.backgrounds.clone(),
            seed_accuracy,
        })
    }

    pub fn build_meta(&self) -> Result<MetaDataset> {
        build_meta_dataset(&self.context(), self.config.meta_size, self.config.rng_seed, self.config.split)
    }

    /// Held-out synthetic test sets drawn from the training recipe
    /// distribution on their own RNG streams.
    pub fn test_bundles(&self, count: usize) -> Result<Vec<FeatureBundle>> {
        let ctx = self.context();
        ctx.check()?;
        (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(self.config.rng_seed, Domain::TestSet, i as u64);
                let recipe = sample_recipe(&mut rng, self.backgrounds.len());
                ctx.synthesize(&recipe, &mut rng, &format!("test-{i:03}"))
            })
            .collect()
    }
}

/// Fit both regressors on a meta set's train split, selecting the neural
/// parameters on its validation split.
pub fn fit_predictors(
    meta: &MetaDataset,
    ori_stats: &DatasetStats,
    neural: &NeuralConfig,
    seed: u64,
) -> Result<PredictorSet> {
    let points: Vec<(f64, f64)> = meta.train_records().map(|r| (r.fd, r.accuracy)).collect();
    let linear = fit_linear(&points)?;
    let reps = |it: &mut dyn Iterator<Item = &crate::metaset::SampleSetRecord>| {
        it.map(|r| Ok((DatasetRepresentation::from_stats(r.fd, &r.stats)?, r.accuracy)))
            .collect::<Result<Vec<_>>>()
    };
    let train = reps(&mut meta.train_records())?;
    let val = reps(&mut meta.val_records())?;
    let neural = fit_neural(&train, &val, neural, seed)?;
    PredictorSet::new(ori_stats.clone(), linear, neural)
}
