use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::background::BackgroundCorpus;
use super::glyph::GlyphSeedConfig;
use super::recipe::{apply_recipe, sample_recipe, TransformRecipe};
use crate::classifier::{extract_features, FeatureBundle, LabeledImageSet, Raster, TinyClassifier};
use crate::codec::hex_digest;
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::stats::{frechet_distance, DatasetStats};

/// Everything needed to turn a recipe into a labeled feature bundle.
pub struct SynthesisContext<'a> {
    pub seed: &'a LabeledImageSet,
    pub masks: &'a [Raster],
    pub classifier: &'a TinyClassifier,
    pub ori_stats: &'a DatasetStats,
    pub backgrounds: &'a BackgroundCorpus,
    /// Recorded in the provenance when known.
    pub seed_config: Option<GlyphSeedConfig>,
}

impl SynthesisContext<'_> {
    pub fn check(&self) -> Result<()> {
        if self.classifier.feature_dim() != self.ori_stats.dim() {
            return Err(Error::Shape(format!(
                "classifier feature dim {} does not match reference stats dim {}",
                self.classifier.feature_dim(),
                self.ori_stats.dim()
            )));
        }
        if self.masks.len() != self.seed.len() {
            return Err(Error::Shape("masks do not align with seed images".into()));
        }
        if self.backgrounds.is_empty() {
            return Err(Error::Config("background corpus is empty".into()));
        }
        Ok(())
    }

    /// Build the sample set for `recipe` and return its labeled features.
    pub fn synthesize(&self, recipe: &TransformRecipe, rng: &mut ChaCha8Rng, name: &str) -> Result<FeatureBundle> {
        let set = apply_recipe(self.seed, self.masks, recipe, self.backgrounds, rng)?;
        extract_features(self.classifier, set.images(), name)?.with_labels(set.labels().to_vec())
    }

    pub fn seed_hash(&self) -> String {
        let mut bytes = Vec::new();
        for (im, l) in self.seed.images().iter().zip(self.seed.labels()) {
            bytes.extend(im.to_le_bytes());
            bytes.extend_from_slice(&l.to_le_bytes());
        }
        hex_digest(&bytes)
    }
}

/// `train:val` proportions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatio {
    pub train: u32,
    pub val: u32,
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self { train: 2, val: 1 }
    }
}

impl SplitRatio {
    /// Number of training records out of `n`; both sides keep at least one
    /// record when `n ≥ 2`.
    pub fn train_count(&self, n: usize) -> usize {
        let total = (self.train + self.val).max(1) as usize;
        let t = (n * self.train as usize + total / 2) / total;
        t.clamp(1, n.saturating_sub(1).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSetRecord {
    pub id: usize,
    pub recipe: TransformRecipe,
    pub stats: DatasetStats,
    pub fd: f64,
    pub accuracy: f64,
    pub image_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed_config: Option<GlyphSeedConfig>,
    pub rng_seed: u64,
    pub classifier_hash: String,
    pub corpus_hash: String,
    pub seed_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaDataset {
    pub records: Vec<SampleSetRecord>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub provenance: Provenance,
}

impl MetaDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn train_records(&self) -> impl Iterator<Item = &SampleSetRecord> {
        self.train.iter().map(|&i| &self.records[i])
    }

    pub fn val_records(&self) -> impl Iterator<Item = &SampleSetRecord> {
        self.val.iter().map(|&i| &self.records[i])
    }

    /// The first `n` records, re-split with `split`.
    pub fn prefix(&self, n: usize, split: SplitRatio) -> Result<MetaDataset> {
        if n < 2 || n > self.records.len() {
            return Err(Error::Config(format!(
                "prefix of {n} records from a meta set of {}",
                self.records.len()
            )));
        }
        let t = split.train_count(n);
        Ok(MetaDataset {
            records: self.records[..n].to_vec(),
            train: (0..t).collect(),
            val: (t..n).collect(),
            provenance: self.provenance.clone(),
        })
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n = self.records.len();
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val) {
            if i >= n || seen[i] {
                return Err(Error::Validation(format!("split index {i} repeated or out of range")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Validation("splits do not cover every record".into()));
        }
        for r in &self.records {
            if !(0.0..=1.0).contains(&r.accuracy) || !(r.fd >= 0.0) {
                return Err(Error::Validation(format!("record {} out of range", r.id)));
            }
        }
        Ok(())
    }
}

/// Generate one record: recipe and sample set both come from the record's
/// own RNG stream, so any record can be regenerated in isolation.
pub fn generate_record(ctx: &SynthesisContext<'_>, rng_seed: u64, id: usize) -> Result<SampleSetRecord> {
    let mut rng = stream(rng_seed, Domain::MetaRecord, id as u64);
    let recipe = sample_recipe(&mut rng, ctx.backgrounds.len());
    record_from_recipe(ctx, recipe, &mut rng, id)
}

/// Rebuild the labeled sample set behind record `id` of a meta set generated
/// with `rng_seed`.
pub fn regenerate_bundle(ctx: &SynthesisContext<'_>, rng_seed: u64, id: usize) -> Result<FeatureBundle> {
    let mut rng = stream(rng_seed, Domain::MetaRecord, id as u64);
    let recipe = sample_recipe(&mut rng, ctx.backgrounds.len());
    ctx.synthesize(&recipe, &mut rng, &format!("sample-{id:05}"))
}

pub fn record_from_recipe(
    ctx: &SynthesisContext<'_>,
    recipe: TransformRecipe,
    rng: &mut ChaCha8Rng,
    id: usize,
) -> Result<SampleSetRecord> {
    let bundle = ctx.synthesize(&recipe, rng, &format!("sample-{id:05}"))?;
    let stats = bundle.stats()?;
    let fd = frechet_distance(ctx.ori_stats, &stats)?;
    Ok(SampleSetRecord {
        id,
        recipe,
        fd,
        accuracy: bundle.accuracy()?,
        image_count: bundle.len(),
        stats,
    })
}

/// Synthesize `n` sample sets and label each with the classifier's accuracy
/// and its Fréchet distance to the reference statistics. The first
/// `split.train_count(n)` records form the training split.
pub fn build_meta_dataset(ctx: &SynthesisContext<'_>, n: usize, rng_seed: u64, split: SplitRatio) -> Result<MetaDataset> {
    if n < 2 {
        return Err(Error::Config(format!("meta set needs at least 2 sample sets, got {n}")));
    }
    ctx.check()?;
    let records = (0..n)
        .into_par_iter()
        .map(|id| generate_record(ctx, rng_seed, id))
        .collect::<Result<Vec<_>>>()?;
    let t = split.train_count(n);
    let meta = MetaDataset {
        records,
        train: (0..t).collect(),
        val: (t..n).collect(),
        provenance: Provenance {
            seed_config: ctx.seed_config.clone(),
            rng_seed,
            classifier_hash: ctx.classifier.checkpoint_hash()?,
            corpus_hash: ctx.backgrounds.hash(),
            seed_hash: ctx.seed_hash(),
        },
    };
    meta.check_invariants()?;
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_counts() {
        let s = SplitRatio::default();
        assert_eq!(s.train_count(3000), 2000);
        assert_eq!(s.train_count(200), 133);
        assert_eq!(s.train_count(2), 1);
        assert_eq!(SplitRatio { train: 1, val: 0 }.train_count(5), 4);
    }
}
