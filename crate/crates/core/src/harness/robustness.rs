//! Test-only sample sets built from transforms that never appear in training
//! recipes: Cutout, Shear, Equalize and ColorTemperature.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::Pipeline;
use crate::classifier::{FeatureBundle, LabeledImageSet, Raster};
use crate::error::{Error, Result};
use crate::metaset::transforms::{color_temperature, cutout, equalize, shear};
use crate::metaset::{composite, draw_background, BackgroundPatch, CropRect};
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum HoldoutTransform {
    Cutout,
    Shear,
    Equalize,
    ColorTemperature,
}

impl HoldoutTransform {
    pub const ALL: [HoldoutTransform; 4] = [
        HoldoutTransform::Cutout,
        HoldoutTransform::Shear,
        HoldoutTransform::Equalize,
        HoldoutTransform::ColorTemperature,
    ];

    fn apply(self, im: &Raster, rng: &mut ChaCha8Rng) -> Raster {
        match self {
            HoldoutTransform::Cutout => {
                let min_side = im.height().min(im.width());
                let lo = ((0.10 * min_side as f64).round() as usize).max(1);
                let hi = ((0.25 * min_side as f64).round() as usize).max(lo);
                let side = rng.gen_range(lo..=hi);
                let top = rng.gen_range(0..=im.height() - side);
                let left = rng.gen_range(0..=im.width() - side);
                cutout(im, top, left, side)
            }
            HoldoutTransform::Shear => shear(im, rng.gen_range(-0.3..=0.3)),
            HoldoutTransform::Equalize => equalize(im),
            HoldoutTransform::ColorTemperature => color_temperature(im, rng.gen_range(0.7..=1.3)),
        }
    }
}

impl fmt::Display for HoldoutTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HoldoutTransform::Cutout => "cutout",
            HoldoutTransform::Shear => "shear",
            HoldoutTransform::Equalize => "equalize",
            HoldoutTransform::ColorTemperature => "colorTemperature",
        };
        f.write_str(s)
    }
}

/// Named transform combinations evaluated by the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoldoutVariant {
    /// Geometric: Cutout then Shear.
    A,
    /// Photometric: Equalize then ColorTemperature.
    B,
    /// All four in a random order per set.
    C,
}

impl HoldoutVariant {
    pub const ALL: [HoldoutVariant; 3] = [HoldoutVariant::A, HoldoutVariant::B, HoldoutVariant::C];

    fn transforms(self, rng: &mut ChaCha8Rng) -> Vec<HoldoutTransform> {
        use HoldoutTransform::*;
        match self {
            HoldoutVariant::A => vec![Cutout, Shear],
            HoldoutVariant::B => vec![Equalize, ColorTemperature],
            HoldoutVariant::C => {
                let mut all = HoldoutTransform::ALL.to_vec();
                all.shuffle(rng);
                all
            }
        }
    }
}

impl fmt::Display for HoldoutVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HoldoutVariant::A => "A",
            HoldoutVariant::B => "B",
            HoldoutVariant::C => "C",
        };
        f.write_str(s)
    }
}

/// A background change followed by held-out transforms with magnitudes drawn
/// per image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutRecipe {
    pub background: BackgroundPatch,
    pub transforms: Vec<HoldoutTransform>,
}

pub fn sample_holdout_recipe(variant: HoldoutVariant, rng: &mut ChaCha8Rng, corpus_len: usize) -> HoldoutRecipe {
    let source = rng.gen_range(0..corpus_len.max(1));
    let scale = rng.gen_range(0.25..=1.0);
    let crop = CropRect {
        x: rng.gen_range(0.0..=1.0 - scale),
        y: rng.gen_range(0.0..=1.0 - scale),
        width: scale,
        height: scale,
    };
    HoldoutRecipe {
        background: BackgroundPatch { source, crop },
        transforms: variant.transforms(rng),
    }
}

pub fn apply_holdout_recipe(
    pipeline: &Pipeline,
    recipe: &HoldoutRecipe,
    rng: &mut ChaCha8Rng,
) -> Result<LabeledImageSet> {
    let source = pipeline.backgrounds.get(recipe.background.source).ok_or_else(|| {
        Error::Config(format!("background source {} not in corpus", recipe.background.source))
    })?;
    let mut images = Vec::with_capacity(pipeline.seed.len());
    for (im, mask) in pipeline.seed.images().iter().zip(&pipeline.masks) {
        let bg = draw_background(source, recipe.background.crop, im.height(), im.width(), rng);
        let mut out = composite(im, mask, &bg)?;
        for t in &recipe.transforms {
            out = t.apply(&out, rng);
            out.clamp_unit();
        }
        images.push(out);
    }
    LabeledImageSet::new(images, pipeline.seed.labels().to_vec(), pipeline.seed.classes())
}

/// `per_variant` labeled sets for every variant, named `holdout-<variant>-<i>`.
pub fn holdout_bundles(pipeline: &Pipeline, per_variant: usize) -> Result<Vec<(HoldoutRecipe, FeatureBundle)>> {
    let jobs: Vec<(usize, HoldoutVariant, usize)> = HoldoutVariant::ALL
        .iter()
        .enumerate()
        .flat_map(|(v, &variant)| (0..per_variant).map(move |i| (v * per_variant + i, variant, i)))
        .collect();
    jobs.into_par_iter()
        .map(|(index, variant, i)| {
            let mut rng = stream(pipeline.config.rng_seed, Domain::HoldoutSet, index as u64);
            let recipe = sample_holdout_recipe(variant, &mut rng, pipeline.backgrounds.len());
            let set = apply_holdout_recipe(pipeline, &recipe, &mut rng)?;
            let name = format!("holdout-{variant}-{i:02}");
            let bundle = crate::classifier::extract_features(&pipeline.classifier, set.images(), &name)?
                .with_labels(set.labels().to_vec())?;
            Ok((recipe, bundle))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metaset::TransformId;
    use rand::SeedableRng;

    #[test]
    fn catalogs_are_disjoint() {
        let train: Vec<String> = TransformId::ALL.iter().map(|t| t.to_string().to_lowercase()).collect();
        for h in HoldoutTransform::ALL {
            assert!(!train.contains(&h.to_string().to_lowercase()), "{h}");
        }
    }

    #[test]
    fn variants_use_expected_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = sample_holdout_recipe(HoldoutVariant::A, &mut rng, 3);
        assert_eq!(a.transforms, vec![HoldoutTransform::Cutout, HoldoutTransform::Shear]);
        let c = sample_holdout_recipe(HoldoutVariant::C, &mut rng, 3);
        assert_eq!(c.transforms.len(), 4);
        assert!(a.background.crop.is_valid() && a.background.source < 3);
    }

    #[test]
    fn cutout_magnitude_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let im = Raster::zeros(28, 28, 3);
        for _ in 0..200 {
            let out = HoldoutTransform::Cutout.apply(&im, &mut rng);
            let px = out.data().iter().filter(|&&v| v == 0.5).count() / 3;
            let side = (px as f64).sqrt().round() as usize;
            assert_eq!(side * side, px);
            assert!((3..=7).contains(&side), "side {side}");
        }
    }
}
