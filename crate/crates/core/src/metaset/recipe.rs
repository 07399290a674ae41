//! Transform recipes: which background to paste behind the glyphs and which
//! three of the six catalog transforms to apply, with magnitude ranges.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::background::{crop_resize, BackgroundCorpus, CropRect};
use super::transforms;
use crate::classifier::{LabeledImageSet, Raster};
use crate::error::{Error, Result};

/// Transforms used to synthesize training sample sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TransformId {
    AutoContrast,
    Rotation,
    Color,
    Brightness,
    Sharpness,
    Translation,
}

impl TransformId {
    pub const ALL: [TransformId; 6] = [
        TransformId::AutoContrast,
        TransformId::Rotation,
        TransformId::Color,
        TransformId::Brightness,
        TransformId::Sharpness,
        TransformId::Translation,
    ];

    /// Magnitude bounds: degrees for rotation, fraction of side for
    /// translation, blend factor for the photometric ones. AutoContrast has
    /// no magnitude.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            TransformId::AutoContrast => (0.0, 0.0),
            TransformId::Rotation => (-30.0, 30.0),
            TransformId::Translation => (-0.2, 0.2),
            TransformId::Color | TransformId::Brightness | TransformId::Sharpness => (0.4, 1.6),
        }
    }

    /// Magnitude that leaves the image unchanged.
    pub fn identity(self) -> f64 {
        match self {
            TransformId::AutoContrast | TransformId::Rotation | TransformId::Translation => 0.0,
            TransformId::Color | TransformId::Brightness | TransformId::Sharpness => 1.0,
        }
    }

    fn apply(self, im: &Raster, rng: &mut ChaCha8Rng, range: (f64, f64)) -> Raster {
        let mut draw = || -> f32 {
            if range.0 == range.1 {
                range.0 as f32
            } else {
                rng.gen_range(range.0..=range.1) as f32
            }
        };
        match self {
            TransformId::AutoContrast => transforms::auto_contrast(im),
            TransformId::Rotation => transforms::rotate(im, draw()),
            TransformId::Color => transforms::saturation(im, draw()),
            TransformId::Brightness => transforms::brightness(im, draw()),
            TransformId::Sharpness => transforms::sharpness(im, draw()),
            TransformId::Translation => {
                let tx = draw();
                let ty = draw();
                transforms::translate(im, tx, ty)
            }
        }
    }
}

impl fmt::Display for TransformId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TransformId::AutoContrast => "autoContrast",
            TransformId::Rotation => "rotation",
            TransformId::Color => "color",
            TransformId::Brightness => "brightness",
            TransformId::Sharpness => "sharpness",
            TransformId::Translation => "translation",
        };
        f.write_str(s)
    }
}

/// One transform with the range its per-image magnitude is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformStep {
    pub id: TransformId,
    pub min: f64,
    pub max: f64,
}

impl TransformStep {
    pub fn fixed(id: TransformId, value: f64) -> Self {
        Self {
            id,
            min: value,
            max: value,
        }
    }
}

/// Background source with the region per-image crops are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundPatch {
    pub source: usize,
    pub crop: CropRect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecipe {
    pub background: BackgroundPatch,
    /// Exactly three distinct transforms, applied in this order.
    pub transforms: Vec<TransformStep>,
}

impl TransformRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.transforms.len() != 3 {
            return Err(Error::Config(format!(
                "a recipe needs exactly 3 transforms, got {}",
                self.transforms.len()
            )));
        }
        for (i, a) in self.transforms.iter().enumerate() {
            if self.transforms[..i].iter().any(|b| b.id == a.id) {
                return Err(Error::Config(format!("transform {} repeated", a.id)));
            }
            let (lo, hi) = a.id.bounds();
            if !(a.min <= a.max && a.min >= lo && a.max <= hi) {
                return Err(Error::Config(format!(
                    "{} range [{}, {}] outside [{lo}, {hi}]",
                    a.id, a.min, a.max
                )));
            }
        }
        if !self.background.crop.is_valid() {
            return Err(Error::Config("background crop outside the source image".into()));
        }
        Ok(())
    }

    /// Sorted transform ids, used for subset censuses.
    pub fn transform_set(&self) -> Vec<TransformId> {
        let mut ids: Vec<TransformId> = self.transforms.iter().map(|s| s.id).collect();
        ids.sort();
        ids
    }
}

/// Draw a random recipe: one background source with a crop of random scale
/// and position, and three distinct transforms in random order, each with a
/// random magnitude sub-range of its catalog bounds.
pub fn sample_recipe(rng: &mut ChaCha8Rng, corpus_len: usize) -> TransformRecipe {
    let source = rng.gen_range(0..corpus_len.max(1));
    let scale = rng.gen_range(0.25..=1.0);
    let crop = CropRect {
        x: rng.gen_range(0.0..=1.0 - scale),
        y: rng.gen_range(0.0..=1.0 - scale),
        width: scale,
        height: scale,
    };
    let mut ids = TransformId::ALL;
    ids.shuffle(rng);
    let transforms = ids[..3]
        .iter()
        .map(|&id| {
            let (lo, hi) = id.bounds();
            if lo == hi {
                return TransformStep::fixed(id, lo);
            }
            let a = rng.gen_range(lo..=hi);
            let b = rng.gen_range(lo..=hi);
            TransformStep {
                id,
                min: a.min(b),
                max: a.max(b),
            }
        })
        .collect();
    TransformRecipe {
        background: BackgroundPatch { source, crop },
        transforms,
    }
}

/// Premultiplied compositing: `out = foreground + (1 − mask)·background`.
///
/// Seed images are glyphs on black, so pixels with mask 1 keep their value
/// and pixels with mask 0 take the background.
pub fn composite(foreground: &Raster, mask: &Raster, background: &Raster) -> Result<Raster> {
    let fs = foreground.shape();
    if mask.height() != fs.height || mask.width() != fs.width || mask.channels() != 1 {
        return Err(Error::Shape("mask does not align with its image".into()));
    }
    if background.shape() != fs {
        return Err(Error::Shape("background does not match image shape".into()));
    }
    let mut out = foreground.clone();
    let ch = fs.channels;
    for (i, px) in out.data_mut().chunks_exact_mut(ch).enumerate() {
        let keep = 1.0 - mask.data()[i];
        for c in 0..ch {
            px[c] = (px[c] + keep * background.data()[i * ch + c]).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Per-image background: a random window covering 50–100% of the recipe's
/// crop region, resampled to the image size.
pub fn draw_background(source: &Raster, region: CropRect, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Raster {
    let frac = rng.gen_range(0.5..=1.0);
    let cw = region.width * frac;
    let chh = region.height * frac;
    let crop = CropRect {
        x: region.x + rng.gen_range(0.0..=region.width - cw),
        y: region.y + rng.gen_range(0.0..=region.height - chh),
        width: cw,
        height: chh,
    };
    crop_resize(source, crop, h, w)
}

/// Synthesize one sample set from the seed: replace every background, then
/// apply the recipe's transforms with magnitudes drawn per image.
pub fn apply_recipe(
    seed: &LabeledImageSet,
    masks: &[Raster],
    recipe: &TransformRecipe,
    backgrounds: &BackgroundCorpus,
    rng: &mut ChaCha8Rng,
) -> Result<LabeledImageSet> {
    recipe.validate()?;
    if backgrounds.is_empty() {
        return Err(Error::Config("background corpus is empty".into()));
    }
    if masks.len() != seed.len() {
        return Err(Error::Shape(format!(
            "{} masks for {} seed images",
            masks.len(),
            seed.len()
        )));
    }
    let source = backgrounds.get(recipe.background.source).ok_or_else(|| {
        Error::Config(format!(
            "background source {} not in corpus of {}",
            recipe.background.source,
            backgrounds.len()
        ))
    })?;
    let mut images = Vec::with_capacity(seed.len());
    for (im, mask) in seed.images().iter().zip(masks) {
        let bg = draw_background(source, recipe.background.crop, im.height(), im.width(), rng);
        let mut out = composite(im, mask, &bg)?;
        for step in &recipe.transforms {
            out = step.id.apply(&out, rng, (step.min, step.max));
            out.clamp_unit();
        }
        images.push(out);
    }
    LabeledImageSet::new(images, seed.labels().to_vec(), seed.classes())
}
