//! Background image corpus: bundled procedural textures and/or PNG files.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::Raster;
use crate::codec::hex_digest;
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

/// A crop rectangle in fractions of the source image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl CropRect {
    pub const FULL: CropRect = CropRect {
        x: 0.0,
        y: 0.0,
        width: 1.0,
        height: 1.0,
    };

    pub fn is_valid(&self) -> bool {
        self.width > 0.0
            && self.height > 0.0
            && self.x >= 0.0
            && self.y >= 0.0
            && self.x + self.width <= 1.0 + 1e-12
            && self.y + self.height <= 1.0 + 1e-12
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundConfig {
    /// Include the bundled procedural textures.
    pub procedural: bool,
    pub procedural_count: usize,
    pub procedural_size: usize,
    pub procedural_seed: u64,
    /// Optional directory of PNG images.
    pub directory: Option<String>,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self {
            procedural: true,
            procedural_count: 64,
            procedural_size: 64,
            procedural_seed: 2024,
            directory: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundCorpus {
    images: Vec<Raster>,
}

impl BackgroundCorpus {
    pub fn new(images: Vec<Raster>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Config("background corpus is empty".into()));
        }
        if let Some(bad) = images.iter().position(|im| im.channels() != 3 || im.height() == 0 || im.width() == 0) {
            return Err(Error::Config(format!("background {bad} is not a non-empty RGB raster")));
        }
        Ok(Self { images })
    }

    pub fn from_config(cfg: &BackgroundConfig) -> Result<Self> {
        let mut images = Vec::new();
        if cfg.procedural {
            images.extend(procedural_textures(cfg.procedural_count, cfg.procedural_size, cfg.procedural_seed));
        }
        if let Some(dir) = &cfg.directory {
            images.extend(load_png_dir(Path::new(dir))?);
        }
        Self::new(images)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Raster> {
        self.images.get(i)
    }

    pub fn images(&self) -> &[Raster] {
        &self.images
    }

    /// SHA-256 over the shapes and pixel values of every image, in order.
    pub fn hash(&self) -> String {
        let mut bytes = Vec::new();
        for im in &self.images {
            bytes.extend_from_slice(&(im.height() as u64).to_le_bytes());
            bytes.extend_from_slice(&(im.width() as u64).to_le_bytes());
            bytes.extend(im.to_le_bytes());
        }
        hex_digest(&bytes)
    }
}

/// Load every `.png` in a directory (sorted by file name) as RGB.
pub fn load_png_dir(dir: &Path) -> Result<Vec<Raster>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("background directory {} does not exist", dir.display())));
    }
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("png"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let img = image::open(&p)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
        out.push(Raster::new(h as usize, w as usize, 3, data)?);
    }
    Ok(out)
}

fn random_color(rng: &mut ChaCha8Rng, level: f32) -> [f32; 3] {
    [0, 1, 2].map(|_| (level * rng.gen_range(0.3f32..1.0)).clamp(0.0, 1.0))
}

/// Deterministic textures: value noise, gradients, stripes, checkers and
/// speckle. Each texture has its own brightness level so the corpus spans dim
/// to bright backgrounds.
pub fn procedural_textures(count: usize, size: usize, seed: u64) -> Vec<Raster> {
    (0..count)
        .map(|i| {
            let mut rng = stream(seed, Domain::Corpus, i as u64);
            let level: f32 = rng.gen_range(0.05..1.0);
            let a = random_color(&mut rng, level);
            let b = random_color(&mut rng, level);
            let mut im = Raster::zeros(size, size, 3);
            let s = size as f32;
            match i % 5 {
                0 => {
                    let cells = rng.gen_range(2..8usize);
                    let grid: Vec<[f32; 3]> = (0..(cells + 1) * (cells + 1))
                        .map(|_| random_color(&mut rng, level))
                        .collect();
                    for y in 0..size {
                        for x in 0..size {
                            let gy = y as f32 / s * cells as f32;
                            let gx = x as f32 / s * cells as f32;
                            let (y0, x0) = (gy.floor() as usize, gx.floor() as usize);
                            let (fy, fx) = (gy - y0 as f32, gx - x0 as f32);
                            for c in 0..3 {
                                let g = |yy: usize, xx: usize| grid[yy * (cells + 1) + xx][c];
                                let top = g(y0, x0) * (1.0 - fx) + g(y0, x0 + 1) * fx;
                                let bot = g(y0 + 1, x0) * (1.0 - fx) + g(y0 + 1, x0 + 1) * fx;
                                im.set(y, x, c, top * (1.0 - fy) + bot * fy);
                            }
                        }
                    }
                }
                1 => {
                    let theta: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
                    let (sn, cs) = theta.sin_cos();
                    for y in 0..size {
                        for x in 0..size {
                            let t = ((x as f32 / s - 0.5) * cs + (y as f32 / s - 0.5) * sn + 0.75) / 1.5;
                            let t = t.clamp(0.0, 1.0);
                            for c in 0..3 {
                                im.set(y, x, c, a[c] * (1.0 - t) + b[c] * t);
                            }
                        }
                    }
                }
                2 => {
                    let theta: f32 = rng.gen_range(0.0..std::f32::consts::PI);
                    let freq: f32 = rng.gen_range(2.0..12.0);
                    let (sn, cs) = theta.sin_cos();
                    for y in 0..size {
                        for x in 0..size {
                            let u = (x as f32 * cs + y as f32 * sn) / s;
                            let t = 0.5 + 0.5 * (std::f32::consts::TAU * freq * u).sin();
                            for c in 0..3 {
                                im.set(y, x, c, a[c] * (1.0 - t) + b[c] * t);
                            }
                        }
                    }
                }
                3 => {
                    let cell = rng.gen_range(3..16usize);
                    for y in 0..size {
                        for x in 0..size {
                            let pick = if (y / cell + x / cell) % 2 == 0 { a } else { b };
                            for c in 0..3 {
                                im.set(y, x, c, pick[c]);
                            }
                        }
                    }
                }
                _ => {
                    let amp: f32 = rng.gen_range(0.05..0.5) * level;
                    for y in 0..size {
                        for x in 0..size {
                            let n: f32 = rng.gen_range(-amp..amp);
                            for c in 0..3 {
                                im.set(y, x, c, (a[c] + n).clamp(0.0, 1.0));
                            }
                        }
                    }
                }
            }
            im
        })
        .collect()
}

/// Resample the `crop` region of `source` to an `h×w` RGB raster (bilinear).
pub fn crop_resize(source: &Raster, crop: CropRect, h: usize, w: usize) -> Raster {
    let mut out = Raster::zeros(h, w, 3);
    let sh = source.height() as f32;
    let sw = source.width() as f32;
    for y in 0..h {
        for x in 0..w {
            let fy = (crop.y as f32 + (y as f32 + 0.5) / h as f32 * crop.height as f32) * sh - 0.5;
            let fx = (crop.x as f32 + (x as f32 + 0.5) / w as f32 * crop.width as f32) * sw - 0.5;
            let fy = fy.clamp(0.0, sh - 1.0);
            let fx = fx.clamp(0.0, sw - 1.0);
            for c in 0..3 {
                out.set(y, x, c, source.sample_bilinear(fy, fx, c, 0.0));
            }
        }
    }
    out
}
