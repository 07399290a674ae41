use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `H×W×C` image with channel values in `[0, 1]`, stored row-major with
/// interleaved channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Raster {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height * width * channels != data.len() {
            return Err(Error::Shape(format!(
                "{height}x{width}x{channels} raster needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn filled(shape: Shape, value: f32) -> Self {
        Self {
            height: shape.height,
            width: shape.width,
            channels: shape.channels,
            data: vec![value; shape.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        Shape {
            height: self.height,
            width: self.width,
            channels: self.channels,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Bilinear sample at fractional pixel coordinates; outside the image
    /// returns `fill`.
    pub fn sample_bilinear(&self, y: f32, x: f32, c: usize, fill: f32) -> f32 {
        let h = self.height as f32;
        let w = self.width as f32;
        if y < -1.0 || x < -1.0 || y > h || x > w {
            return fill;
        }
        let y0 = y.floor();
        let x0 = x.floor();
        let fy = y - y0;
        let fx = x - x0;
        let px = |yy: f32, xx: f32| -> f32 {
            if yy < 0.0 || xx < 0.0 || yy >= h || xx >= w {
                fill
            } else {
                self.get(yy as usize, xx as usize, c)
            }
        };
        let top = px(y0, x0) * (1.0 - fx) + px(y0, x0 + 1.0) * fx;
        let bottom = px(y0 + 1.0, x0) * (1.0 - fx) + px(y0 + 1.0, x0 + 1.0) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Replicate a single-channel raster to `channels` channels.
    pub fn replicate_channels(&self, channels: usize) -> Result<Raster> {
        if self.channels != 1 {
            return Err(Error::Shape(format!(
                "can only replicate single-channel rasters, got {} channels",
                self.channels
            )));
        }
        let data = self
            .data
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, channels))
            .collect();
        Raster::new(self.height, self.width, channels, data)
    }

    pub fn clamp_unit(&mut self) {
        for v in self.data.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Little-endian bytes of the pixel values, used for hashing and equality checks.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Images with class labels in `[0, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    images: Vec<Raster>,
    labels: Vec<u32>,
    classes: usize,
}

impl LabeledImageSet {
    pub fn new(images: Vec<Raster>, labels: Vec<u32>, classes: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if classes < 2 {
            return Err(Error::Parameter(format!("need at least 2 classes, got {classes}")));
        }
        if let Some(first) = images.first() {
            let shape = first.shape();
            if images.iter().any(|im| im.shape() != shape) {
                return Err(Error::Shape("images do not share one shape".into()));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Parameter(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(Self {
            images,
            labels,
            classes,
        })
    }

    pub fn images(&self) -> &[Raster] {
        &self.images
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn shape(&self) -> Option<Shape> {
        self.images.first().map(Raster::shape)
    }

    /// First `per_class` images of every class, keeping the original order.
    pub fn balanced_subset(&self, per_class: usize) -> LabeledImageSet {
        let mut taken = vec![0usize; self.classes];
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for (im, &l) in self.images.iter().zip(&self.labels) {
            if taken[l as usize] < per_class {
                taken[l as usize] += 1;
                images.push(im.clone());
                labels.push(l);
            }
        }
        LabeledImageSet {
            images,
            labels,
            classes: self.classes,
        }
    }

    pub fn into_parts(self) -> (Vec<Raster>, Vec<u32>, usize) {
        (self.images, self.labels, self.classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_interpolates_and_fills() {
        let r = Raster::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(r.sample_bilinear(0.0, 0.5, 0, 0.0), 0.5);
        assert_eq!(r.sample_bilinear(0.0, 1.0, 0, 0.0), 1.0);
        assert_eq!(r.sample_bilinear(5.0, 5.0, 0, 0.25), 0.25);
    }

    #[test]
    fn replicate_to_rgb() {
        let g = Raster::new(1, 2, 1, vec![0.2, 0.7]).unwrap();
        let rgb = g.replicate_channels(3).unwrap();
        assert_eq!(rgb.data(), &[0.2, 0.2, 0.2, 0.7, 0.7, 0.7]);
    }

    #[test]
    fn set_validation() {
        let im = Raster::zeros(2, 2, 1);
        assert!(LabeledImageSet::new(vec![im.clone()], vec![], 2).is_err());
        assert!(LabeledImageSet::new(vec![im.clone()], vec![3], 2).is_err());
        assert!(LabeledImageSet::new(vec![im.clone(), Raster::zeros(3, 2, 1)], vec![0, 1], 2).is_err());
        assert!(LabeledImageSet::new(vec![im], vec![1], 2).is_ok());
    }
}
