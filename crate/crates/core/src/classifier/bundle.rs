use std::fs;
use std::io::Cursor;
use std::path::Path;

use super::mlp::argmax;
use crate::codec::{to_u32, Reader, Writer};
use crate::error::{Error, Result};
use crate::stats::{compute_stats, DatasetStats};

pub const BUNDLE_MAGIC: &[u8; 4] = b"AEFB";
pub const BUNDLE_VERSION: u32 = 1;
// magic, version, row count, feature dim, class count, label flag
const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 4 + 1;

/// Softmax row-sum tolerance for bundles built in memory.
pub const SOFTMAX_TOL: f64 = 1e-6;
/// Softmax row-sum tolerance accepted when importing a file.
pub const IMPORT_SOFTMAX_TOL: f64 = 1e-4;

/// Per-image penultimate features and softmax scores of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    count: usize,
    feature_dim: usize,
    classes: usize,
    /// `count × feature_dim`, row-major.
    features: Vec<f32>,
    /// `count × classes`, row-major.
    softmax: Vec<f32>,
    labels: Option<Vec<u32>>,
    source_id: String,
}

impl FeatureBundle {
    pub fn new(
        features: Vec<f32>,
        softmax: Vec<f32>,
        feature_dim: usize,
        classes: usize,
        labels: Option<Vec<u32>>,
        source_id: &str,
    ) -> Result<Self> {
        Self::validated(features, softmax, feature_dim, classes, labels, source_id, SOFTMAX_TOL)
    }

    fn validated(
        features: Vec<f32>,
        softmax: Vec<f32>,
        feature_dim: usize,
        classes: usize,
        labels: Option<Vec<u32>>,
        source_id: &str,
        tol: f64,
    ) -> Result<Self> {
        if feature_dim == 0 || classes < 2 {
            return Err(Error::Shape(format!(
                "feature dim {feature_dim} / class count {classes} invalid"
            )));
        }
        if !features.len().is_multiple_of(feature_dim) || !softmax.len().is_multiple_of(classes) {
            return Err(Error::Shape("payload length is not a whole number of rows".into()));
        }
        let count = features.len() / feature_dim;
        if softmax.len() / classes != count {
            return Err(Error::Shape(format!(
                "{count} feature rows but {} softmax rows",
                softmax.len() / classes
            )));
        }
        if count < 2 {
            return Err(Error::InsufficientData(format!(
                "a bundle needs at least 2 rows, got {count}"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("features contain non-finite values".into()));
        }
        for (i, row) in softmax.chunks_exact(classes).enumerate() {
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::Validation(format!("softmax row {i} has negative or non-finite entries")));
            }
            let sum: f64 = row.iter().map(|&v| v as f64).sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::Validation(format!(
                    "softmax row {i} sums to {sum}, not 1"
                )));
            }
        }
        if let Some(l) = &labels {
            check_labels(l, count, classes)?;
        }
        Ok(Self {
            count,
            feature_dim,
            classes,
            features,
            softmax,
            labels,
            source_id: source_id.to_string(),
        })
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        check_labels(&labels, self.count, self.classes)?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    pub fn with_source_id(mut self, id: &str) -> Self {
        self.source_id = id.to_string();
        self
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn feature_row(&self, i: usize) -> &[f32] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn feature_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.features.chunks_exact(self.feature_dim)
    }

    pub fn softmax_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.softmax.chunks_exact(self.classes)
    }

    pub fn softmax_row(&self, i: usize) -> &[f32] {
        &self.softmax[i * self.classes..(i + 1) * self.classes]
    }

    /// Mean and covariance of the feature rows.
    pub fn stats(&self) -> Result<DatasetStats> {
        let rows: Vec<&[f32]> = self.feature_rows().collect();
        compute_stats(&rows)
    }

    /// Ground-truth accuracy; fails when the bundle carries no labels.
    pub fn accuracy(&self) -> Result<f64> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::InsufficientData(format!("bundle '{}' has no labels", self.source_id)))?;
        label_accuracy(&self.softmax, self.classes, labels)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::new(Vec::with_capacity(HEADER_LEN + 4 * (self.features.len() + self.softmax.len())));
        w.magic(BUNDLE_MAGIC)?;
        w.u32(BUNDLE_VERSION)?;
        w.u64(self.count as u64)?;
        w.u32(to_u32(self.feature_dim, "feature dim")?)?;
        w.u32(to_u32(self.classes, "class count")?)?;
        w.u8(u8::from(self.labels.is_some()))?;
        w.f32s(&self.features)?;
        w.f32s(&self.softmax)?;
        if let Some(l) = &self.labels {
            w.u32s(l)?;
        }
        Ok(w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8], source_id: &str) -> Result<Self> {
        let mut r = Reader::new(Cursor::new(bytes));
        r.expect_magic(BUNDLE_MAGIC)?;
        r.expect_version(BUNDLE_VERSION)?;
        let count = r.u64("row count")?;
        let feature_dim = r.u32("feature dim")? as usize;
        let classes = r.u32("class count")? as usize;
        let has_labels = match r.u8("label flag")? {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("label flag must be 0 or 1, got {other}"))),
        };
        let count = usize::try_from(count).map_err(|_| Error::Format("row count too large".into()))?;
        if feature_dim == 0 || classes < 2 {
            return Err(Error::Format(format!(
                "header declares feature dim {feature_dim}, {classes} classes"
            )));
        }
        let per_row = 4 * (feature_dim + classes + usize::from(has_labels));
        let payload = bytes.len().saturating_sub(HEADER_LEN);
        if count.checked_mul(per_row) != Some(payload) {
            return Err(Error::Format(format!(
                "payload is {payload} bytes, header implies {}",
                count.saturating_mul(per_row)
            )));
        }
        let features = r.f32_vec(count * feature_dim, "features")?;
        let softmax = r.f32_vec(count * classes, "softmax")?;
        let labels = if has_labels {
            Some(r.u32_vec(count, "labels")?)
        } else {
            None
        };
        r.finish()?;
        Self::validated(features, softmax, feature_dim, classes, labels, source_id, IMPORT_SOFTMAX_TOL)
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

fn check_labels(labels: &[u32], count: usize, classes: usize) -> Result<()> {
    if labels.len() != count {
        return Err(Error::Shape(format!("{} labels for {count} rows", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
        return Err(Error::Validation(format!("label {bad} out of range")));
    }
    Ok(())
}

/// Fraction of rows whose argmax (lowest index on ties) matches the label.
pub fn label_accuracy(softmax: &[f32], classes: usize, labels: &[u32]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InsufficientData("accuracy of an empty set".into()));
    }
    if softmax.len() != labels.len() * classes {
        return Err(Error::Shape("score rows and labels differ in count".into()));
    }
    let correct = softmax
        .chunks_exact(classes)
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l as usize)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Read and validate a bundle file. The source id is the file stem.
pub fn import_feature_bundle(path: &Path) -> Result<FeatureBundle> {
    let bytes = fs::read(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FeatureBundle::from_bytes(&bytes, &id)
}
