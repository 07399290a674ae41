use std::io::Cursor;
use std::path::Path;

use super::linear::LinearPredictor;
use super::neural::NeuralPredictor;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::stats::DatasetStats;

pub const SET_MAGIC: &[u8; 4] = b"AEPS";
pub const SET_VERSION: u32 = 1;

/// Both fitted regressors with the reference statistics their inputs are
/// measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSet {
    pub ori_stats: DatasetStats,
    pub linear: LinearPredictor,
    pub neural: NeuralPredictor,
}

impl PredictorSet {
    pub fn new(ori_stats: DatasetStats, linear: LinearPredictor, neural: NeuralPredictor) -> Result<Self> {
        if neural.feature_dim() != ori_stats.dim() {
            return Err(Error::Shape(format!(
                "neural predictor dim {} does not match reference dim {}",
                neural.feature_dim(),
                ori_stats.dim()
            )));
        }
        Ok(Self {
            ori_stats,
            linear,
            neural,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::new(Vec::new());
        w.magic(SET_MAGIC)?;
        w.u32(SET_VERSION)?;
        w.f64(self.linear.w0)?;
        w.f64(self.linear.w1)?;
        w.blob(&self.ori_stats.to_bytes()?)?;
        w.blob(&self.neural.to_bytes()?)?;
        Ok(w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(Cursor::new(bytes));
        r.expect_magic(SET_MAGIC)?;
        r.expect_version(SET_VERSION)?;
        let w0 = r.f64("intercept")?;
        let w1 = r.f64("slope")?;
        let linear = LinearPredictor::new(w0, w1).map_err(|e| Error::Validation(e.to_string()))?;
        let ori_stats = DatasetStats::from_bytes(&r.blob("reference statistics")?)?;
        let neural = NeuralPredictor::from_bytes(&r.blob("neural predictor")?)?;
        r.finish()?;
        Self::new(ori_stats, linear, neural)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
