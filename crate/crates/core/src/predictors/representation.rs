use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::stats::{frechet_distance, DatasetStats, COV_SYMMETRY_TOL};

/// Inputs of the neural predictor before the learned covariance reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRepresentation {
    pub fd: f64,
    pub mean: Vector,
    pub cov: Matrix,
}

impl DatasetRepresentation {
    pub fn new(fd: f64, mean: Vector, cov: Matrix) -> Result<Self> {
        if !(fd >= 0.0) || !fd.is_finite() {
            return Err(Error::Validation(format!("fd must be finite and non-negative, got {fd}")));
        }
        if !cov.is_square() || cov.rows() != mean.dim() {
            return Err(Error::Shape(format!(
                "covariance {}x{} does not match mean dim {}",
                cov.rows(),
                cov.cols(),
                mean.dim()
            )));
        }
        if !cov.is_symmetric(COV_SYMMETRY_TOL) {
            return Err(Error::Validation("covariance is not symmetric".into()));
        }
        Ok(Self { fd, mean, cov })
    }

    /// Pair already-computed statistics with their distance to the reference.
    pub fn from_stats(fd: f64, stats: &DatasetStats) -> Result<Self> {
        Self::new(fd, stats.mean().clone(), stats.cov().clone())
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }
}

pub fn assemble_representation(stats: &DatasetStats, ori_stats: &DatasetStats) -> Result<DatasetRepresentation> {
    let fd = frechet_distance(ori_stats, stats)?;
    DatasetRepresentation::from_stats(fd, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::compute_stats;

    fn stats(shift: f64) -> DatasetStats {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| (0..3).map(|j| ((i * 7 + j * 3) % 11) as f64 + shift).collect())
            .collect();
        compute_stats(&rows).unwrap()
    }

    #[test]
    fn self_representation_has_zero_fd() {
        let s = stats(0.0);
        let rep = assemble_representation(&s, &s).unwrap();
        assert!(rep.fd < 1e-9);
        assert_eq!(&rep.mean, s.mean());
        assert_eq!(rep.dim(), 3);
        assert!(assemble_representation(&stats(1.0), &s).unwrap().fd > 1.0);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let other = compute_stats(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert!(matches!(assemble_representation(&other, &stats(0.0)), Err(Error::Shape(_))));
    }
}
