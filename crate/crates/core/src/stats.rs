//! Dataset statistics and the scalar metrics built on them: Fréchet distance,
//! Spearman rank correlation, RMSE and MAE.

use std::io::Cursor;

use serde::{Deserialize, Serialize};

use crate::codec::{to_u32, Reader, Writer};
use crate::error::{Error, Result};
use crate::linalg::{sqrtm_psd, trace_sqrtm_psd, Matrix, Vector};

/// Relative asymmetry allowed in a stored covariance.
pub const COV_SYMMETRY_TOL: f64 = 1e-9;

/// Mean, covariance and image count of a set of feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    mean: Vector,
    cov: Matrix,
    count: u64,
}

impl DatasetStats {
    pub fn new(mean: Vector, cov: Matrix, count: u64) -> Result<Self> {
        if !cov.is_square() || cov.rows() != mean.dim() {
            return Err(Error::Shape(format!(
                "covariance {}x{} does not match mean dim {}",
                cov.rows(),
                cov.cols(),
                mean.dim()
            )));
        }
        if !cov.is_symmetric(COV_SYMMETRY_TOL) {
            return Err(Error::Validation(format!(
                "covariance asymmetry {:.3e} exceeds tolerance",
                cov.asymmetry()
            )));
        }
        if count < 2 {
            return Err(Error::InsufficientData(format!(
                "statistics need at least 2 samples, got {count}"
            )));
        }
        Ok(Self { mean, cov, count })
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    /// Binary form: magic `AEST`, version, count (u64), dim (u32), then the
    /// mean and the row-major covariance as little-endian `f64`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let d = self.dim();
        let mut w = Writer::new(Vec::with_capacity(20 + 8 * (d + d * d)));
        w.magic(STATS_MAGIC)?;
        w.u32(STATS_VERSION)?;
        w.u64(self.count)?;
        w.u32(to_u32(d, "dim")?)?;
        w.f64s(self.mean.as_slice())?;
        w.f64s(self.cov.as_slice())?;
        Ok(w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(Cursor::new(bytes));
        r.expect_magic(STATS_MAGIC)?;
        r.expect_version(STATS_VERSION)?;
        let count = r.u64("count")?;
        let d = r.u32("dim")? as usize;
        if bytes.len() != 20 + 8 * (d + d * d) {
            return Err(Error::Format(format!(
                "stats payload is {} bytes, header implies {}",
                bytes.len().saturating_sub(20),
                8 * (d + d * d)
            )));
        }
        let mean = Vector::new(r.f64_vec(d, "mean")?)?;
        let cov = Matrix::new(d, d, r.f64_vec(d * d, "covariance")?)?;
        r.finish()?;
        Self::new(mean, cov, count)
    }
}

const STATS_MAGIC: &[u8; 4] = b"AEST";
const STATS_VERSION: u32 = 1;

/// Mean and unbiased (M−1) covariance of the given feature rows.
///
/// Uses a running co-moment update in `f64`; the result is symmetrized once
/// accumulation is done.
pub fn compute_stats<R, T>(features: &[R]) -> Result<DatasetStats>
where
    R: AsRef<[T]>,
    T: Copy + Into<f64>,
{
    if features.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 feature vectors, got {}",
            features.len()
        )));
    }
    let d = features[0].as_ref().len();
    let mut mean = vec![0.0f64; d];
    let mut comoment = vec![0.0f64; d * d];
    let mut delta = vec![0.0f64; d];
    let mut x = vec![0.0f64; d];
    for (n, row) in features.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != d {
            return Err(Error::Shape(format!(
                "feature {n} has dim {}, expected {d}",
                row.len()
            )));
        }
        let inv = 1.0 / (n + 1) as f64;
        for k in 0..d {
            x[k] = row[k].into();
            if !x[k].is_finite() {
                return Err(Error::Numerical(format!("feature {n} has non-finite entries")));
            }
            delta[k] = x[k] - mean[k];
            mean[k] += delta[k] * inv;
        }
        for i in 0..d {
            let di = delta[i];
            let crow = &mut comoment[i * d..(i + 1) * d];
            for j in 0..d {
                crow[j] += di * (x[j] - mean[j]);
            }
        }
    }
    let m = features.len();
    let denom = 1.0 / (m - 1) as f64;
    let mut cov = Matrix::new(d, d, comoment.into_iter().map(|c| c * denom).collect())?;
    cov.symmetrize();
    DatasetStats::new(Vector::new(mean)?, cov, m as u64)
}

/// `‖μa−μb‖² + Tr(Σa + Σb − 2(Σa Σb)^{1/2})`, clamped at zero.
///
/// The product root's trace is taken as `Tr((Σa^{1/2} Σb Σa^{1/2})^{1/2})`,
/// which has the same eigenvalues and only needs PSD square roots.
pub fn frechet_distance(a: &DatasetStats, b: &DatasetStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "statistics dims differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mean_term = a.mean.squared_distance(&b.mean)?;
    let root_a = sqrtm_psd(&a.cov)?;
    let mut inner = root_a.matmul(&b.cov)?.matmul(&root_a)?;
    inner.symmetrize();
    let cross = trace_sqrtm_psd(&inner)?;
    let fd = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    if !fd.is_finite() {
        return Err(Error::Numerical("Fréchet distance is not finite".into()));
    }
    Ok(fd.max(0.0))
}

/// Ranks starting at 1; tied values share the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's ρ: Pearson correlation of the average ranks.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InsufficientData(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rank correlation needs at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("rank correlation input is not finite".into()));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput(
            "rank variance is zero (all values tied)".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_pairs(preds: &[f64], truths: &[f64]) -> Result<()> {
    if preds.is_empty() || preds.len() != truths.len() {
        return Err(Error::InsufficientData(format!(
            "need equal nonzero lengths, got {} and {}",
            preds.len(),
            truths.len()
        )));
    }
    Ok(())
}

pub fn rmse(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check_pairs(preds, truths)?;
    let sq: f64 = preds.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sq / preds.len() as f64).sqrt())
}

pub fn mae(preds: &[f64], truths: &[f64]) -> Result<f64> {
    check_pairs(preds, truths)?;
    let abs: f64 = preds.iter().zip(truths).map(|(p, t)| (p - t).abs()).sum();
    Ok(abs / preds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stats_1d(mean: f64, var: f64) -> DatasetStats {
        DatasetStats::new(
            Vector::new(vec![mean]).unwrap(),
            Matrix::new(1, 1, vec![var]).unwrap(),
            10,
        )
        .unwrap()
    }

    /// Plain two-pass mean then covariance.
    fn two_pass(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let m = rows.len();
        let d = rows[0].len();
        let mut mean = vec![0.0; d];
        for r in rows {
            for k in 0..d {
                mean[k] += r[k];
            }
        }
        for v in mean.iter_mut() {
            *v /= m as f64;
        }
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let s: f64 = rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum();
                cov[i * d + j] = s / (m - 1) as f64;
            }
        }
        (mean, cov)
    }

    #[test]
    fn two_point_stats() {
        let s = compute_stats(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(s.mean().as_slice(), &[1.0, 1.0]);
        assert_eq!(s.cov().as_slice(), &[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(s.count(), 2);
    }

    #[test]
    fn binary_round_trip() {
        let s = compute_stats(&[vec![0.0, 1.5], vec![2.0, -2.0], vec![0.25, 0.0]]).unwrap();
        let bytes = s.to_bytes().unwrap();
        assert_eq!(DatasetStats::from_bytes(&bytes).unwrap(), s);
        assert!(matches!(
            DatasetStats::from_bytes(&bytes[..bytes.len() - 8]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn constant_rows_have_zero_covariance() {
        let rows = vec![vec![3.0, -1.0]; 10];
        let s = compute_stats(&rows).unwrap();
        assert_eq!(s.mean().as_slice(), &[3.0, -1.0]);
        assert!(s.cov().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let rows: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect())
                .collect();
            let s = compute_stats(&rows).unwrap();
            let (mean, cov) = two_pass(&rows);
            for (a, b) in s.mean().as_slice().iter().zip(&mean) {
                assert!((a - b).abs() <= 1e-10);
            }
            for (a, b) in s.cov().as_slice().iter().zip(&cov) {
                assert!((a - b).abs() <= 1e-10);
            }
            assert!(s.cov().is_symmetric(0.0));
        }
    }

    #[test]
    fn accepts_f32_rows() {
        let rows: Vec<Vec<f32>> = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]];
        let s = compute_stats(&rows).unwrap();
        assert_eq!(s.mean().as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn stats_errors() {
        assert!(matches!(
            compute_stats(&[vec![1.0f64]]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            compute_stats(&[vec![1.0f64], vec![1.0, 2.0]]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn fd_closed_forms() {
        let a = stats_1d(0.0, 1.0);
        assert!(frechet_distance(&a, &a).unwrap().abs() < 1e-12);
        assert!((frechet_distance(&a, &stats_1d(1.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((frechet_distance(&stats_1d(0.0, 4.0), &a).unwrap() - 1.0).abs() < 1e-12);

        let b = DatasetStats::new(
            Vector::new(vec![0.0, 0.0]).unwrap(),
            Matrix::identity(2),
            10,
        )
        .unwrap();
        let c = DatasetStats::new(
            Vector::new(vec![1.0, 1.0]).unwrap(),
            Matrix::from_diag(&[4.0, 4.0]),
            10,
        )
        .unwrap();
        assert!((frechet_distance(&b, &c).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn fd_dimension_mismatch() {
        let b = DatasetStats::new(Vector::zeros(2), Matrix::identity(2), 3).unwrap();
        assert!(matches!(
            frechet_distance(&stats_1d(0.0, 1.0), &b),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman_rho(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        let rho = spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap();
        assert!((rho - 0.6).abs() < 1e-12);
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(
            spearman_rho(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn error_metrics() {
        assert_eq!(rmse(&[0.3, 0.5], &[0.3, 0.5]).unwrap(), 0.0);
        assert_eq!(mae(&[0.3, 0.5], &[0.3, 0.5]).unwrap(), 0.0);
        assert!((rmse(&[0.8], &[0.6]).unwrap() - 0.2).abs() < 1e-12);
        assert!((mae(&[0.8], &[0.6]).unwrap() - 0.2).abs() < 1e-12);
        let r = rmse(&[27.52, 64.11], &[25.46, 64.08]).unwrap();
        assert!((r - 1.46).abs() < 0.005, "{r}");
        assert!(rmse(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = rmse(&p, &t).unwrap();
            let m = mae(&p, &t).unwrap();
            prop_assert!(m >= 0.0);
            prop_assert!(r >= m - 1e-9 * r.max(1.0));
        }

        #[test]
        fn spearman_monotone_invariance(xs in prop::collection::vec(-100f64..100.0, 3..30), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ys: Vec<f64> = xs.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            if let Ok(base) = spearman_rho(&xs, &ys) {
                let warped: Vec<f64> = xs.iter().map(|x| (x / 50.0).exp() * 3.0 + 1.0).collect();
                let cubed: Vec<f64> = ys.iter().map(|y| y * y * y).collect();
                let r = spearman_rho(&warped, &cubed).unwrap();
                prop_assert!((base - r).abs() < 1e-12);
            }
        }

        #[test]
        fn fd_self_zero_and_symmetric(seed in 0u64..200, d in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mk = |rng: &mut ChaCha8Rng| {
                let rows: Vec<Vec<f64>> = (0..(d + 5))
                    .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                    .collect();
                compute_stats(&rows).unwrap()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            prop_assert!(frechet_distance(&a, &a).unwrap() < 1e-9);
            let ab = frechet_distance(&a, &b).unwrap();
            let ba = frechet_distance(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-6 * ab.max(1e-12));
        }
    }
}
