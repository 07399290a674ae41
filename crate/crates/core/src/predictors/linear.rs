use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Huber transition point in units of the robust residual scale.
pub const HUBER_DELTA: f64 = 1.345;
const MAX_ITERATIONS: usize = 100;
const TOLERANCE: f64 = 1e-9;
// MAD to standard deviation for Gaussian residuals
const MAD_SCALE: f64 = 0.6745;

/// `accuracy ≈ w1·fd + w0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub w0: f64,
    pub w1: f64,
}

impl LinearPredictor {
    pub fn new(w0: f64, w1: f64) -> Result<Self> {
        if !w0.is_finite() || !w1.is_finite() {
            return Err(Error::Numerical(format!("non-finite linear weights ({w0}, {w1})")));
        }
        Ok(Self { w0, w1 })
    }

    /// Prediction before clamping.
    pub fn raw(&self, fd: f64) -> f64 {
        self.w1 * fd + self.w0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub predictor: LinearPredictor,
    pub iterations: usize,
    pub converged: bool,
}

pub fn predict_linear(p: &LinearPredictor, fd: f64) -> f64 {
    p.raw(fd).clamp(0.0, 1.0)
}

fn weighted_line(points: &[(f64, f64)], weights: &[f64]) -> Result<(f64, f64)> {
    let sw: f64 = weights.iter().sum();
    let mx = points.iter().zip(weights).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let my = points.iter().zip(weights).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((x, y), w) in points.iter().zip(weights) {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateInput("no weighted spread in fd".into()));
    }
    let w1 = sxy / sxx;
    Ok((my - w1 * mx, w1))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Huber regression by iteratively reweighted least squares, starting from
/// the ordinary least-squares line. The residual scale is re-estimated from
/// the median absolute deviation at every step.
pub fn fit_linear_report(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "linear fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Numerical("non-finite training point".into()));
    }
    let x0 = points[0].0;
    if points.iter().all(|p| p.0 == x0) {
        return Err(Error::DegenerateInput("fd has zero variance".into()));
    }
    let mut weights = vec![1.0; points.len()];
    let (mut w0, mut w1) = weighted_line(points, &weights)?;
    for it in 1..=MAX_ITERATIONS {
        let resid: Vec<f64> = points.iter().map(|(x, y)| y - (w1 * x + w0)).collect();
        let centre = median(resid.clone());
        let scale = median(resid.iter().map(|r| (r - centre).abs()).collect()) / MAD_SCALE;
        let y_mag = points.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
        if scale <= 1e-12 * (1.0 + y_mag) {
            // at least half the points sit on the current line
            return Ok(LinearFit {
                predictor: LinearPredictor::new(w0, w1)?,
                iterations: it,
                converged: true,
            });
        }
        for (w, r) in weights.iter_mut().zip(&resid) {
            let u = (r / scale).abs();
            *w = if u <= HUBER_DELTA { 1.0 } else { HUBER_DELTA / u };
        }
        let (n0, n1) = weighted_line(points, &weights)?;
        let change = (n0 - w0).abs().max((n1 - w1).abs());
        w0 = n0;
        w1 = n1;
        if change < TOLERANCE {
            return Ok(LinearFit {
                predictor: LinearPredictor::new(w0, w1)?,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(LinearFit {
        predictor: LinearPredictor::new(w0, w1)?,
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}

/// As [`fit_linear_report`], returning the last iterate with a warning when
/// the iteration cap is hit.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<LinearPredictor> {
    let fit = fit_linear_report(points)?;
    if !fit.converged {
        log::warn!("robust linear fit stopped after {} iterations without converging", fit.iterations);
    }
    Ok(fit.predictor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // closed-form least squares, independent of the weighted solver
    fn ols_slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn recovers_exact_line() {
        let pts: Vec<_> = (0..30).map(|i| {
            let fd = i as f64 * 13.0;
            (fd, 0.9 - 0.001 * fd)
        }).collect();
        let p = fit_linear(&pts).unwrap();
        assert!((p.w0 - 0.9).abs() < 1e-6 && (p.w1 + 0.001).abs() < 1e-6);
    }

    #[test]
    fn flat_target_gives_zero_slope() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 0.7)).collect();
        let p = fit_linear(&pts).unwrap();
        assert!(p.w1.abs() < 1e-12 && (p.w0 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn prediction_arithmetic_and_clamp() {
        let p = LinearPredictor::new(0.9, -0.001).unwrap();
        assert!((predict_linear(&p, 100.0) - 0.8).abs() < 1e-12);
        assert_eq!(predict_linear(&p, 0.0), 0.9);
        assert_eq!(predict_linear(&LinearPredictor::new(1.2, 0.0).unwrap(), 37.0), 1.0);
        assert!(p.raw(10.0) > p.raw(20.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(fit_linear(&[(1.0, 0.5), (2.0, 0.4)]), Err(Error::InsufficientData(_))));
        assert!(matches!(
            fit_linear(&[(3.0, 0.5), (3.0, 0.4), (3.0, 0.1)]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(LinearPredictor::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn huber_resists_gross_outliers() {
        for trial in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
            let (w0, w1) = (0.95, -0.002);
            let mut pts: Vec<(f64, f64)> = (0..100)
                .map(|_| {
                    let fd = rng.gen_range(0.0..300.0);
                    (fd, w0 + w1 * fd + rng.gen_range(-0.02..0.02))
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            for p in pts.iter_mut().rev().take(10) {
                p.1 += 0.5;
            }
            let huber = (fit_linear(&pts).unwrap().w1 - w1).abs();
            let ols = (ols_slope(&pts) - w1).abs();
            assert!(huber <= ols / 3.0, "trial {trial}: huber {huber:.2e} ols {ols:.2e}");
        }
    }
}
