use crate::classifier::FeatureBundle;
use crate::error::{Error, Result};

/// Fraction of rows whose largest softmax entry is strictly above `tau`.
pub fn predict_confidence(bundle: &FeatureBundle, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Parameter(format!("threshold must be in (0, 1), got {tau}")));
    }
    if bundle.is_empty() {
        return Err(Error::InsufficientData("empty bundle".into()));
    }
    let confident = bundle
        .softmax_rows()
        .filter(|row| row.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64 > tau)
        .count();
    Ok(confident as f64 / bundle.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(maxima: &[f32]) -> FeatureBundle {
        let softmax = maxima.iter().flat_map(|&m| [m, 1.0 - m]).collect();
        FeatureBundle::new(vec![0.0; maxima.len()], softmax, 1, 2, None, "t").unwrap()
    }

    #[test]
    fn counts_rows_above_threshold() {
        assert_eq!(predict_confidence(&bundle(&[1.0, 1.0]), 0.9).unwrap(), 1.0);
        let b = bundle(&[0.95, 0.5, 0.8]);
        assert!((predict_confidence(&b, 0.7).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(predict_confidence(&b, 0.9).unwrap() <= predict_confidence(&b, 0.7).unwrap());
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(predict_confidence(&bundle(&[0.75, 0.75]), 0.75).unwrap(), 0.0);
    }

    #[test]
    fn rejects_out_of_range_tau() {
        let b = bundle(&[0.6, 0.9]);
        for tau in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(predict_confidence(&b, tau), Err(Error::Parameter(_))));
        }
    }
}
