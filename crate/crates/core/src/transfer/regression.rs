use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub pearson_r: f64,
}

/// Mean squared error and Pearson correlation of paired scalars.
pub fn regression_metrics(pred: &[f64], gt: &[f64]) -> Result<RegressionMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} targets",
            pred.len(),
            gt.len()
        )));
    }
    let n = pred.len();
    if n < 2 {
        return Err(Error::invalid("regression metrics need at least 2 pairs"));
    }
    let nf = n as f64;
    let mse = pred.iter().zip(gt).map(|(p, g)| (p - g).powi(2)).sum::<f64>() / nf;
    let mp = pred.iter().sum::<f64>() / nf;
    let mg = gt.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, g) in pred.iter().zip(gt) {
        let (dp, dg) = (p - mp, g - mg);
        sxy += dp * dg;
        sxx += dp * dp;
        syy += dg * dg;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedResult(
            "correlation is undefined for zero-variance input".into(),
        ));
    }
    let pearson_r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(RegressionMetrics { mse, pearson_r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_negated() {
        let gt = [1.0, -2.0, 0.5, 0.5];
        let m = regression_metrics(&gt, &gt).unwrap();
        assert_eq!(m.mse, 0.0);
        assert!((m.pearson_r - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = gt.iter().map(|v| -v).collect();
        let m = regression_metrics(&neg, &gt).unwrap();
        assert!((m.pearson_r + 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(regression_metrics(&[1.0], &[1.0]).is_err());
        assert!(regression_metrics(&[1.0, 2.0], &[1.0]).is_err());
        assert!(matches!(
            regression_metrics(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::UndefinedResult(_))
        ));
    }
}
