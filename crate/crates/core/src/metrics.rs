//! Extrapolation metrics and the fitting loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An observed value and its prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionPair {
    pub y: f64,
    pub yhat: f64,
}

impl PredictionPair {
    pub fn new(y: f64, yhat: f64) -> Self {
        Self { y, yhat }
    }
}

pub fn pairs(y: &[f64], yhat: &[f64]) -> Vec<PredictionPair> {
    y.iter()
        .zip(yhat)
        .map(|(&y, &yhat)| PredictionPair { y, yhat })
        .collect()
}

fn squared_log_errors(pairs: &[PredictionPair]) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::Domain("metric needs at least one pair".into()));
    }
    pairs
        .iter()
        .map(|p| {
            if p.y > 0.0 && p.yhat > 0.0 && p.y.is_finite() && p.yhat.is_finite() {
                let e = p.y.ln() - p.yhat.ln();
                Ok(e * e)
            } else {
                Err(Error::Domain(format!(
                    "log error needs positive values, got y = {}, yhat = {}",
                    p.y, p.yhat
                )))
            }
        })
        .collect()
}

/// Root mean squared log error.
pub fn rmsle(pairs: &[PredictionPair]) -> Result<f64> {
    let errors = squared_log_errors(pairs)?;
    Ok((errors.iter().sum::<f64>() / errors.len() as f64).sqrt())
}

/// Root standard log error: `sqrt(mu + sigma / sqrt(N)) - sqrt(mu)` over the
/// squared log errors, with the sample standard deviation `sigma`. Zero for a
/// single pair.
pub fn root_standard_log_error(pairs: &[PredictionPair]) -> Result<f64> {
    let errors = squared_log_errors(pairs)?;
    let n = errors.len() as f64;
    if errors.len() == 1 {
        return Ok(0.0);
    }
    let mu = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mu) * (e - mu)).sum::<f64>() / (n - 1.0);
    let sigma = var.sqrt();
    Ok(((mu + sigma / n.sqrt()).sqrt() - mu.sqrt()).max(0.0))
}

/// Mean squared difference of `ln(1 + y)`, the loss minimised during fitting.
pub fn stable_msle(pairs: &[PredictionPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Domain("metric needs at least one pair".into()));
    }
    let mut sum = 0.0;
    for p in pairs {
        if !(p.y > -1.0 && p.yhat > -1.0) {
            return Err(Error::Domain(format!(
                "stable MSLE needs values above -1, got y = {}, yhat = {}",
                p.y, p.yhat
            )));
        }
        let e = p.y.ln_1p() - p.yhat.ln_1p();
        sum += e * e;
    }
    Ok(sum / pairs.len() as f64)
}
