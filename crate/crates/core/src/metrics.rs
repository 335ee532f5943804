//! Goodness-of-fit measures: R², RMSE and MSE.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub r2: f64,
    /// Same units as the target (μC/cm² for polarization).
    pub rmse: f64,
    pub n: usize,
}

impl FitReport {
    pub fn compute(pred: &[f64], target: &[f64]) -> Result<Self> {
        Ok(FitReport {
            r2: r_squared(pred, target)?,
            rmse: rmse(pred, target)?,
            n: target.len(),
        })
    }
}

fn check_lengths(pred: &[f64], target: &[f64], min: usize) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::shape(target.len(), pred.len()));
    }
    if target.len() < min {
        return Err(Error::domain(format!(
            "need at least {min} points, got {}",
            target.len()
        )));
    }
    Ok(())
}

/// Mean squared error `(1/n)·Σ(y − ŷ)²`.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target, 1)?;
    let ss: f64 = pred.iter().zip(target).map(|(p, t)| (t - p).powi(2)).sum();
    Ok(ss / target.len() as f64)
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    mse(pred, target).map(f64::sqrt)
}

/// Coefficient of determination `1 − SS_res/SS_tot`, with `SS_tot` taken
/// about the target mean.
pub fn r_squared(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target, 2)?;
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let ss_tot: f64 = target.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::domain("undefined R²: target is constant"));
    }
    let ss_res: f64 = pred.iter().zip(target).map(|(p, t)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}
