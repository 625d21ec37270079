//! Scoring functions over prediction/target vectors: mean absolute error,
//! coefficient of determination, and the explained-variance score.
//! Variances are population (divide by n) throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three scores reported for every evaluated model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variance: f64,
    pub r2: f64,
    pub mae: f64,
}

fn check_lengths(pred: &[f64], target: &[f64], context: &str) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::EmptyInput {
            context: context.to_string(),
        });
    }
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            pred: pred.len(),
            target: target.len(),
        });
    }
    Ok(())
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Mean absolute error.
pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target, "mae")?;
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Coefficient of determination:
/// `1 - sum((target - pred)^2) / sum((target - mean(target))^2)`.
pub fn r2_score(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target, "r2_score")?;
    if pred.len() < 2 {
        return Err(Error::EmptyInput {
            context: "r2_score needs at least two points".to_string(),
        });
    }
    let ss_tot = population_variance(target) * target.len() as f64;
    if ss_tot == 0.0 {
        return Err(Error::ZeroTargetVariance);
    }
    let ss_res: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (t - p) * (t - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Explained-variance score: `1 - Var(target - pred) / Var(target)`.
/// Unlike R² this ignores a constant bias in the predictions.
pub fn explained_variance(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target, "explained_variance")?;
    if pred.len() < 2 {
        return Err(Error::EmptyInput {
            context: "explained_variance needs at least two points".to_string(),
        });
    }
    let var_target = population_variance(target);
    if var_target == 0.0 {
        return Err(Error::ZeroTargetVariance);
    }
    let residuals: Vec<f64> = target.iter().zip(pred).map(|(t, p)| t - p).collect();
    Ok(1.0 - population_variance(&residuals) / var_target)
}

/// All three scores at once.
pub fn score(pred: &[f64], target: &[f64]) -> Result<EvalReport> {
    Ok(EvalReport {
        variance: explained_variance(pred, target)?,
        r2: r2_score(pred, target)?,
        mae: mae(pred, target)?,
    })
}
