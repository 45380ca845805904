//! Reconstruction scores over a time series of grids: MAE, spatial
//! correlation, normalized bias and coverage.
//!
//! Accuracy metrics use pixels valid in both prediction and truth; coverage
//! is reported separately. Sums use pairwise reduction so results do not
//! depend on how the work was split.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::IntensityGrid;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction and truth differ: {0}")]
    Shape(String),
    #[error("{0} is undefined for this series")]
    Undefined(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: Option<f64>,
    pub rho: Option<f64>,
    pub nbias: Option<f64>,
    /// Percent.
    pub coverage: f64,
    /// Time steps skipped in ρ because a field was constant.
    pub degenerate_steps: usize,
    /// Time steps skipped in NBias because the mean prediction was zero.
    pub zero_mean_steps: usize,
}

/// Pairwise (tree) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1..=8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

fn check(pred: &[IntensityGrid], truth: &[IntensityGrid]) -> Result<(), EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::Shape(format!("{} vs {} time steps", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(EvalError::Shape("empty series".into()));
    }
    for (t, (p, r)) in pred.iter().zip(truth).enumerate() {
        if p.spec != r.spec {
            return Err(EvalError::Shape(format!("grid specs differ at step {t}")));
        }
    }
    Ok(())
}

/// Paired (prediction, truth) values on the joint valid mask.
fn paired(p: &IntensityGrid, r: &IntensityGrid) -> (Vec<f64>, Vec<f64>) {
    let mut a = Vec::with_capacity(p.values.len());
    let mut b = Vec::with_capacity(p.values.len());
    for i in 0..p.values.len() {
        if p.valid[i] && r.valid[i] {
            a.push(p.values[i]);
            b.push(r.values[i]);
        }
    }
    (a, b)
}

pub fn mae(pred: &[IntensityGrid], truth: &[IntensityGrid]) -> Result<f64, EvalError> {
    check(pred, truth)?;
    let per_step: Vec<f64> = pred
        .iter()
        .zip(truth)
        .filter_map(|(p, r)| {
            let (a, b) = paired(p, r);
            if a.is_empty() {
                return None;
            }
            let abs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
            Some(mean(&abs))
        })
        .collect();
    if per_step.is_empty() {
        return Err(EvalError::Undefined("MAE"));
    }
    Ok(mean(&per_step))
}

/// Spatial Pearson coefficient on the joint mask; `None` when either field
/// is constant there.
pub fn spatial_correlation(p: &IntensityGrid, r: &IntensityGrid) -> Option<f64> {
    let (a, b) = paired(p, r);
    if a.len() < 2 {
        return None;
    }
    let (ma, mb) = (mean(&a), mean(&b));
    let da: Vec<f64> = a.iter().map(|x| x - ma).collect();
    let db: Vec<f64> = b.iter().map(|y| y - mb).collect();
    let sab = pairwise_sum(&da.iter().zip(&db).map(|(x, y)| x * y).collect::<Vec<_>>());
    let saa = pairwise_sum(&da.iter().map(|x| x * x).collect::<Vec<_>>());
    let sbb = pairwise_sum(&db.iter().map(|y| y * y).collect::<Vec<_>>());
    let tiny = |s: f64, m: f64| !(s > 1e-24 * (m * m).max(f64::MIN_POSITIVE) * a.len() as f64);
    if tiny(saa, ma) || tiny(sbb, mb) {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Mean spatial correlation and the number of skipped constant steps.
pub fn correlation_metric(pred: &[IntensityGrid], truth: &[IntensityGrid]) -> Result<(f64, usize), EvalError> {
    check(pred, truth)?;
    let per_step: Vec<Option<f64>> = pred.iter().zip(truth).map(|(p, r)| spatial_correlation(p, r)).collect();
    let kept: Vec<f64> = per_step.iter().flatten().copied().collect();
    let skipped = per_step.len() - kept.len();
    if skipped > 0 {
        log::debug!("correlation: {skipped} constant time steps skipped");
    }
    if kept.is_empty() {
        return Err(EvalError::Undefined("correlation"));
    }
    Ok((mean(&kept), skipped))
}

/// Mean over steps of mean(truth − pred)/mean(pred), and the number of
/// steps skipped for a zero mean prediction. Positive means under-prediction.
pub fn nbias(pred: &[IntensityGrid], truth: &[IntensityGrid]) -> Result<(f64, usize), EvalError> {
    check(pred, truth)?;
    let mut kept = Vec::new();
    let mut skipped = 0;
    for (p, r) in pred.iter().zip(truth) {
        let (a, b) = paired(p, r);
        if a.is_empty() {
            continue;
        }
        let mp = mean(&a);
        if mp == 0.0 {
            skipped += 1;
            continue;
        }
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
        kept.push(mean(&diff) / mp);
    }
    if skipped > 0 {
        log::warn!("nbias: {skipped} time steps with zero mean prediction skipped");
    }
    if kept.is_empty() {
        return Err(EvalError::Undefined("NBias"));
    }
    Ok((mean(&kept), skipped))
}

/// Percentage of valid cells.
pub fn coverage(grid: &IntensityGrid) -> f64 {
    if grid.valid.is_empty() {
        return 0.0;
    }
    100.0 * grid.valid_count() as f64 / grid.valid.len() as f64
}

/// All four metrics; undefined accuracy metrics are left empty.
pub fn evaluate(pred: &[IntensityGrid], truth: &[IntensityGrid]) -> Result<MetricsReport, EvalError> {
    check(pred, truth)?;
    let (rho, degenerate_steps) = match correlation_metric(pred, truth) {
        Ok((r, s)) => (Some(r), s),
        Err(_) => (None, pred.len()),
    };
    let (nb, zero_mean_steps) = match nbias(pred, truth) {
        Ok((b, s)) => (Some(b), s),
        Err(_) => (None, pred.len()),
    };
    let cov: Vec<f64> = pred.iter().map(coverage).collect();
    Ok(MetricsReport {
        mae: mae(pred, truth).ok(),
        rho,
        nbias: nb,
        coverage: mean(&cov),
        degenerate_steps,
        zero_mean_steps,
    })
}
