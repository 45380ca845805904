//! Network-wide storm detection from simultaneous drops in link signal
//! level. A window is flagged when the mean pairwise Pearson correlation of
//! the per-link ΔA series exceeds a threshold and the mean ΔA falls below
//! −α.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("invalid detection config: {0}")]
    Config(String),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 samples, got {0}")]
    TooShort(usize),
    #[error("need at least 2 links with varying windows, got {0}")]
    InsufficientLinks(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub rho_threshold: f64,
    /// dB/km.
    pub alpha: f64,
    /// Samples per window.
    pub window: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { rho_threshold: 0.7, alpha: 1.0, window: 24 }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.rho_threshold > 0.0 && self.rho_threshold < 1.0) {
            return Err(DetectError::Config(format!("rho_threshold must lie in (0, 1), got {}", self.rho_threshold)));
        }
        if !(self.alpha > 0.0) {
            return Err(DetectError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.window < 3 {
            return Err(DetectError::Config(format!("window must be at least 3, got {}", self.window)));
        }
        Ok(())
    }
}

/// Pearson coefficient, or a marker when either input is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Coefficient(f64),
    Degenerate,
}

impl Correlation {
    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Coefficient(r) => Some(r),
            Correlation::Degenerate => None,
        }
    }
}

pub fn pairwise_correlation(x: &[f64], y: &[f64]) -> Result<Correlation, DetectError> {
    if x.len() != y.len() {
        return Err(DetectError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(DetectError::TooShort(x.len()));
    }
    let (Some(zx), Some(zy)) = (standardize(x), standardize(y)) else {
        return Ok(Correlation::Degenerate);
    };
    let r: f64 = zx.iter().zip(&zy).map(|(a, b)| a * b).sum();
    Ok(Correlation::Coefficient(r.clamp(-1.0, 1.0)))
}

/// Centers `x` and scales it to unit Euclidean norm. `None` if constant.
fn standardize(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    // relative guard so that float residue of a constant series counts as constant
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(norm > 1e-12 * scale * n.sqrt()) {
        return None;
    }
    Some(centered.into_iter().map(|v| v / norm).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub detected: bool,
    pub rho_bar: f64,
    /// Mean ΔA over all links and samples in the window, dB/km.
    pub delta_bar: f64,
    pub usable_links: usize,
}

/// Applies the two-part criterion to one window per link.
///
/// ρ̄ is the mean over nondegenerate unordered pairs, computed from the
/// standardized series z_i as (‖Σz_i‖² − L) / (L(L−1)).
pub fn detect_storm<S: AsRef<[f64]>>(windows: &[S], cfg: &DetectionConfig) -> Result<Detection, DetectError> {
    cfg.validate()?;
    let Some(first) = windows.first() else {
        return Err(DetectError::InsufficientLinks(0));
    };
    let len = first.as_ref().len();
    if len < 3 {
        return Err(DetectError::TooShort(len));
    }
    let mut sum = vec![0.0; len];
    let mut usable = 0usize;
    let mut total = 0.0;
    for w in windows {
        let w = w.as_ref();
        if w.len() != len {
            return Err(DetectError::LengthMismatch(len, w.len()));
        }
        total += w.iter().sum::<f64>();
        if let Some(z) = standardize(w) {
            usable += 1;
            for (s, v) in sum.iter_mut().zip(z) {
                *s += v;
            }
        }
    }
    if usable < 2 {
        return Err(DetectError::InsufficientLinks(usable));
    }
    let l = usable as f64;
    let norm_sq: f64 = sum.iter().map(|v| v * v).sum();
    let rho_bar = ((norm_sq - l) / (l * (l - 1.0))).clamp(-1.0, 1.0);
    let delta_bar = total / (windows.len() * len) as f64;
    Ok(Detection {
        detected: rho_bar > cfg.rho_threshold && delta_bar < -cfg.alpha,
        rho_bar,
        delta_bar,
        usable_links: usable,
    })
}

/// Outcome of one sliding window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRecord {
    pub start: usize,
    /// `None` when fewer than two links vary within the window.
    pub rho_bar: Option<f64>,
    pub delta_bar: f64,
    pub detected: bool,
}

/// Evaluates every window of `cfg.window` samples with stride 1. `series`
/// holds one ΔA sequence per link, all on the same time base.
pub fn scan<S: AsRef<[f64]> + Sync>(series: &[S], cfg: &DetectionConfig) -> Result<Vec<WindowRecord>, DetectError> {
    cfg.validate()?;
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    let len = first.as_ref().len();
    if let Some(bad) = series.iter().find(|s| s.as_ref().len() != len) {
        return Err(DetectError::LengthMismatch(len, bad.as_ref().len()));
    }
    if len < cfg.window {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(len - cfg.window + 1);
    for start in 0..=(len - cfg.window) {
        let windows: Vec<&[f64]> = series.iter().map(|s| &s.as_ref()[start..start + cfg.window]).collect();
        let record = match detect_storm(&windows, cfg) {
            Ok(d) => WindowRecord { start, rho_bar: Some(d.rho_bar), delta_bar: d.delta_bar, detected: d.detected },
            Err(DetectError::InsufficientLinks(_)) => {
                let total: f64 = windows.iter().map(|w| w.iter().sum::<f64>()).sum();
                WindowRecord { start, rho_bar: None, delta_bar: total / (windows.len() * cfg.window) as f64, detected: false }
            }
            Err(e) => return Err(e),
        };
        out.push(record);
    }
    Ok(out)
}

/// Start of the first flagged window.
pub fn onset(records: &[WindowRecord]) -> Option<usize> {
    records.iter().find(|r| r.detected).map(|r| r.start)
}

/// CSV with columns `window_start,rho_bar,mean_delta,detected`.
pub fn detection_log_csv(records: &[WindowRecord]) -> String {
    let mut out = String::from("window_start,rho_bar,mean_delta,detected\n");
    for r in records {
        let rho = r.rho_bar.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(out, "{},{},{:.6},{}", r.start, rho, r.delta_bar, r.detected as u8);
    }
    out
}
