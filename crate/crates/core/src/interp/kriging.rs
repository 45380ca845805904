//! Ordinary kriging with an exponential variogram fitted to the empirical
//! semivariogram.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::Point;

use super::InterpError;

pub const VARIOGRAM_BINS: usize = 12;
/// Below this many samples the fit falls back to the sample variance.
pub const MIN_FIT_SAMPLES: usize = 5;

/// γ(h) = nugget + psill·(1 − exp(−h/range)) for h > 0, γ(0) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variogram {
    pub nugget: f64,
    /// Partial sill; the total sill is nugget + psill.
    pub psill: f64,
    pub range: f64,
}

impl Variogram {
    pub fn sill(&self) -> f64 {
        self.nugget + self.psill
    }

    pub fn gamma(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else {
            self.nugget + self.psill * (1.0 - (-h / self.range).exp())
        }
    }

    pub fn validate(&self) -> Result<(), InterpError> {
        if !(self.nugget >= 0.0 && self.psill >= 0.0 && self.range > 0.0) || !self.sill().is_finite() {
            return Err(InterpError::Config(format!("invalid variogram {self:?}")));
        }
        Ok(())
    }
}

/// One bin of the empirical semivariogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramBin {
    pub lag: f64,
    pub gamma: f64,
    pub pairs: usize,
}

/// Semivariance in equal-width bins up to half the largest pair distance.
pub fn empirical_variogram(points: &[Point], values: &[f64], bins: usize) -> Vec<VariogramBin> {
    let n = points.len();
    let mut max_d: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            max_d = max_d.max(points[i].distance(points[j]));
        }
    }
    let cutoff = 0.5 * max_d;
    if !(cutoff > 0.0) {
        return Vec::new();
    }
    let width = cutoff / bins as f64;
    let mut lag = vec![0.0; bins];
    let mut gamma = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = points[i].distance(points[j]);
            if d > cutoff {
                continue;
            }
            let b = ((d / width) as usize).min(bins - 1);
            let diff = values[i] - values[j];
            lag[b] += d;
            gamma[b] += 0.5 * diff * diff;
            count[b] += 1;
        }
    }
    (0..bins)
        .filter(|b| count[*b] > 0)
        .map(|b| VariogramBin { lag: lag[b] / count[b] as f64, gamma: gamma[b] / count[b] as f64, pairs: count[b] })
        .collect()
}

/// Least-squares exponential fit: grid search over the range, with
/// nonnegative (nugget, psill) solved in closed form for each range.
pub fn fit_variogram(points: &[Point], values: &[f64]) -> Variogram {
    let bins = if points.len() >= MIN_FIT_SAMPLES { empirical_variogram(points, values, VARIOGRAM_BINS) } else { Vec::new() };
    let max_lag = bins.iter().map(|b| b.lag).fold(0.0, f64::max);
    let fitted = if bins.len() >= 3 && max_lag > 0.0 {
        let mut best: Option<(f64, Variogram)> = None;
        for k in 0..80 {
            let range = max_lag * 0.02 * (250.0f64).powf(k as f64 / 79.0);
            let (nugget, psill, sse) = fit_linear_part(&bins, range);
            if best.as_ref().is_none_or(|(e, _)| sse < *e) {
                best = Some((sse, Variogram { nugget, psill, range }));
            }
        }
        best.map(|(_, v)| v)
    } else {
        None
    };
    let mut v = fitted.unwrap_or_else(|| fallback_variogram(points, values));
    if !(v.sill() > 0.0) {
        // constant data: any positive structure gives the same predictions
        v.psill = 1.0;
    }
    v
}

fn fallback_variogram(points: &[Point], values: &[f64]) -> Variogram {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let mut max_d: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            max_d = max_d.max(points[i].distance(points[j]));
        }
    }
    Variogram { nugget: 0.0, psill: var, range: if max_d > 0.0 { max_d / 3.0 } else { 1.0 } }
}

fn fit_linear_part(bins: &[VariogramBin], range: f64) -> (f64, f64, f64) {
    let basis: Vec<f64> = bins.iter().map(|b| 1.0 - (-b.lag / range).exp()).collect();
    let y: Vec<f64> = bins.iter().map(|b| b.gamma).collect();
    let n = y.len() as f64;
    let sse = |c0: f64, c: f64| basis.iter().zip(&y).map(|(u, g)| (c0 + c * u - g).powi(2)).sum::<f64>();
    let (su, sy) = (basis.iter().sum::<f64>(), y.iter().sum::<f64>());
    let suu: f64 = basis.iter().map(|u| u * u).sum();
    let suy: f64 = basis.iter().zip(&y).map(|(u, g)| u * g).sum();
    let det = n * suu - su * su;
    let mut candidates = Vec::new();
    if det.abs() > 1e-14 * n * suu {
        let c = (n * suy - su * sy) / det;
        let c0 = (sy - c * su) / n;
        if c0 >= 0.0 && c >= 0.0 {
            candidates.push((c0, c));
        }
    }
    if suu > 0.0 {
        candidates.push((0.0, (suy / suu).max(0.0)));
    }
    candidates.push(((sy / n).max(0.0), 0.0));
    candidates
        .into_iter()
        .map(|(c0, c)| (c0, c, sse(c0, c)))
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("at least one candidate")
}

/// Ordinary kriging estimate at `target` from the samples `idx`.
pub fn krige_at(points: &[Point], values: &[f64], idx: &[usize], v: &Variogram, target: Point) -> Result<f64, InterpError> {
    let m = idx.len();
    if m == 1 {
        return Ok(values[idx[0]]);
    }
    let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
    let mut rhs = DVector::<f64>::zeros(m + 1);
    for r in 0..m {
        for c in (r + 1)..m {
            let g = v.gamma(points[idx[r]].distance(points[idx[c]]));
            a[(r, c)] = g;
            a[(c, r)] = g;
        }
        a[(r, m)] = 1.0;
        a[(m, r)] = 1.0;
        rhs[r] = v.gamma(points[idx[r]].distance(target));
    }
    rhs[m] = 1.0;
    let w = a.lu().solve(&rhs).ok_or_else(|| InterpError::Infeasible("singular kriging system".into()))?;
    Ok(idx.iter().enumerate().map(|(k, &i)| w[k] * values[i]).sum())
}

/// Indices of the `k` samples nearest to `target`, ties to the lower index.
pub fn nearest_indices(points: &[Point], target: Point, k: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (p.distance_sq(target), i)).collect();
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.truncate(k);
    }
    let mut idx: Vec<usize> = order.into_iter().map(|(_, i)| i).collect();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_shape() {
        let v = Variogram { nugget: 0.5, psill: 2.0, range: 3.0 };
        assert_eq!(v.gamma(0.0), 0.0);
        assert!((v.gamma(1e9) - 2.5).abs() < 1e-12);
        assert!(v.gamma(1.0) < v.gamma(2.0));
    }

    #[test]
    fn recovers_exact_exponential_bins() {
        let truth = Variogram { nugget: 0.2, psill: 1.5, range: 4.0 };
        let bins: Vec<VariogramBin> = (1..=12)
            .map(|k| VariogramBin { lag: k as f64, gamma: truth.gamma(k as f64), pairs: 10 })
            .collect();
        let (c0, c, sse) = fit_linear_part(&bins, 4.0);
        assert!((c0 - 0.2).abs() < 1e-9 && (c - 1.5).abs() < 1e-9 && sse < 1e-15);
    }

    #[test]
    fn fit_is_nonnegative() {
        let pts: Vec<Point> = (0..30).map(|k| Point::new((k % 6) as f64 * 2.0, (k / 6) as f64 * 3.0)).collect();
        let vals: Vec<f64> = pts.iter().map(|p| (p.x * 0.4).sin() + 0.1 * p.y).collect();
        let v = fit_variogram(&pts, &vals);
        assert!(v.nugget >= 0.0 && v.psill >= 0.0 && v.sill() >= v.nugget && v.range > 0.0);
    }

    #[test]
    fn few_samples_fall_back_to_variance() {
        let pts = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let v = fit_variogram(&pts, &[1.0, 2.0, 3.0]);
        assert_eq!(v.nugget, 0.0);
        assert!((v.psill - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_selection() {
        let pts = [Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(1.0, 0.0), Point::new(5.0, 0.0)];
        assert_eq!(nearest_indices(&pts, Point::new(0.9, 0.0), 2), vec![0, 2]);
        assert_eq!(nearest_indices(&pts, Point::new(0.0, 0.0), 10), vec![0, 1, 2, 3]);
    }
}
