//! Multiquadric radial basis function interpolation with a constant
//! polynomial term.
//!
//! φ(r) = sqrt(1 + (r/ε)²), ε = mean nearest-neighbor spacing. The system
//!
//! ```text
//! [Φ + δI  1] [w]   [f]
//! [1ᵀ      0] [c] = [0]
//! ```
//!
//! is factored once per sample layout; δ = 1e-10·trace(Φ).

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::Point;

use super::InterpError;

pub const JITTER: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct RbfModel {
    points: Vec<Point>,
    epsilon: f64,
    lu: LU<f64, Dyn, Dyn>,
}

/// Mean distance from each point to its nearest other point.
pub fn mean_nearest_spacing(points: &[Point]) -> f64 {
    if points.len() < 2 {
        return 1.0;
    }
    let total: f64 = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| p.distance_sq(*q))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    let mean = total / points.len() as f64;
    if mean > 0.0 { mean } else { 1.0 }
}

impl RbfModel {
    pub fn new(points: &[Point], epsilon: Option<f64>) -> Result<Self, InterpError> {
        let n = points.len();
        if n == 0 {
            return Err(InterpError::NoSamples);
        }
        let epsilon = epsilon.unwrap_or_else(|| mean_nearest_spacing(points));
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(InterpError::Config(format!("RBF shape parameter must be positive, got {epsilon}")));
        }
        let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in i..n {
                let v = kernel(points[i].distance(points[j]), epsilon);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
        }
        let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
        for i in 0..n {
            a[(i, i)] += JITTER * trace;
        }
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(InterpError::Infeasible("singular RBF system".into()));
        }
        Ok(Self { points: points.to_vec(), epsilon, lu })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Kernel weights followed by the constant term.
    pub fn coefficients(&self, values: &[f64]) -> Result<Vec<f64>, InterpError> {
        let n = self.points.len();
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for (r, v) in rhs.iter_mut().zip(values) {
            *r = *v;
        }
        let sol = self.lu.solve(&rhs).ok_or_else(|| InterpError::Infeasible("singular RBF system".into()))?;
        Ok(sol.iter().copied().collect())
    }

    pub fn evaluate(&self, coeffs: &[f64], q: Point) -> f64 {
        let n = self.points.len();
        let mut s = coeffs[n];
        for (p, w) in self.points.iter().zip(coeffs) {
            s += w * kernel(p.distance(q), self.epsilon);
        }
        s
    }
}

fn kernel(r: f64, epsilon: f64) -> f64 {
    let u = r / epsilon;
    (1.0 + u * u).sqrt()
}
