//! Gridding of scattered link samples.
//!
//! Six standard methods plus the uncertainty-weighted map:
//!
//! ```text
//! θ(x, y) = Σ (W_i + z·σ̃_i²)⁻¹ r_i / Σ (W_i + z·σ̃_i²)⁻¹
//! ```
//!
//! with W_i = (d_i / L_max)² and σ̃² the variances divided by their median.
//!
//! Geometry-dependent work (triangulation, RBF factorization, kriging
//! neighborhoods) lives in [`Prepared`] so repeated maps over one sample
//! layout only pay for the value-dependent part.

pub mod clough_tocher;
pub mod delaunay;
pub mod kriging;
pub mod rbf;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridSpec, IntensityGrid};
use crate::Point;

pub use clough_tocher::CloughTocher;
pub use delaunay::{Location, Triangulation};
pub use kriging::{empirical_variogram, fit_variogram, Variogram, VariogramBin};
pub use rbf::RbfModel;

#[derive(Debug, Error, PartialEq)]
pub enum InterpError {
    #[error("no samples to interpolate")]
    NoSamples,
    #[error("method infeasible: {0}")]
    Infeasible(String),
    #[error("invalid sample {index}: {reason}")]
    InvalidSample { index: usize, reason: String },
    #[error("invalid interpolation config: {0}")]
    Config(String),
    #[error("every sample has infinite weight")]
    EmptyEstimate,
    #[error("unknown interpolation method {0:?}")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InterpMethod {
    Linear,
    Nearest,
    Cubic,
    Rbf,
    Idw,
    Kriging,
    /// Uncertainty-weighted map.
    Weighted,
}

impl InterpMethod {
    /// The six standard methods.
    pub const STANDARD: [InterpMethod; 6] = [
        InterpMethod::Linear,
        InterpMethod::Nearest,
        InterpMethod::Cubic,
        InterpMethod::Rbf,
        InterpMethod::Idw,
        InterpMethod::Kriging,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            InterpMethod::Linear => "linear",
            InterpMethod::Nearest => "nearest",
            InterpMethod::Cubic => "cubic",
            InterpMethod::Rbf => "rbf",
            InterpMethod::Idw => "idw",
            InterpMethod::Kriging => "kriging",
            InterpMethod::Weighted => "weighted",
        }
    }

    /// Whether cells outside the sample hull are left invalid.
    pub fn is_hull_limited(&self) -> bool {
        matches!(self, InterpMethod::Linear | InterpMethod::Cubic)
    }
}

impl fmt::Display for InterpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterpMethod {
    type Err = InterpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let all = [
            InterpMethod::Linear,
            InterpMethod::Nearest,
            InterpMethod::Cubic,
            InterpMethod::Rbf,
            InterpMethod::Idw,
            InterpMethod::Kriging,
            InterpMethod::Weighted,
        ];
        all.into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| InterpError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpConfig {
    pub method: InterpMethod,
    pub idw_power: f64,
    /// Multiquadric shape parameter; mean nearest-neighbor spacing if unset.
    pub rbf_epsilon: Option<f64>,
    /// Fixed variogram; fitted per value set if unset.
    pub variogram: Option<Variogram>,
    /// Kriging neighborhood size; `None` solves one global system per cell.
    pub max_neighbors: Option<usize>,
    /// Regularizer of the weighted map.
    pub z: f64,
    /// Distance scale of the weighted map, km.
    pub l_max: f64,
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self {
            method: InterpMethod::Linear,
            idw_power: 2.0,
            rbf_epsilon: None,
            variogram: None,
            max_neighbors: Some(32),
            z: 1.0,
            l_max: 15.0,
        }
    }
}

impl InterpConfig {
    pub fn with_method(method: InterpMethod) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), InterpError> {
        if !(self.idw_power > 0.0) {
            return Err(InterpError::Config(format!("idw_power must be positive, got {}", self.idw_power)));
        }
        if let Some(v) = &self.variogram {
            v.validate()?;
        }
        if self.max_neighbors == Some(0) {
            return Err(InterpError::Config("max_neighbors must be positive".into()));
        }
        if !(self.z >= 0.0) {
            return Err(InterpError::Config(format!("z must be nonnegative, got {}", self.z)));
        }
        if !(self.l_max > 0.0) {
            return Err(InterpError::Config(format!("l_max must be positive, got {}", self.l_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub position: Point,
    pub value: f64,
    /// σ², in value units squared. May be infinite.
    pub variance: f64,
}

impl Sample {
    pub fn new(position: Point, value: f64, variance: f64) -> Self {
        Self { position, value, variance }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
}

impl SampleSet {
    pub fn new(samples: Vec<Sample>) -> Result<Self, InterpError> {
        let set = Self { samples };
        set.validate()?;
        Ok(set)
    }

    pub fn from_values(points: &[Point], values: &[f64]) -> Result<Self, InterpError> {
        Self::new(points.iter().zip(values).map(|(p, v)| Sample::new(*p, *v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<(), InterpError> {
        for (index, s) in self.samples.iter().enumerate() {
            let bad = |reason: &str| Err(InterpError::InvalidSample { index, reason: reason.into() });
            if !(s.position.x.is_finite() && s.position.y.is_finite()) {
                return bad("non-finite position");
            }
            if !s.value.is_finite() {
                return bad("non-finite value");
            }
            if !(s.variance >= 0.0) {
                return bad("negative or NaN variance");
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<Point> {
        self.samples.iter().map(|s| s.position).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.variance).collect()
    }
}

/// Groups coincident positions. Returns the distinct positions and, for each
/// input sample, the index of its group.
fn merge_coincident(points: &[Point]) -> (Vec<Point>, Vec<usize>) {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x).then(points[a].y.total_cmp(&points[b].y)).then(a.cmp(&b)));
    let mut group_of = vec![0; points.len()];
    let mut first_of_group: Vec<usize> = Vec::new();
    let mut last: Option<Point> = None;
    for &i in &order {
        if last != Some(points[i]) {
            first_of_group.push(i);
            last = Some(points[i]);
        }
        group_of[i] = first_of_group.len() - 1;
    }
    // renumber groups by their lowest member so ordering follows the input
    let mut rank: Vec<usize> = (0..first_of_group.len()).collect();
    rank.sort_by_key(|g| first_of_group[*g]);
    let mut new_id = vec![0; rank.len()];
    for (new, old) in rank.iter().enumerate() {
        new_id[*old] = new;
    }
    let unique = rank.iter().map(|g| points[first_of_group[*g]]).collect();
    (unique, group_of.into_iter().map(|g| new_id[g]).collect())
}

/// Averages values per group; the group variance is the variance of the mean.
fn merge_values(groups: &[usize], n_groups: usize, values: &[f64], variances: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; n_groups];
    let mut var = vec![0.0; n_groups];
    let mut count = vec![0.0; n_groups];
    for ((g, v), s2) in groups.iter().zip(values).zip(variances) {
        sum[*g] += v;
        var[*g] += s2;
        count[*g] += 1.0;
    }
    let vals = sum.iter().zip(&count).map(|(s, c)| s / c).collect();
    let vars = var.iter().zip(&count).map(|(s, c)| s / (c * c)).collect();
    (vals, vars)
}

#[derive(Debug, Clone)]
enum Engine {
    Triangulated { ct: Box<CloughTocher>, located: Vec<Option<Location>> },
    Nearest(Vec<usize>),
    Rbf(Box<RbfModel>),
    Kriging(Vec<Vec<usize>>),
    Distance,
}

/// Interpolator bound to one sample layout and one output grid.
#[derive(Debug, Clone)]
pub struct Prepared {
    cfg: InterpConfig,
    spec: GridSpec,
    centers: Vec<Point>,
    points: Vec<Point>,
    groups: Vec<usize>,
    input_len: usize,
    engine: Engine,
}

impl Prepared {
    pub fn new(positions: &[Point], spec: &GridSpec, cfg: &InterpConfig) -> Result<Self, InterpError> {
        cfg.validate()?;
        if positions.is_empty() {
            return Err(InterpError::NoSamples);
        }
        if let Some(index) = positions.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(InterpError::InvalidSample { index, reason: "non-finite position".into() });
        }
        let (points, groups) = merge_coincident(positions);
        let centers = spec.centers();
        let engine = match cfg.method {
            InterpMethod::Linear | InterpMethod::Cubic => {
                let tri = Triangulation::new(&points)?;
                let located = tri.locate_grid(spec);
                Engine::Triangulated { ct: Box::new(CloughTocher::new(tri)), located }
            }
            InterpMethod::Nearest => Engine::Nearest(
                centers
                    .iter()
                    .map(|c| {
                        let mut best = (f64::INFINITY, 0);
                        for (i, p) in points.iter().enumerate() {
                            let d = p.distance_sq(*c);
                            if d < best.0 {
                                best = (d, i);
                            }
                        }
                        best.1
                    })
                    .collect(),
            ),
            InterpMethod::Rbf => Engine::Rbf(Box::new(RbfModel::new(&points, cfg.rbf_epsilon)?)),
            InterpMethod::Kriging => {
                let k = cfg.max_neighbors.unwrap_or(usize::MAX).min(points.len());
                Engine::Kriging(centers.iter().map(|c| kriging::nearest_indices(&points, *c, k)).collect())
            }
            InterpMethod::Idw | InterpMethod::Weighted => Engine::Distance,
        };
        Ok(Self { cfg: *cfg, spec: *spec, centers, points, groups, input_len: positions.len(), engine })
    }

    /// Distinct sample positions after merging coincident ones.
    pub fn unique_points(&self) -> &[Point] {
        &self.points
    }

    /// Grids one value set laid out like the positions given to [`Prepared::new`].
    pub fn evaluate(&self, values: &[f64], variances: &[f64]) -> Result<IntensityGrid, InterpError> {
        if values.len() != self.input_len || variances.len() != self.input_len {
            return Err(InterpError::Config(format!(
                "expected {} values and variances, got {} and {}",
                self.input_len,
                values.len(),
                variances.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(InterpError::InvalidSample { index, reason: "non-finite value".into() });
        }
        if let Some(index) = variances.iter().position(|v| !(*v >= 0.0)) {
            return Err(InterpError::InvalidSample { index, reason: "negative or NaN variance".into() });
        }
        let (vals, vars) = merge_values(&self.groups, self.points.len(), values, variances);
        let n_cells = self.spec.len();
        let mut out = vec![f64::NAN; n_cells];
        match &self.engine {
            Engine::Triangulated { ct, located } => {
                let grads = if self.cfg.method == InterpMethod::Cubic { Some(ct.gradients(&vals)) } else { None };
                let tris = &ct.triangulation().triangles;
                for (cell, loc) in located.iter().enumerate() {
                    let Some(loc) = loc else { continue };
                    out[cell] = match &grads {
                        Some(g) => ct.evaluate(loc, &vals, g),
                        None => {
                            let t = tris[loc.triangle];
                            (0..3).map(|k| loc.bary[k] * vals[t[k]]).sum()
                        }
                    };
                }
            }
            Engine::Nearest(idx) => {
                for (o, i) in out.iter_mut().zip(idx) {
                    *o = vals[*i];
                }
            }
            Engine::Rbf(model) => {
                let coeffs = model.coefficients(&vals)?;
                for (o, c) in out.iter_mut().zip(&self.centers) {
                    *o = model.evaluate(&coeffs, *c);
                }
            }
            Engine::Kriging(neighborhoods) => {
                let v = match self.cfg.variogram {
                    Some(v) => v,
                    None => fit_variogram(&self.points, &vals),
                };
                for ((o, c), idx) in out.iter_mut().zip(&self.centers).zip(neighborhoods) {
                    *o = kriging::krige_at(&self.points, &vals, idx, &v, *c)?;
                }
            }
            Engine::Distance => {
                let scaled = normalized_variances(&vars);
                for (o, c) in out.iter_mut().zip(&self.centers) {
                    *o = if self.cfg.method == InterpMethod::Idw {
                        idw_at(&self.points, &vals, *c, self.cfg.idw_power)
                    } else {
                        weighted_at(&self.points, &vals, &scaled, *c, self.cfg.z, self.cfg.l_max)?
                    };
                }
            }
        }
        Ok(IntensityGrid { spec: self.spec, valid: out.iter().map(|v| v.is_finite()).collect(), values: out })
    }
}

/// One-shot gridding of `samples` with `cfg.method`.
pub fn interpolate(samples: &SampleSet, spec: &GridSpec, cfg: &InterpConfig) -> Result<IntensityGrid, InterpError> {
    samples.validate()?;
    Prepared::new(&samples.positions(), spec, cfg)?.evaluate(&samples.values(), &samples.variances())
}

/// Uncertainty-weighted map with regularizer `z` and distance scale `l_max`.
pub fn uncertainty_weighted_map(samples: &SampleSet, spec: &GridSpec, z: f64, l_max: f64) -> Result<IntensityGrid, InterpError> {
    let cfg = InterpConfig { method: InterpMethod::Weighted, z, l_max, ..InterpConfig::default() };
    interpolate(samples, spec, &cfg)
}

/// Inverse-distance weighting; a query on a sample returns that sample.
pub fn idw_at(points: &[Point], values: &[f64], q: Point, power: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, v) in points.iter().zip(values) {
        let d2 = p.distance_sq(q);
        if d2 == 0.0 {
            return *v;
        }
        let w = if power == 2.0 { 1.0 / d2 } else { d2.powf(-0.5 * power) };
        num += w * v;
        den += w;
    }
    num / den
}

/// Variances divided by the median of the finite positive ones; unchanged
/// when there are none.
pub fn normalized_variances(variances: &[f64]) -> Vec<f64> {
    let mut finite: Vec<f64> = variances.iter().copied().filter(|v| v.is_finite() && *v > 0.0).collect();
    match crate::channel::median(&mut finite) {
        Some(m) => variances.iter().map(|v| v / m).collect(),
        None => variances.to_vec(),
    }
}

/// One cell of the weighted map. `scaled_var` are already normalized.
pub fn weighted_at(points: &[Point], values: &[f64], scaled_var: &[f64], q: Point, z: f64, l_max: f64) -> Result<f64, InterpError> {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((p, v), s2) in points.iter().zip(values).zip(scaled_var) {
        let w_dist = p.distance_sq(q) / (l_max * l_max);
        let penalty = if z == 0.0 { 0.0 } else { z * s2 };
        let total = w_dist + penalty;
        if total == 0.0 {
            return Ok(*v);
        }
        let w = 1.0 / total;
        num += w * v;
        den += w;
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(InterpError::EmptyEstimate)
    }
}
