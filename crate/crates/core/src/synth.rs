//! Synthetic column dust optical depth fields.
//!
//! Storm season: 2–5 anisotropic Gaussian blobs with peak CDOD in
//! [0.8, 2.5], each drifting at constant velocity. Calm season: a uniform
//! background in [0.05, 0.2] plus a smooth ripple whose amplitude never
//! exceeds 0.05. Time is in hours.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::grid::{Extent, GridSpec, IntensityGrid};
use crate::{rng, Point};

pub const STORM_PEAK_RANGE: (f64, f64) = (0.8, 2.5);
pub const CALM_BACKGROUND_RANGE: (f64, f64) = (0.05, 0.2);
pub const CALM_RIPPLE_MAX: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Season {
    Storm,
    Calm,
}

impl Season {
    pub fn name(&self) -> &'static str {
        match self {
            Season::Storm => "storm",
            Season::Calm => "calm",
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Season {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "storm" => Ok(Season::Storm),
            "calm" => Ok(Season::Calm),
            other => Err(format!("unknown season {other:?}")),
        }
    }
}

/// Elliptical Gaussian plume moving at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub center: Point,
    /// km per hour.
    pub velocity: (f64, f64),
    /// Standard deviations along the rotated axes, km.
    pub sigma_major: f64,
    pub sigma_minor: f64,
    /// Rotation of the major axis from +x, radians.
    pub angle: f64,
    pub peak: f64,
}

impl Blob {
    pub fn center_at(&self, t: f64) -> Point {
        self.center.translated(self.velocity.0 * t, self.velocity.1 * t)
    }

    pub fn value_at(&self, p: Point, t: f64) -> f64 {
        let c = self.center_at(t);
        let (dx, dy) = (p.x - c.x, p.y - c.y);
        let (s, co) = self.angle.sin_cos();
        let u = co * dx + s * dy;
        let v = -s * dx + co * dy;
        self.peak * (-0.5 * (u * u / (self.sigma_major * self.sigma_major) + v * v / (self.sigma_minor * self.sigma_minor))).exp()
    }

    /// Integral over the whole plane.
    pub fn integral(&self) -> f64 {
        2.0 * PI * self.peak * self.sigma_major * self.sigma_minor
    }
}

/// Smooth plane-wave ripple `amplitude·sin(k·p + ωt + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ripple {
    pub amplitude: f64,
    pub wavevector: (f64, f64),
    /// rad per hour.
    pub omega: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticField {
    pub season: Season,
    pub extent: Extent,
    pub background: f64,
    pub blobs: Vec<Blob>,
    pub ripples: Vec<Ripple>,
}

impl SyntheticField {
    pub fn generate(season: Season, extent: Extent, seed: u64) -> Self {
        let mut rng = rng::stream(seed, &[0x6669_656c, season as u64]);
        let span = extent.width().min(extent.height());
        match season {
            Season::Storm => {
                let count = rng.random_range(2..=5);
                let blobs = (0..count)
                    .map(|_| {
                        let center = Point::new(
                            rng.random_range(extent.xmin..extent.xmax),
                            rng.random_range(extent.ymin..extent.ymax),
                        );
                        let sigma_major = span * rng.random_range(0.15..0.35);
                        let sigma_minor = sigma_major * rng.random_range(0.4..0.9);
                        let speed = span * rng.random_range(0.0005..0.002);
                        let heading = rng.random_range(0.0..2.0 * PI);
                        Blob {
                            center,
                            velocity: (speed * heading.cos(), speed * heading.sin()),
                            sigma_major,
                            sigma_minor,
                            angle: rng.random_range(0.0..PI),
                            peak: rng.random_range(STORM_PEAK_RANGE.0..=STORM_PEAK_RANGE.1),
                        }
                    })
                    .collect();
                Self { season, extent, background: 0.0, blobs, ripples: Vec::new() }
            }
            Season::Calm => {
                let background = rng.random_range(CALM_BACKGROUND_RANGE.0..=CALM_BACKGROUND_RANGE.1);
                let weights: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
                let total: f64 = weights.iter().sum();
                let budget = CALM_RIPPLE_MAX * rng.random_range(0.3..1.0);
                let ripples = weights
                    .iter()
                    .map(|w| {
                        let wavelength = span * rng.random_range(0.5..2.0);
                        let dir = rng.random_range(0.0..2.0 * PI);
                        let k = 2.0 * PI / wavelength;
                        Ripple {
                            amplitude: budget * w / total,
                            wavevector: (k * dir.cos(), k * dir.sin()),
                            omega: 2.0 * PI / rng.random_range(48.0..240.0),
                            phase: rng.random_range(0.0..2.0 * PI),
                        }
                    })
                    .collect();
                Self { season, extent, background, blobs: Vec::new(), ripples }
            }
        }
    }

    /// CDOD at `p` and hour `t`.
    pub fn value_at(&self, p: Point, t: f64) -> f64 {
        let blobs: f64 = self.blobs.iter().map(|b| b.value_at(p, t)).sum();
        let ripple: f64 = self
            .ripples
            .iter()
            .map(|r| r.amplitude * (r.wavevector.0 * p.x + r.wavevector.1 * p.y + r.omega * t + r.phase).sin())
            .sum();
        self.background + blobs + ripple
    }

    /// Upper bound of the field over all space and time.
    pub fn max_bound(&self) -> f64 {
        self.background + self.blobs.iter().map(|b| b.peak).sum::<f64>() + self.ripples.iter().map(|r| r.amplitude).sum::<f64>()
    }

    pub fn frame(&self, spec: &GridSpec, t: f64) -> IntensityGrid {
        IntensityGrid::from_fn(*spec, |p| self.value_at(p, t))
    }

    /// Hourly frames for hours `start .. start + count`.
    pub fn frames(&self, spec: &GridSpec, start: usize, count: usize) -> Vec<IntensityGrid> {
        (start..start + count).map(|h| self.frame(spec, h as f64)).collect()
    }
}
