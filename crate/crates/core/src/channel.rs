//! Link-level attenuation: composition of dust and molecular terms,
//! synthesis of noisy hourly series over an evolving dust field, clear-sky
//! baselines and isolation of the dust component.
//!
//! Series values are specific attenuations in dB/km. Free-space loss depends
//! only on link geometry, so it is reported per link and kept out of the
//! series.
//!
//! The baseline is taken over the molecular-corrected residual
//! `A_M − A_abs` of clear samples; isolation then subtracts both the
//! baseline and the molecular term without counting the latter twice.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::SPEED_OF_LIGHT;
use crate::dustphys::DustParams;
use crate::grid::IntensityGrid;
use crate::spectra::{absorption_coefficient, db_per_km, AtmosphereState, PartitionModel, SpectralLine};
use crate::{rng, Point};

/// Samples per sol.
pub const HOURS_PER_SOL: usize = 24;

/// Default measurement noise on the per-km series, dB/km.
pub const DEFAULT_NOISE_DB_PER_KM: f64 = 0.05;

/// Default number of path-integration points.
pub const DEFAULT_PATH_POINTS: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("link {link}: endpoint ({x}, {y}) lies outside the dust field")]
    OutsideField { link: usize, x: f64, y: f64 },
    #[error("no clear samples for hour-of-sol {hour}: baseline undefined")]
    InsufficientBaseline { hour: usize },
    #[error("invalid channel configuration: {0}")]
    Config(String),
}

/// A point-to-point link between two surface nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: usize,
    /// Node indices of the two endpoints.
    pub nodes: (usize, usize),
    pub endpoint_a: Point,
    pub endpoint_b: Point,
    /// km.
    pub length: f64,
    /// Hz.
    pub frequency: f64,
}

impl Link {
    pub fn new(id: usize, nodes: (usize, usize), a: Point, b: Point, frequency: f64) -> Self {
        Self { id, nodes, endpoint_a: a, endpoint_b: b, length: a.distance(b), frequency }
    }

    pub fn midpoint(&self) -> Point {
        self.endpoint_a.lerp(self.endpoint_b, 0.5)
    }

    /// Free-space loss over the whole link, dB.
    pub fn free_space_loss_db(&self) -> f64 {
        free_space_path_loss(self.frequency, self.length)
    }
}

/// Friis free-space loss in dB for `d_km` kilometers.
pub fn free_space_path_loss(f: f64, d_km: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d_km * 1000.0 * f / SPEED_OF_LIGHT).log10()
}

/// How a link reads the dust field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkSampling {
    /// Average of `n` equally spaced points (segment midpoints) along the path.
    Path(usize),
    Midpoint,
}

impl Default for LinkSampling {
    fn default() -> Self {
        LinkSampling::Path(DEFAULT_PATH_POINTS)
    }
}

impl LinkSampling {
    fn fractions(&self) -> Vec<f64> {
        match *self {
            LinkSampling::Midpoint => vec![0.5],
            LinkSampling::Path(n) => (0..n.max(1)).map(|k| (k as f64 + 0.5) / n.max(1) as f64).collect(),
        }
    }
}

/// Measurement noise model: additive Gaussian on the per-km series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// dB/km.
    pub sigma: f64,
    pub seed: u64,
}

/// Frequency-dependent parts of the forward model that do not vary along a
/// run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub frequency: f64,
    pub dust: DustParams,
    /// Molecular absorption coefficient k(f), m⁻¹.
    pub k_molecular: f64,
}

impl ChannelModel {
    pub fn new(
        frequency: f64,
        dust: DustParams,
        atm: &AtmosphereState,
        catalog: &[SpectralLine],
        partition: &PartitionModel,
    ) -> Self {
        Self { frequency, dust, k_molecular: absorption_coefficient(atm, catalog, frequency, partition) }
    }

    /// Molecular attenuation, dB/km.
    pub fn molecular_db_per_km(&self) -> f64 {
        db_per_km(self.k_molecular)
    }

    /// Noise-free specific attenuation for a path-averaged concentration.
    pub fn total_db_per_km(&self, concentration: f64) -> f64 {
        self.dust.attenuation_per_particle(self.frequency) * concentration + self.molecular_db_per_km()
    }
}

/// Hourly attenuation record of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationSeries {
    pub link_id: usize,
    /// Sol-hour indices, strictly increasing.
    pub times: Vec<usize>,
    /// dB/km.
    pub values: Vec<f64>,
    /// Ground truth: dust present on the path at that sample.
    pub dusty: Vec<bool>,
}

impl AttenuationSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Times of dust-free samples.
    pub fn clear_times(&self) -> Vec<usize> {
        self.times.iter().zip(&self.dusty).filter(|(_, d)| !**d).map(|(t, _)| *t).collect()
    }
}

/// Path-averaged concentration seen by `link` in one field frame.
pub fn path_average(link: &Link, frame: &IntensityGrid, sampling: LinkSampling) -> Result<f64, ChannelError> {
    let fractions = sampling.fractions();
    let mut sum = 0.0;
    for t in &fractions {
        let p = link.endpoint_a.lerp(link.endpoint_b, *t);
        sum += frame.sample_bilinear(p).ok_or(ChannelError::OutsideField { link: link.id, x: p.x, y: p.y })?;
    }
    Ok(sum / fractions.len() as f64)
}

/// Synthesizes one link's series; frame `t` of `frames` is the concentration
/// field (m⁻³) at sol-hour `t`.
pub fn synthesize_link_attenuation(
    link: &Link,
    frames: &[IntensityGrid],
    model: &ChannelModel,
    sampling: LinkSampling,
    noise: &NoiseModel,
) -> Result<AttenuationSeries, ChannelError> {
    for p in [link.endpoint_a, link.endpoint_b] {
        if let Some(frame) = frames.first() {
            if !frame.spec.extent.contains(p) {
                return Err(ChannelError::OutsideField { link: link.id, x: p.x, y: p.y });
            }
        }
    }
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(ChannelError::Config(format!("noise sigma must be nonnegative, got {}", noise.sigma)));
    }
    let normal = Normal::new(0.0, noise.sigma).map_err(|e| ChannelError::Config(e.to_string()))?;
    let mut rng = rng::stream(noise.seed, &[0x6c69_6e6b, link.id as u64]);

    let mut values = Vec::with_capacity(frames.len());
    let mut dusty = Vec::with_capacity(frames.len());
    for frame in frames {
        let n_eff = path_average(link, frame, sampling)?;
        let draw = normal.sample(&mut rng);
        let noise_term = if noise.sigma > 0.0 { draw } else { 0.0 };
        values.push(model.total_db_per_km(n_eff) + noise_term);
        dusty.push(n_eff > 0.0);
    }
    Ok(AttenuationSeries { link_id: link.id, times: (0..frames.len()).collect(), values, dusty })
}

/// Synthesizes every link in parallel; output order follows `links`.
pub fn synthesize_network(
    links: &[Link],
    frames: &[IntensityGrid],
    model: &ChannelModel,
    sampling: LinkSampling,
    noise: &NoiseModel,
) -> Result<Vec<AttenuationSeries>, ChannelError> {
    links
        .par_iter()
        .map(|link| synthesize_link_attenuation(link, frames, model, sampling, noise))
        .collect()
}

/// Per hour-of-sol median of clear-condition attenuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub per_hour: [f64; HOURS_PER_SOL],
}

impl Baseline {
    pub fn at_time(&self, t: usize) -> f64 {
        self.per_hour[t % HOURS_PER_SOL]
    }
}

/// Median of clear samples binned by hour-of-sol. `clear_times` selects
/// which entries of `series` count as clear.
pub fn estimate_baseline(series: &AttenuationSeries, clear_times: &[usize]) -> Result<Baseline, ChannelError> {
    estimate_baseline_from(&series.times, &series.values, clear_times)
}

/// Same as [`estimate_baseline`] over explicit (time, value) columns.
pub fn estimate_baseline_from(times: &[usize], values: &[f64], clear_times: &[usize]) -> Result<Baseline, ChannelError> {
    let clear: std::collections::BTreeSet<usize> = clear_times.iter().copied().collect();
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); HOURS_PER_SOL];
    for (t, v) in times.iter().zip(values) {
        if clear.contains(t) {
            bins[t % HOURS_PER_SOL].push(*v);
        }
    }
    let mut per_hour = [0.0; HOURS_PER_SOL];
    for (hour, bin) in bins.iter_mut().enumerate() {
        per_hour[hour] = median(bin).ok_or(ChannelError::InsufficientBaseline { hour })?;
    }
    Ok(Baseline { per_hour })
}

/// Median; mean of the middle pair for even counts. Sorts in place.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 0 { 0.5 * (values[mid - 1] + values[mid]) } else { values[mid] })
}

/// Dust attenuation left after removing baseline and molecular absorption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsolatedAttenuation {
    /// dB/km, never negative.
    pub a_dust: f64,
    /// The raw residual was negative and has been set to zero.
    pub clamped: bool,
}

pub fn isolate_dust_attenuation(measured: f64, baseline_at_hour: f64, k_f: f64) -> IsolatedAttenuation {
    let residual = measured - baseline_at_hour - db_per_km(k_f);
    if residual < 0.0 {
        IsolatedAttenuation { a_dust: 0.0, clamped: true }
    } else {
        IsolatedAttenuation { a_dust: residual, clamped: false }
    }
}

/// Signal-level change relative to the baseline, dB/km. Dust makes it
/// negative.
pub fn signal_level_change(measured: f64, baseline_at_hour: f64, k_f: f64) -> f64 {
    -(measured - baseline_at_hour - db_per_km(k_f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dustphys::concentration_from_attenuation;
    use crate::grid::{Extent, GridSpec};

    fn uniform_frames(n: f64, count: usize) -> Vec<IntensityGrid> {
        let spec = GridSpec::new(Extent::from_size(20.0, 20.0).unwrap(), 8, 8).unwrap();
        vec![IntensityGrid::filled(spec, n); count]
    }

    fn test_link() -> Link {
        Link::new(3, (0, 1), Point::new(2.0, 3.0), Point::new(14.0, 11.0), 1e12)
    }

    fn dry_model() -> ChannelModel {
        ChannelModel { frequency: 1e12, dust: DustParams::default(), k_molecular: 0.0 }
    }

    #[test]
    fn friis_examples() {
        let base = free_space_path_loss(1e12, 1.0);
        assert!((base - 152.44).abs() < 0.01, "{base}");
        let six = 20.0 * 2f64.log10();
        assert!((free_space_path_loss(1e12, 2.0) - base - six).abs() < 1e-10);
        assert!((free_space_path_loss(2e12, 1.0) - base - six).abs() < 1e-10);
    }

    #[test]
    fn uniform_field_without_noise() {
        let noise = NoiseModel { sigma: 0.0, seed: 1 };
        let s = synthesize_link_attenuation(&test_link(), &uniform_frames(1e8, 5), &dry_model(), LinkSampling::default(), &noise).unwrap();
        for v in &s.values {
            assert!((v - 2.64).abs() / 2.64 < 0.01);
        }
        assert!(s.dusty.iter().all(|d| *d));
        let z = synthesize_link_attenuation(&test_link(), &uniform_frames(0.0, 5), &dry_model(), LinkSampling::Midpoint, &noise).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
        assert_eq!(z.clear_times(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn noisy_series_is_seeded() {
        let noise = NoiseModel { sigma: 0.05, seed: 42 };
        let frames = uniform_frames(1e7, 48);
        let a = synthesize_link_attenuation(&test_link(), &frames, &dry_model(), LinkSampling::default(), &noise).unwrap();
        let b = synthesize_link_attenuation(&test_link(), &frames, &dry_model(), LinkSampling::default(), &noise).unwrap();
        assert_eq!(a, b);
        let other = NoiseModel { seed: 43, ..noise };
        let c = synthesize_link_attenuation(&test_link(), &frames, &dry_model(), LinkSampling::default(), &other).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn endpoint_outside_field_is_an_error() {
        let link = Link::new(0, (0, 1), Point::new(2.0, 3.0), Point::new(25.0, 3.0), 1e12);
        let err = synthesize_link_attenuation(&link, &uniform_frames(1.0, 1), &dry_model(), LinkSampling::default(), &NoiseModel { sigma: 0.0, seed: 0 });
        assert!(matches!(err, Err(ChannelError::OutsideField { link: 0, .. })));
    }

    #[test]
    fn baseline_constant_and_robust() {
        let times: Vec<usize> = (0..48).collect();
        let values = vec![3.0; 48];
        let b = estimate_baseline_from(&times, &values, &times).unwrap();
        assert!(b.per_hour.iter().all(|v| *v == 3.0));

        let times = vec![5, 29, 53];
        let b = estimate_baseline_from(&times, &[1.0, 9.0, 1.0], &times);
        assert_eq!(b, Err(ChannelError::InsufficientBaseline { hour: 0 }));
        let mut bin = vec![1.0, 1.0, 9.0];
        assert_eq!(median(&mut bin), Some(1.0));
    }

    #[test]
    fn baseline_recovers_diurnal_cycle() {
        let times: Vec<usize> = (0..72).collect();
        let truth = |h: usize| 2.0 + (2.0 * std::f64::consts::PI * h as f64 / 24.0).sin();
        let values: Vec<f64> = times.iter().map(|t| truth(t % 24)).collect();
        let b = estimate_baseline_from(&times, &values, &times).unwrap();
        for h in 0..24 {
            assert_eq!(b.per_hour[h], truth(h));
        }
    }

    #[test]
    fn baseline_only_uses_clear_times() {
        let times: Vec<usize> = (0..48).collect();
        let values: Vec<f64> = times.iter().map(|t| if *t < 24 { 1.0 } else { 50.0 }).collect();
        let clear: Vec<usize> = (0..24).collect();
        let b = estimate_baseline_from(&times, &values, &clear).unwrap();
        assert!(b.per_hour.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn isolation_examples() {
        let k = 8.3e-5;
        let iso = isolate_dust_attenuation(5.0, 2.0, k);
        assert!((iso.a_dust - 2.64).abs() < 0.005);
        let n = concentration_from_attenuation(iso.a_dust, &DustParams::default(), 1e12);
        assert!((n - 1e8).abs() / 1e8 < 0.01);
        assert_eq!(isolate_dust_attenuation(2.0, 2.0, 0.0), IsolatedAttenuation { a_dust: 0.0, clamped: false });
        assert_eq!(isolate_dust_attenuation(1.0, 2.0, 0.0), IsolatedAttenuation { a_dust: 0.0, clamped: true });
        assert!(signal_level_change(5.0, 2.0, 0.0) < 0.0);
    }
}
