//! First-order uncertainty of dust attenuation with respect to particle
//! radius, concentration and the two permittivity components, plus a Monte
//! Carlo estimate to check it against.
//!
//! With A = K·ε″·N·r³ / (D·λ), D = (ε′+2)² + ε″²:
//!
//! ```text
//! ∂A/∂r  = 3A/r
//! ∂A/∂N  = A/N
//! ∂A/∂ε′ = −2A(ε′+2)/D
//! ∂A/∂ε″ = A·((ε′+2)² − ε″²)/(ε″·D)
//! ```

use std::fmt::Write as _;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dustphys::{dust_attenuation, DustMedium, DustParams};
use crate::rng;

/// Monte Carlo draws handled by one seeded chunk.
const MC_CHUNK: usize = 1 << 16;

/// One-sigma uncertainties of the dust parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBudget {
    /// m.
    pub sigma_r: f64,
    pub sigma_eps_real: f64,
    pub sigma_eps_imag: f64,
    /// Relative to N.
    pub sigma_n_rel: f64,
}

impl Default for UncertaintyBudget {
    fn default() -> Self {
        Self { sigma_r: 0.4e-6, sigma_eps_real: 0.0775, sigma_eps_imag: 0.315, sigma_n_rel: 0.2 }
    }
}

impl UncertaintyBudget {
    pub fn zero() -> Self {
        Self { sigma_r: 0.0, sigma_eps_real: 0.0, sigma_eps_imag: 0.0, sigma_n_rel: 0.0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.sigma_r, self.sigma_eps_real, self.sigma_eps_imag, self.sigma_n_rel];
        if all.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(format!("uncertainties must be finite and nonnegative: {self:?}"))
        }
    }
}

/// Partial derivatives of A (dB/km) at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partials {
    pub d_r: f64,
    pub d_n: f64,
    pub d_eps_real: f64,
    pub d_eps_imag: f64,
}

pub fn partial_derivatives(dust: &DustMedium, f: f64) -> Partials {
    let p = &dust.params;
    let a = dust_attenuation(dust, f);
    let d = p.dielectric_denominator();
    let e2 = p.eps_real + 2.0;
    let slope = p.attenuation_per_particle(f);
    Partials {
        d_r: 3.0 * a / p.mean_radius,
        d_n: slope,
        d_eps_real: -2.0 * a * e2 / d,
        d_eps_imag: a * (e2 * e2 - p.eps_imag * p.eps_imag) / (p.eps_imag * d),
    }
}

/// Variance contributions, (dB/km)².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub var_r: f64,
    pub var_n: f64,
    pub var_eps_real: f64,
    pub var_eps_imag: f64,
    /// dB/km.
    pub total_sigma: f64,
}

impl VarianceComponents {
    pub fn total_variance(&self) -> f64 {
        self.var_r + self.var_n + self.var_eps_real + self.var_eps_imag
    }
}

pub fn variance_components(dust: &DustMedium, f: f64, budget: &UncertaintyBudget) -> VarianceComponents {
    let d = partial_derivatives(dust, f);
    let sigma_n = budget.sigma_n_rel * dust.concentration;
    let var_r = (d.d_r * budget.sigma_r).powi(2);
    let var_n = (d.d_n * sigma_n).powi(2);
    let var_eps_real = (d.d_eps_real * budget.sigma_eps_real).powi(2);
    let var_eps_imag = (d.d_eps_imag * budget.sigma_eps_imag).powi(2);
    let total = var_r + var_n + var_eps_real + var_eps_imag;
    VarianceComponents { var_r, var_n, var_eps_real, var_eps_imag, total_sigma: total.sqrt() }
}

/// Variance of the concentration inferred from a measured attenuation,
/// (m⁻³)²: the attenuation variance divided by the squared slope dA/dN.
pub fn concentration_variance(attenuation_variance: f64, params: &DustParams, f: f64) -> f64 {
    attenuation_variance / params.attenuation_per_particle(f).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    /// Sample standard deviation of A, dB/km.
    pub sigma: f64,
    pub mean: f64,
    pub accepted: usize,
    /// Draws discarded for r ≤ 0, ε″ ≤ 0 or N < 0.
    pub rejected: usize,
}

impl MonteCarloResult {
    pub fn rejection_rate(&self) -> f64 {
        self.rejected as f64 / (self.accepted + self.rejected).max(1) as f64
    }
}

/// Standard deviation of A under independent Gaussian perturbations of the
/// four parameters, redrawing nonphysical samples.
pub fn monte_carlo_sigma(dust: &DustMedium, f: f64, budget: &UncertaintyBudget, n_samples: usize, seed: u64) -> MonteCarloResult {
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let partial: Vec<(usize, f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            mc_chunk(dust, f, budget, count, rng::derive_seed(seed, &[0x6d63, c as u64]))
        })
        .collect();
    // Chan et al. parallel merge, in chunk order
    let (mut n, mut mean, mut m2, mut rejected) = (0usize, 0.0, 0.0, 0usize);
    for (nb, mb, m2b, rej) in partial {
        if nb == 0 {
            rejected += rej;
            continue;
        }
        let total = n + nb;
        let delta = mb - mean;
        mean += delta * nb as f64 / total as f64;
        m2 += m2b + delta * delta * (n as f64) * (nb as f64) / total as f64;
        n = total;
        rejected += rej;
    }
    let sigma = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
    MonteCarloResult { sigma, mean, accepted: n, rejected }
}

fn mc_chunk(dust: &DustMedium, f: f64, budget: &UncertaintyBudget, count: usize, seed: u64) -> (usize, f64, f64, usize) {
    let mut rng = rng::stream(seed, &[]);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let p = dust.params;
    let sigma_n = budget.sigma_n_rel * dust.concentration;
    let (mut mean, mut m2, mut rejected) = (0.0, 0.0, 0usize);
    let mut k = 0usize;
    while k < count {
        let r = p.mean_radius + budget.sigma_r * std.sample(&mut rng);
        let n = dust.concentration + sigma_n * std.sample(&mut rng);
        let er = p.eps_real + budget.sigma_eps_real * std.sample(&mut rng);
        let ei = p.eps_imag + budget.sigma_eps_imag * std.sample(&mut rng);
        if !(r > 0.0 && ei > 0.0 && n >= 0.0) {
            rejected += 1;
            continue;
        }
        let medium = DustMedium { params: DustParams { mean_radius: r, eps_real: er, eps_imag: ei }, concentration: n };
        let a = dust_attenuation(&medium, f);
        k += 1;
        let delta = a - mean;
        mean += delta / k as f64;
        m2 += delta * (a - mean);
    }
    (count, mean, m2, rejected)
}

/// Variance breakdown versus frequency as CSV.
pub fn frequency_sweep_csv(dust: &DustMedium, budget: &UncertaintyBudget, frequencies: &[f64]) -> String {
    let mut out = String::from("frequency_hz,attenuation_db_km,var_r,var_n,var_eps_real,var_eps_imag,total_sigma\n");
    for &f in frequencies {
        let v = variance_components(dust, f, budget);
        let _ = writeln!(
            out,
            "{f:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            dust_attenuation(dust, f),
            v.var_r,
            v.var_n,
            v.var_eps_real,
            v.var_eps_imag,
            v.total_sigma
        );
    }
    out
}
