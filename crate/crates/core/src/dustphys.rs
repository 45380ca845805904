//! Closed-form dust attenuation in the small-particle (Rayleigh) limit, its
//! inverses, and the conversion from column dust optical depth to particle
//! concentration.
//!
//! Attenuation in dB/km:
//!
//! ```text
//! A = 1.029e6 · ε″ / ([(ε′+2)² + ε″²] · λ) · N · r̄³
//! ```
//!
//! with λ = c/f in meters, N in m⁻³ and r̄ in meters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::wavelength_m;

/// Prefactor of the attenuation closed form.
pub const ATTENUATION_COEFF: f64 = 1.029e6;
/// Numerator constant of the attenuation/visibility relation.
pub const VISIBILITY_COEFF: f64 = 566.0;
/// Numerator constant of the visibility/concentration relation.
pub const VISIBILITY_CONCENTRATION_COEFF: f64 = 5.5e-4;

#[derive(Debug, Error, PartialEq)]
pub enum DustError {
    #[error("no dust attenuation: visibility is unbounded")]
    UndefinedVisibility,
    #[error("visibility must be positive, got {0} km")]
    NonPositiveVisibility(f64),
    #[error("negative dust attenuation {0} dB/km")]
    NegativeAttenuation(f64),
    #[error("invalid dust parameters: {0}")]
    InvalidParams(String),
}

/// Particle properties independent of how much dust is aloft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DustParams {
    /// Mean particle radius, m.
    pub mean_radius: f64,
    pub eps_real: f64,
    pub eps_imag: f64,
}

impl Default for DustParams {
    fn default() -> Self {
        Self { mean_radius: 4.0e-6, eps_real: 1.55, eps_imag: 6.3 }
    }
}

impl DustParams {
    pub fn new(mean_radius: f64, eps_real: f64, eps_imag: f64) -> Result<Self, DustError> {
        let p = Self { mean_radius, eps_real, eps_imag };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DustError> {
        if !(self.mean_radius > 0.0 && self.mean_radius.is_finite()) {
            return Err(DustError::InvalidParams("mean radius must be positive".into()));
        }
        if !(self.eps_imag > 0.0 && self.eps_imag.is_finite()) {
            return Err(DustError::InvalidParams("imaginary permittivity must be positive".into()));
        }
        if !self.eps_real.is_finite() {
            return Err(DustError::InvalidParams("real permittivity must be finite".into()));
        }
        Ok(())
    }

    /// (ε′+2)² + ε″².
    pub fn dielectric_denominator(&self) -> f64 {
        (self.eps_real + 2.0).powi(2) + self.eps_imag.powi(2)
    }

    /// dA/dN: dB/km per particle/m³ at frequency `f`.
    pub fn attenuation_per_particle(&self, f: f64) -> f64 {
        ATTENUATION_COEFF * self.eps_imag * self.mean_radius.powi(3)
            / (self.dielectric_denominator() * wavelength_m(f))
    }
}

/// Dust particles suspended along a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DustMedium {
    pub params: DustParams,
    /// Number concentration, m⁻³.
    pub concentration: f64,
}

impl DustMedium {
    pub fn new(params: DustParams, concentration: f64) -> Result<Self, DustError> {
        params.validate()?;
        if !(concentration >= 0.0 && concentration.is_finite()) {
            return Err(DustError::InvalidParams("concentration must be nonnegative".into()));
        }
        Ok(Self { params, concentration })
    }

    pub fn with_concentration(concentration: f64) -> Self {
        Self { params: DustParams::default(), concentration }
    }
}

/// Dust-induced attenuation, dB/km.
pub fn dust_attenuation(dust: &DustMedium, f: f64) -> f64 {
    dust.params.attenuation_per_particle(f) * dust.concentration
}

/// Concentration (m⁻³) that produces `a_dust` dB/km at frequency `f`.
pub fn concentration_from_attenuation(a_dust: f64, params: &DustParams, f: f64) -> f64 {
    a_dust / params.attenuation_per_particle(f)
}

/// Visibility (km) implied by an isolated dust attenuation.
pub fn visibility_from_attenuation(a_dust: f64, params: &DustParams, f: f64) -> Result<f64, DustError> {
    if a_dust == 0.0 {
        return Err(DustError::UndefinedVisibility);
    }
    if !(a_dust > 0.0) {
        return Err(DustError::NegativeAttenuation(a_dust));
    }
    Ok(VISIBILITY_COEFF * params.mean_radius * params.eps_imag
        / (a_dust * wavelength_m(f) * params.dielectric_denominator()))
}

/// Batch-friendly visibility: `f64::INFINITY` when there is no dust
/// attenuation.
pub fn visibility_or_clear(a_dust: f64, params: &DustParams, f: f64) -> f64 {
    if a_dust <= 0.0 {
        f64::INFINITY
    } else {
        visibility_from_attenuation(a_dust, params, f).unwrap_or(f64::INFINITY)
    }
}

/// Concentration from visibility: N = 5.5e-4 / (r²·V).
pub fn concentration_from_visibility(visibility_km: f64, radius: f64) -> Result<f64, DustError> {
    if !(visibility_km > 0.0) {
        return Err(DustError::NonPositiveVisibility(visibility_km));
    }
    Ok(VISIBILITY_CONCENTRATION_COEFF / (radius * radius * visibility_km))
}

/// Column optical depth to near-surface concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdodConversion {
    /// Absorption-to-extinction optical depth factor.
    pub extinction_factor: f64,
    pub q_ext: f64,
    /// m.
    pub radius: f64,
    /// Scale height, m.
    pub scale_height: f64,
}

impl Default for CdodConversion {
    fn default() -> Self {
        Self { extinction_factor: 1.3, q_ext: 3.57, radius: 4.0e-6, scale_height: 1.11e4 }
    }
}

impl CdodConversion {
    pub fn validate(&self) -> Result<(), DustError> {
        let all_positive = [self.extinction_factor, self.q_ext, self.radius, self.scale_height]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if all_positive {
            Ok(())
        } else {
            Err(DustError::InvalidParams("CDOD conversion constants must be positive".into()))
        }
    }

    /// m⁻³ per unit CDOD.
    pub fn per_unit_cdod(&self) -> f64 {
        self.extinction_factor
            / (self.q_ext * std::f64::consts::PI * self.radius * self.radius * self.scale_height)
    }
}

/// N = CDOD·1.3 / (Q_ext·π·r²·H).
pub fn concentration_from_cdod(cdod: f64, conv: &CdodConversion) -> f64 {
    cdod * conv.per_unit_cdod()
}
