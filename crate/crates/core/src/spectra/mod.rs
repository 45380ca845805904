//! Line-by-line molecular absorption for a CO₂-dominated, low-pressure
//! atmosphere.
//!
//! Catalog lines are evaluated with a temperature-scaled intensity and a
//! Doppler (Gaussian) profile; pressure broadening is not modelled. The
//! absorption coefficient follows
//!
//! ```text
//! k(f) = Σ (p/p₀)·(T_STP/T)·Q·S(T)·F(f)
//! ```
//!
//! with `Q` the ideal-gas number density of the absorbing gas.
//!
//! # Units
//!
//! Catalog intensities arrive in cm⁻¹/(molecule·cm⁻²) and are converted once,
//! when a [`SpectralLine`] is built, to Hz·m² per molecule. The line shape is
//! in Hz⁻¹, so cross-sections come out in m² and `Q·σ` in m⁻¹.
//!
//! # Isotopic abundance
//!
//! Catalog intensities are already weighted by natural isotopic abundance, so
//! the mixing ratio used for the number density is the parent-gas mixing
//! ratio and no second abundance factor is applied. The abundance carried on
//! [`Constituent`] is informational only.

mod hitran;
mod partition;

pub use hitran::{format_record, parse_line_catalog, parse_line_catalog_str, HITRAN_RECORD_WIDTH};
pub use partition::{default_power_law_exponent, PartitionMode, PartitionModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{
    wavenumber_to_hz, AVOGADRO, BOLTZMANN, GAS_CONSTANT, HC_OVER_K_CM_K, NEPER_PER_M_TO_DB_PER_KM,
    P_STANDARD, SPEED_OF_LIGHT, T_REF, T_STANDARD,
};

/// HITRAN molecule id of carbon dioxide.
pub const CO2: u16 = 2;
/// HITRAN molecule id of water vapour.
pub const H2O: u16 = 1;
/// HITRAN molecule id of molecular nitrogen.
pub const N2: u16 = 22;

/// Lines contribute only within this many Doppler half-widths of their center.
pub const WING_CUTOFF_HALFWIDTHS: f64 = 20.0;

/// Temperature validity window for [`AtmosphereState`], K.
pub const TEMPERATURE_WINDOW_K: (f64, f64) = (150.0, 320.0);

/// Intensity conversion: cm⁻¹/(molecule·cm⁻²) → Hz·m²/molecule.
const INTENSITY_CM_TO_SI: f64 = 100.0 * SPEED_OF_LIGHT * 1.0e-4;

#[derive(Debug, Error, PartialEq)]
pub enum SpectraError {
    #[error("catalog record {index}: {reason}")]
    Parse { index: usize, reason: String },
    #[error("frequency window lower bound {lower} Hz must be below upper bound {upper} Hz")]
    InvalidWindow { lower: f64, upper: f64 },
    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),
    #[error("temperature {temperature} K outside validity window [{min}, {max}] K")]
    TemperatureOutOfWindow { temperature: f64, min: f64, max: f64 },
    #[error("invalid atmosphere: {0}")]
    InvalidAtmosphere(String),
    #[error("invalid spectral line: {0}")]
    InvalidLine(String),
    #[error("species {gas}:{isotopologue} not present in atmospheric composition")]
    UnknownSpecies { gas: u16, isotopologue: u16 },
    #[error("partition table line {line}: {reason}")]
    PartitionTable { line: usize, reason: String },
    #[error("catalog read failed: {0}")]
    Io(String),
}

/// One catalog absorption line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub molecule_id: u16,
    pub isotopologue_id: u16,
    /// Line center, Hz.
    pub center_frequency: f64,
    /// Intensity at 296 K in Hz·m² per molecule.
    pub reference_intensity: f64,
    /// Lower-state energy, cm⁻¹.
    pub lower_state_energy: f64,
    /// kg/mol.
    pub molar_mass: f64,
}

impl SpectralLine {
    /// Builds a line from catalog-native quantities: wavenumber in cm⁻¹ and
    /// intensity in cm⁻¹/(molecule·cm⁻²).
    pub fn from_catalog_units(
        molecule_id: u16,
        isotopologue_id: u16,
        wavenumber_cm: f64,
        intensity_cm: f64,
        lower_state_energy: f64,
        molar_mass: f64,
    ) -> Result<Self, SpectraError> {
        let line = Self {
            molecule_id,
            isotopologue_id,
            center_frequency: wavenumber_to_hz(wavenumber_cm),
            reference_intensity: intensity_cm * INTENSITY_CM_TO_SI,
            lower_state_energy,
            molar_mass,
        };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<(), SpectraError> {
        let bad = |what: &str| Err(SpectraError::InvalidLine(what.to_string()));
        if !(self.center_frequency > 0.0 && self.center_frequency.is_finite()) {
            return bad("center frequency must be positive");
        }
        if !(self.reference_intensity >= 0.0 && self.reference_intensity.is_finite()) {
            return bad("reference intensity must be nonnegative");
        }
        if !(self.lower_state_energy >= 0.0 && self.lower_state_energy.is_finite()) {
            return bad("lower-state energy must be nonnegative");
        }
        if !(self.molar_mass > 0.0 && self.molar_mass.is_finite()) {
            return bad("molar mass must be positive");
        }
        Ok(())
    }

    /// Line position in cm⁻¹.
    pub fn wavenumber(&self) -> f64 {
        self.center_frequency / (100.0 * SPEED_OF_LIGHT)
    }

    /// Reference intensity back in cm⁻¹/(molecule·cm⁻²).
    pub fn intensity_catalog_units(&self) -> f64 {
        self.reference_intensity / INTENSITY_CM_TO_SI
    }
}

/// Mean molar mass (kg/mol) of a catalog molecule, if known.
pub fn molar_mass_of(molecule_id: u16) -> Option<f64> {
    let grams = match molecule_id {
        1 => 18.015_28,
        2 => 44.009_5,
        3 => 47.998_2,
        4 => 44.012_8,
        5 => 28.010_1,
        6 => 16.042_5,
        7 => 31.998_8,
        8 => 30.006_1,
        9 => 64.066,
        10 => 46.005_5,
        11 => 17.030_5,
        13 => 17.007_3,
        14 => 20.006_3,
        15 => 36.460_9,
        19 => 60.075,
        22 => 28.013_4,
        23 => 27.025_3,
        26 => 26.037_3,
        45 => 2.015_88,
        _ => return None,
    };
    Some(grams * 1.0e-3)
}

/// One gas in the atmospheric mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constituent {
    pub gas: u16,
    /// 0 matches every isotopologue of `gas`.
    pub isotopologue: u16,
    pub mixing_ratio: f64,
    /// Carried for reference; catalog intensities already include it.
    pub isotopic_abundance: f64,
}

impl Constituent {
    pub fn gas(gas: u16, mixing_ratio: f64) -> Self {
        Self { gas, isotopologue: 0, mixing_ratio, isotopic_abundance: 1.0 }
    }
}

/// Ambient conditions a catalog is evaluated in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereState {
    temperature: f64,
    pressure: f64,
    composition: Vec<Constituent>,
}

impl AtmosphereState {
    pub fn new(
        temperature: f64,
        pressure: f64,
        composition: Vec<Constituent>,
    ) -> Result<Self, SpectraError> {
        Self::with_window(temperature, pressure, composition, TEMPERATURE_WINDOW_K)
    }

    pub fn with_window(
        temperature: f64,
        pressure: f64,
        composition: Vec<Constituent>,
        window: (f64, f64),
    ) -> Result<Self, SpectraError> {
        if !(temperature >= window.0 && temperature <= window.1) {
            return Err(SpectraError::TemperatureOutOfWindow {
                temperature,
                min: window.0,
                max: window.1,
            });
        }
        if !(pressure > 0.0 && pressure.is_finite()) {
            return Err(SpectraError::InvalidAtmosphere(format!(
                "pressure must be positive, got {pressure} Pa"
            )));
        }
        let mut total = 0.0;
        for c in &composition {
            if !(c.mixing_ratio >= 0.0 && c.mixing_ratio.is_finite()) {
                return Err(SpectraError::InvalidAtmosphere(format!(
                    "mixing ratio of gas {} must be nonnegative",
                    c.gas
                )));
            }
            total += c.mixing_ratio;
        }
        if total > 1.0 + 1e-6 {
            return Err(SpectraError::InvalidAtmosphere(format!(
                "mixing ratios sum to {total}, above 1"
            )));
        }
        Ok(Self { temperature, pressure, composition })
    }

    /// Near-surface Mars: 210 K, 610 Pa, 95.32 % CO₂ and 2.7 % N₂. Argon has
    /// no catalog lines and is left out of the mixture.
    pub fn mars_default() -> Self {
        Self::new(
            210.0,
            610.0,
            vec![Constituent::gas(CO2, 0.9532), Constituent::gas(N2, 0.027)],
        )
        .expect("default atmosphere is valid")
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn pressure(&self) -> f64 {
        self.pressure
    }

    pub fn composition(&self) -> &[Constituent] {
        &self.composition
    }

    fn mixing_ratio(&self, gas: u16, isotopologue: u16) -> Option<f64> {
        self.composition
            .iter()
            .find(|c| c.gas == gas && (c.isotopologue == 0 || c.isotopologue == isotopologue))
            .map(|c| c.mixing_ratio)
    }
}

/// Line intensity at temperature `t`, in the units of
/// `line.reference_intensity`.
pub fn line_intensity_at(
    line: &SpectralLine,
    t: f64,
    partition: &PartitionModel,
) -> Result<f64, SpectraError> {
    if !(t > 0.0) {
        return Err(SpectraError::NonPositiveTemperature(t));
    }
    Ok(intensity_unchecked(line, t, partition))
}

fn intensity_unchecked(line: &SpectralLine, t: f64, partition: &PartitionModel) -> f64 {
    let q_ratio = partition.q_ratio(line.molecule_id, line.isotopologue_id, t);
    let boltzmann =
        (-HC_OVER_K_CM_K * line.lower_state_energy * (1.0 / t - 1.0 / T_REF)).exp();
    let nu = line.wavenumber();
    let stimulated = (-(HC_OVER_K_CM_K * nu / t)).exp_m1() / (-(HC_OVER_K_CM_K * nu / T_REF)).exp_m1();
    line.reference_intensity * q_ratio * boltzmann * stimulated
}

/// Doppler half-width at half maximum, Hz.
pub fn doppler_halfwidth(line: &SpectralLine, t: f64) -> f64 {
    let thermal = 2.0 * AVOGADRO * BOLTZMANN * t * std::f64::consts::LN_2 / line.molar_mass;
    line.center_frequency / SPEED_OF_LIGHT * thermal.sqrt()
}

/// Normalized Gaussian profile, Hz⁻¹.
pub fn gaussian_line_shape(f: f64, line_center: f64, a_d: f64) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    let df = f - line_center;
    (ln2 / (std::f64::consts::PI * a_d * a_d)).sqrt() * (-(df * df) * ln2 / (a_d * a_d)).exp()
}

/// Absorption cross-section σ(f) = S(T)·F(f) in m² per molecule. Zero beyond
/// [`WING_CUTOFF_HALFWIDTHS`] half-widths from the line center.
pub fn absorption_cross_section(
    line: &SpectralLine,
    t: f64,
    f: f64,
    partition: &PartitionModel,
) -> Result<f64, SpectraError> {
    let s = line_intensity_at(line, t, partition)?;
    let a_d = doppler_halfwidth(line, t);
    if (f - line.center_frequency).abs() > WING_CUTOFF_HALFWIDTHS * a_d {
        return Ok(0.0);
    }
    Ok(s * gaussian_line_shape(f, line.center_frequency, a_d))
}

/// Ideal-gas number density of one species, m⁻³.
pub fn molecular_volume_density(
    atm: &AtmosphereState,
    gas: u16,
    isotopologue: u16,
) -> Result<f64, SpectraError> {
    let q = atm
        .mixing_ratio(gas, isotopologue)
        .ok_or(SpectraError::UnknownSpecies { gas, isotopologue })?;
    Ok(atm.pressure / (GAS_CONSTANT * atm.temperature) * q * AVOGADRO)
}

/// Monochromatic absorption coefficient k(f), m⁻¹, with the default wing
/// cutoff. Lines of gases absent from the composition contribute nothing.
pub fn absorption_coefficient(
    atm: &AtmosphereState,
    catalog: &[SpectralLine],
    f: f64,
    partition: &PartitionModel,
) -> f64 {
    absorption_coefficient_with_cutoff(atm, catalog, f, partition, WING_CUTOFF_HALFWIDTHS)
}

pub fn absorption_coefficient_with_cutoff(
    atm: &AtmosphereState,
    catalog: &[SpectralLine],
    f: f64,
    partition: &PartitionModel,
    cutoff_halfwidths: f64,
) -> f64 {
    let t = atm.temperature;
    let scale = atm.pressure / P_STANDARD * T_STANDARD / t;
    catalog
        .iter()
        .filter_map(|line| {
            let a_d = doppler_halfwidth(line, t);
            if (f - line.center_frequency).abs() > cutoff_halfwidths * a_d {
                return None;
            }
            let density = molecular_volume_density(atm, line.molecule_id, line.isotopologue_id).ok()?;
            let sigma =
                intensity_unchecked(line, t, partition) * gaussian_line_shape(f, line.center_frequency, a_d);
            Some(scale * density * sigma)
        })
        .sum()
}

/// Path loss through a homogeneous absorber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeerLambertLoss {
    /// e^{k·d}, ≥ 1.
    pub factor: f64,
    pub db: f64,
}

/// Beer-Lambert loss over `d` meters for absorption coefficient `k` in m⁻¹.
pub fn beer_lambert_loss(k: f64, d: f64) -> BeerLambertLoss {
    let factor = (k * d).exp();
    BeerLambertLoss { factor, db: 10.0 * factor.log10() }
}

/// Specific molecular attenuation in dB/km for `k` in m⁻¹.
pub fn db_per_km(k: f64) -> f64 {
    k * NEPER_PER_M_TO_DB_PER_KM
}

#[cfg(test)]
mod tests {
    use super::*;

    fn co2_line(wavenumber: f64, lower: f64) -> SpectralLine {
        SpectralLine::from_catalog_units(CO2, 1, wavenumber, 1.0e-22, lower, 0.04401).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn intensity_identity_at_reference_temperature() {
        let line = co2_line(33.3564, 250.0);
        let s = line_intensity_at(&line, T_REF, &PartitionModel::power_law()).unwrap();
        assert!(rel(s, line.reference_intensity) < 1e-14);
    }

    #[test]
    fn intensity_without_lower_state_energy() {
        let line = co2_line(33.3564, 0.0);
        let t = 180.0;
        let p = PartitionModel::power_law();
        let expected = line.reference_intensity
            * p.q_ratio(CO2, 1, t)
            * (1.0 - (-HC_OVER_K_CM_K * line.wavenumber() / t).exp())
            / (1.0 - (-HC_OVER_K_CM_K * line.wavenumber() / T_REF).exp());
        assert!(rel(line_intensity_at(&line, t, &p).unwrap(), expected) < 1e-13);
    }

    #[test]
    fn intensity_worked_line() {
        // hand evaluation with hc/k = 1.4388 cm·K gives 1.5766
        let line = co2_line(33.3564, 100.0);
        let p = PartitionModel::power_law_with_exponent(1.0).unwrap();
        let s = line_intensity_at(&line, 210.0, &p).unwrap();
        assert!((s / line.reference_intensity - 1.577).abs() < 1e-3);
    }

    #[test]
    fn intensity_rejects_nonpositive_temperature() {
        let line = co2_line(33.3564, 100.0);
        assert_eq!(
            line_intensity_at(&line, 0.0, &PartitionModel::power_law()),
            Err(SpectraError::NonPositiveTemperature(0.0))
        );
    }

    #[test]
    fn doppler_worked_value_and_scaling() {
        let line = SpectralLine { center_frequency: 1.0e12, ..co2_line(33.3564, 0.0) };
        let a = doppler_halfwidth(&line, 210.0);
        assert!(rel(a, 7.82e5) < 1e-3, "a_D = {a}");
        assert!(rel(doppler_halfwidth(&line, 840.0), 2.0 * a) < 1e-14);
        let doubled = SpectralLine { center_frequency: 2.0e12, ..line };
        assert!(rel(doppler_halfwidth(&doubled, 210.0), 2.0 * a) < 1e-14);
    }

    #[test]
    fn line_shape_peak_and_half_maximum() {
        let a = 7.82e5;
        let peak = gaussian_line_shape(1e12, 1e12, a);
        assert!(rel(peak, 6.01e-7) < 1e-3);
        assert!(rel(gaussian_line_shape(1e12 + a, 1e12, a), peak / 2.0) < 1e-14);
        assert!(rel(gaussian_line_shape(1e12 - a, 1e12, a), peak / 2.0) < 1e-14);
    }

    #[test]
    fn cross_section_at_center_and_far_wing() {
        let line = co2_line(33.3564, 100.0);
        let p = PartitionModel::power_law_with_exponent(1.0).unwrap();
        let t = 210.0;
        let a_d = doppler_halfwidth(&line, t);
        let s = line_intensity_at(&line, t, &p).unwrap();
        let peak = absorption_cross_section(&line, t, line.center_frequency, &p).unwrap();
        let expected = s * (std::f64::consts::LN_2 / (std::f64::consts::PI * a_d * a_d)).sqrt();
        assert!(rel(peak, expected) < 1e-14);
        let wing = absorption_cross_section(&line, t, line.center_frequency + 20.5 * a_d, &p).unwrap();
        assert_eq!(wing, 0.0);
        // the dropped tail is tiny but far from negligible in the sense of 1e-170
        let at_cutoff = gaussian_line_shape(1e12 + 20.0 * a_d, 1e12, a_d) / gaussian_line_shape(1e12, 1e12, a_d);
        assert!(rel(at_cutoff, (-400.0 * std::f64::consts::LN_2).exp()) < 1e-9);
        assert!(at_cutoff > 1e-121 && at_cutoff < 1e-120);
    }

    #[test]
    fn number_density_examples() {
        let atm = AtmosphereState::new(210.0, 610.0, vec![Constituent::gas(CO2, 0.9532)]).unwrap();
        let q = molecular_volume_density(&atm, CO2, 1).unwrap();
        assert!(rel(q, 2.01e23) < 5e-3, "Q = {q}");
        let doubled = AtmosphereState::new(210.0, 1220.0, atm.composition().to_vec()).unwrap();
        assert!(rel(molecular_volume_density(&doubled, CO2, 1).unwrap(), 2.0 * q) < 1e-14);
        let none = AtmosphereState::new(210.0, 610.0, vec![Constituent::gas(CO2, 0.0)]).unwrap();
        assert_eq!(molecular_volume_density(&none, CO2, 1).unwrap(), 0.0);
        assert!(matches!(
            molecular_volume_density(&atm, H2O, 1),
            Err(SpectraError::UnknownSpecies { gas: 1, .. })
        ));
    }

    #[test]
    fn atmosphere_validation() {
        assert!(AtmosphereState::new(100.0, 610.0, vec![]).is_err());
        assert!(AtmosphereState::new(210.0, 0.0, vec![]).is_err());
        assert!(AtmosphereState::new(
            210.0,
            610.0,
            vec![Constituent::gas(CO2, 0.9), Constituent::gas(N2, 0.2)]
        )
        .is_err());
    }

    #[test]
    fn empty_catalog_has_no_absorption() {
        let atm = AtmosphereState::mars_default();
        assert_eq!(absorption_coefficient(&atm, &[], 1e12, &PartitionModel::power_law()), 0.0);
    }

    #[test]
    fn single_line_coefficient_is_one_term() {
        let atm = AtmosphereState::mars_default();
        let line = co2_line(33.3564, 100.0);
        let p = PartitionModel::power_law();
        let k = absorption_coefficient(&atm, &[line], line.center_frequency, &p);
        let t = atm.temperature();
        let expected = atm.pressure() / P_STANDARD * T_STANDARD / t
            * molecular_volume_density(&atm, CO2, 1).unwrap()
            * absorption_cross_section(&line, t, line.center_frequency, &p).unwrap();
        assert!(rel(k, expected) < 1e-14);
    }

    #[test]
    fn beer_lambert_examples() {
        let lossless = beer_lambert_loss(0.0, 5000.0);
        assert_eq!((lossless.factor, lossless.db), (1.0, 0.0));
        let zero_d = beer_lambert_loss(1e-3, 0.0);
        assert_eq!((zero_d.factor, zero_d.db), (1.0, 0.0));
        let km = beer_lambert_loss(1e-5, 1000.0);
        assert!((km.db - 0.04343).abs() < 1e-5);
        assert!(rel(km.db, db_per_km(1e-5)) < 1e-12);
    }
}
