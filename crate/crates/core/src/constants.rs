//! Physical constants in SI units (CODATA 2018 exact values where defined).

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Avogadro constant, mol⁻¹.
pub const AVOGADRO: f64 = 6.022_140_76e23;

/// Molar gas constant R = N_A·k_B, J/(mol·K).
pub const GAS_CONSTANT: f64 = AVOGADRO * BOLTZMANN;

/// Second radiation constant hc/k_B expressed in cm·K, the form used with
/// wavenumbers in cm⁻¹.
pub const HC_OVER_K_CM_K: f64 = PLANCK * SPEED_OF_LIGHT * 100.0 / BOLTZMANN;

/// Catalog reference temperature for line intensities, K.
pub const T_REF: f64 = 296.0;

/// Standard pressure, Pa.
pub const P_STANDARD: f64 = 101_325.0;

/// Standard temperature, K.
pub const T_STANDARD: f64 = 273.15;

/// Multiplier turning an absorption coefficient in m⁻¹ into dB/km:
/// 10·log₁₀(e)·1000.
pub const NEPER_PER_M_TO_DB_PER_KM: f64 = 1.0e4 * std::f64::consts::LOG10_E;

/// Converts a wavenumber in cm⁻¹ into frequency in Hz.
#[inline]
pub fn wavenumber_to_hz(wavenumber_cm: f64) -> f64 {
    100.0 * SPEED_OF_LIGHT * wavenumber_cm
}

/// Converts a frequency in Hz into a wavenumber in cm⁻¹.
#[inline]
pub fn hz_to_wavenumber(freq_hz: f64) -> f64 {
    freq_hz / (100.0 * SPEED_OF_LIGHT)
}

/// Free-space wavelength in meters.
#[inline]
pub fn wavelength_m(freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / freq_hz
}
