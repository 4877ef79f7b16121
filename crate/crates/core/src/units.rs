//! Physical constants (SI, 2019 redefinition) and frequency-unit helpers.

use std::f64::consts::TAU;

/// Reduced Planck constant, J*s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J*s.
pub const H_PLANCK: f64 = 6.626_070_15e-34;
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Superconducting flux quantum h/(2e), Wb.
pub const FLUX_QUANTUM: f64 = H_PLANCK / (2.0 * E_CHARGE);

pub fn ghz_to_radps(f_ghz: f64) -> f64 {
    f_ghz * 1e9 * TAU
}

pub fn radps_to_ghz(w: f64) -> f64 {
    w / (1e9 * TAU)
}

pub fn mhz_to_radps(f_mhz: f64) -> f64 {
    f_mhz * 1e6 * TAU
}

pub fn radps_to_mhz(w: f64) -> f64 {
    w / (1e6 * TAU)
}

pub fn hz_to_radps(f_hz: f64) -> f64 {
    f_hz * TAU
}

pub fn radps_to_hz(w: f64) -> f64 {
    w / TAU
}

/// 10*log10; linear power ratio to dB.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
