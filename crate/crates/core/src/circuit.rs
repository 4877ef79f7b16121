//! Lumped-element design helpers: SQUID-array resonator frequencies, Kerr
//! shifts, coupling and port rates from capacitor values and Josephson
//! energies, plus flux-tuning curves.

use crate::params::DimerParams;
use crate::units::{E_CHARGE, FLUX_QUANTUM, HBAR};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_Z0: f64 = 50.0;
/// Largest omega0*C_kappa*Z0 for which the perturbative port-rate formula is
/// trusted.
pub const COUPLING_VALIDITY_LIMIT: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("{name} must be positive, got {value:.3e}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("need at least one SQUID per array")]
    ZeroSquids,
    #[error("junction asymmetry requires e_j2 >= e_j1, got e_j1 = {e_j1:.3e}, e_j2 = {e_j2:.3e}")]
    InvalidAsymmetry { e_j1: f64, e_j2: f64 },
    #[error("capacitive port formula out of its validity range: omega0*C_kappa*Z0 = {validity:.3} > {COUPLING_VALIDITY_LIMIT}; the computed rates are attached for inspection")]
    UnphysicalRegime { validity: f64, params: DimerParams },
}

/// Element values of the two-resonator circuit. Both resonators share
/// identical M-SQUID arrays; phi_ext is in units of the flux quantum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Left (port-side) shunt capacitance, F.
    pub c_l: f64,
    /// Right shunt capacitance, F.
    pub c_r: f64,
    /// Resonator-resonator coupling capacitance, F.
    pub c_j: f64,
    /// Port coupling capacitance, F.
    pub c_kappa: f64,
    /// SQUIDs per array.
    pub m: u32,
    /// Smaller junction energy, J.
    pub e_j1: f64,
    /// Larger junction energy, J.
    pub e_j2: f64,
    /// Line impedance, Ohm.
    pub z0: f64,
    /// External flux through each SQUID, units of the flux quantum.
    pub phi_ext: f64,
}

/// Effective Josephson energy of one asymmetric SQUID at external flux
/// `phi_ext` (units of the flux quantum):
/// (E1+E2) sqrt(cos^2 + d^2 sin^2), d = (E2-E1)/(E1+E2). Finite everywhere;
/// the half-flux floor is (E1+E2)*d.
pub fn squid_array_energy(e_j1: f64, e_j2: f64, phi_ext: f64) -> f64 {
    let total = e_j1 + e_j2;
    let d = (e_j2 - e_j1) / total;
    let x = std::f64::consts::PI * phi_ext;
    let (s, c) = x.sin_cos();
    total * (c * c + d * d * s * s).sqrt()
}

impl CircuitParams {
    pub fn validate(&self) -> Result<(), CircuitError> {
        for (name, value) in [
            ("c_l", self.c_l),
            ("c_r", self.c_r),
            ("c_j", self.c_j),
            ("c_kappa", self.c_kappa),
            ("e_j1", self.e_j1),
            ("e_j2", self.e_j2),
            ("z0", self.z0),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(CircuitError::NonPositive { name, value });
            }
        }
        if self.m == 0 {
            return Err(CircuitError::ZeroSquids);
        }
        if self.e_j2 < self.e_j1 {
            return Err(CircuitError::InvalidAsymmetry {
                e_j1: self.e_j1,
                e_j2: self.e_j2,
            });
        }
        Ok(())
    }

    /// Junction asymmetry d in [0, 1).
    pub fn asymmetry(&self) -> f64 {
        (self.e_j2 - self.e_j1) / (self.e_j1 + self.e_j2)
    }

    /// Array inductance at flux `phi` (units of the flux quantum): M series
    /// SQUIDs of inductance (Phi0/2pi)^2 / E_J each.
    pub fn array_inductance(&self, phi: f64) -> f64 {
        let phi0_bar = FLUX_QUANTUM / (2.0 * std::f64::consts::PI);
        self.m as f64 * phi0_bar * phi0_bar / squid_array_energy(self.e_j1, self.e_j2, phi)
    }

    /// (omega_l, omega_r) at flux `phi`, rad/s.
    pub fn mode_frequencies_at(&self, phi: f64) -> (f64, f64) {
        let l = self.array_inductance(phi);
        (1.0 / (l * self.c_l).sqrt(), 1.0 / (l * self.c_r).sqrt())
    }

    /// omega0 * C_kappa * Z0 at the operating flux; the port-rate formula
    /// needs this to be small.
    pub fn coupling_validity(&self) -> f64 {
        let (wl, wr) = self.mode_frequencies_at(self.phi_ext);
        (wl * wr).sqrt() * self.c_kappa * self.z0
    }
}

/// Maps circuit values to dimer rates at the operating flux. Kerr per mode is
/// -e^2/(2 C_X hbar M^2); J = C_J omega0 / (4 C_R); the port rate uses the
/// weak capacitive coupling result omega0^2 C_kappa^2 Z0 / C_L with omega0
/// the geometric mean of the two mode frequencies. Internal losses are not
/// modeled and come out zero.
pub fn circuit_to_dimer(c: &CircuitParams) -> Result<DimerParams, CircuitError> {
    c.validate()?;
    let (omega_l, omega_r) = c.mode_frequencies_at(c.phi_ext);
    let omega0 = (omega_l * omega_r).sqrt();
    let mm = (c.m as f64) * (c.m as f64);
    let u_l = -E_CHARGE * E_CHARGE / (2.0 * c.c_l * HBAR * mm);
    let u_r = -E_CHARGE * E_CHARGE / (2.0 * c.c_r * HBAR * mm);
    let j = c.c_j * omega0 / (4.0 * c.c_r);
    let kappa = omega0 * omega0 * c.c_kappa * c.c_kappa * c.z0 / c.c_l;
    let params = DimerParams {
        omega_l,
        omega_r,
        u_l,
        u_r,
        j,
        kappa,
        kappa_int_l: 0.0,
        kappa_r: 0.0,
        kappa_int_r: 0.0,
    };
    let validity = c.coupling_validity();
    if validity > COUPLING_VALIDITY_LIMIT {
        return Err(CircuitError::UnphysicalRegime { validity, params });
    }
    Ok(params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxTuningPoint {
    /// Units of the flux quantum.
    pub phi: f64,
    pub omega_l: f64,
    pub omega_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxTuningCurve {
    pub points: Vec<FluxTuningPoint>,
}

impl FluxTuningCurve {
    /// max - min of the left mode over the grid.
    pub fn span_l(&self) -> f64 {
        let (lo, hi) = self
            .points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.omega_l), hi.max(p.omega_l))
            });
        hi - lo
    }

    pub fn span_r(&self) -> f64 {
        let (lo, hi) = self
            .points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.omega_r), hi.max(p.omega_r))
            });
        hi - lo
    }
}

/// Mode frequencies over a flux grid (units of the flux quantum). Only the
/// inductance varies with flux; the port and coupling rates are left to
/// `circuit_to_dimer` at a fixed operating point.
pub fn flux_tuning_curve(c: &CircuitParams, phis: &[f64]) -> Result<FluxTuningCurve, CircuitError> {
    c.validate()?;
    let points = phis
        .iter()
        .map(|&phi| {
            let (omega_l, omega_r) = c.mode_frequencies_at(phi);
            FluxTuningPoint {
                phi,
                omega_l,
                omega_r,
            }
        })
        .collect();
    Ok(FluxTuningCurve { points })
}

/// Element values that land on a 7.1 GHz symmetric dimer with a -80 kHz
/// Kerr shift per mode, quarter/three-quarter junction split (d = 0.5,
/// about 2 GHz of tuning) and a few-MHz port rate inside the validity range
/// of the coupling formula.
pub fn reference_design() -> CircuitParams {
    let omega0 = 2.0 * std::f64::consts::PI * 7.1e9;
    let u_target = 2.0 * std::f64::consts::PI * 80e3;
    let m = 8u32;
    let c_r = E_CHARGE * E_CHARGE / (2.0 * HBAR * u_target * (m as f64).powi(2));
    let phi0_bar = FLUX_QUANTUM / (2.0 * std::f64::consts::PI);
    let e_j_total = omega0 * omega0 * (m as f64) * phi0_bar * phi0_bar * c_r;
    let j_target = 2.0 * std::f64::consts::PI * 0.25e9;
    CircuitParams {
        c_l: c_r,
        c_r,
        c_j: 4.0 * c_r * j_target / omega0,
        c_kappa: 30e-15,
        m,
        e_j1: 0.25 * e_j_total,
        e_j2: 0.75 * e_j_total,
        z0: DEFAULT_Z0,
        phi_ext: 0.0,
    }
}
