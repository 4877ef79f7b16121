//! Model parameters, drive description, and the classical equations of motion.
//!
//! Sign conventions, fixed once here and relied on everywhere else:
//! * detunings are delta_X = omega_X - omega_p (mode minus pump);
//! * the drive enters the left-mode equation as +sqrt(kappa)*alpha_in;
//! * the output field is a_out = a_in - sqrt(kappa)*a_L;
//! * |alpha_in|^2 is the incident photon flux in photons/s and the incident
//!   power is P = hbar*omega_p*|alpha_in|^2.

use crate::units::HBAR;
use crate::C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("port coupling kappa must be > 0, got {0}")]
    NonPositiveKappa(f64),
    #[error("{name} must be finite and >= 0, got {value}")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
}

/// Static device parameters of the dimer. All entries in rad/s.
///
/// `kappa` is the left-mode coupling to the measurement port; `kappa_r` an
/// optional right-mode external coupling; `kappa_int_*` internal losses.
/// The device is "lossless" when only `kappa` is nonzero, in which case the
/// port scattering is symplectic and the output state pure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerParams {
    pub omega_l: f64,
    pub omega_r: f64,
    /// Kerr shift per photon; negative for junction-derived nonlinearity.
    pub u_l: f64,
    pub u_r: f64,
    /// Hopping rate between the modes, >= 0.
    pub j: f64,
    /// Left-mode port coupling, > 0.
    pub kappa: f64,
    pub kappa_int_l: f64,
    pub kappa_r: f64,
    pub kappa_int_r: f64,
}

impl DimerParams {
    /// Symmetric lossless dimer: equal bare frequencies and Kerr shifts,
    /// single port on the left.
    pub fn symmetric(omega: f64, u: f64, j: f64, kappa: f64) -> Self {
        Self {
            omega_l: omega,
            omega_r: omega,
            u_l: u,
            u_r: u,
            j,
            kappa,
            kappa_int_l: 0.0,
            kappa_r: 0.0,
            kappa_int_r: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, value) in [
            ("omega_l", self.omega_l),
            ("omega_r", self.omega_r),
            ("u_l", self.u_l),
            ("u_r", self.u_r),
        ] {
            if !value.is_finite() {
                return Err(ParamError::NonFinite { name, value });
            }
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(ParamError::NonPositiveKappa(self.kappa));
        }
        for (name, value) in [
            ("j", self.j),
            ("kappa_int_l", self.kappa_int_l),
            ("kappa_r", self.kappa_r),
            ("kappa_int_r", self.kappa_int_r),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(ParamError::NegativeRate { name, value });
            }
        }
        Ok(())
    }

    /// Total left-mode linewidth kappa + kappa_int_l.
    pub fn kappa_tot_l(&self) -> f64 {
        self.kappa + self.kappa_int_l
    }

    pub fn kappa_tot_r(&self) -> f64 {
        self.kappa_r + self.kappa_int_r
    }

    /// True when the port is the only decay channel.
    pub fn is_lossless(&self) -> bool {
        self.kappa_int_l == 0.0 && self.kappa_r == 0.0 && self.kappa_int_r == 0.0
    }

    /// Mean bare frequency; reference point for the signed drive detuning.
    pub fn omega_bar(&self) -> f64 {
        0.5 * (self.omega_l + self.omega_r)
    }

    /// delta_L = omega_l - omega_p.
    pub fn detuning_l(&self, omega_p: f64) -> f64 {
        self.omega_l - omega_p
    }

    pub fn detuning_r(&self, omega_p: f64) -> f64 {
        self.omega_r - omega_p
    }

    /// Signed drive detuning delta = omega_p - omega_bar used on phase
    /// diagrams (positive = pump above the mean bare frequency).
    pub fn drive_detuning(&self, omega_p: f64) -> f64 {
        omega_p - self.omega_bar()
    }

    /// Inverse of [`Self::drive_detuning`].
    pub fn omega_p_for_drive_detuning(&self, delta: f64) -> f64 {
        self.omega_bar() + delta
    }

    /// Bare hybridized frequencies (omega_bar +/- sqrt(J^2 + (split/2)^2)),
    /// the undriven normal modes when losses are neglected.
    pub fn hybridized_frequencies(&self) -> (f64, f64) {
        let half_split = 0.5 * (self.omega_r - self.omega_l);
        let s = (self.j * self.j + half_split * half_split).sqrt();
        (self.omega_bar() - s, self.omega_bar() + s)
    }
}

/// Coherent pump: frequency and incident amplitude (sqrt photon flux, with
/// phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub omega_p: f64,
    pub alpha_in: C64,
}

impl Drive {
    pub fn new(omega_p: f64, alpha_in: C64) -> Self {
        Self { omega_p, alpha_in }
    }

    /// Zero-phase drive with the given incident photon flux (photons/s).
    pub fn from_flux(omega_p: f64, flux: f64) -> Self {
        Self {
            omega_p,
            alpha_in: C64::new(flux.max(0.0).sqrt(), 0.0),
        }
    }

    pub fn from_power_dbm(omega_p: f64, power_dbm: f64) -> Self {
        Self::from_flux(omega_p, dbm_to_flux(power_dbm, omega_p))
    }

    /// Incident photon flux |alpha_in|^2 in photons/s.
    pub fn flux(&self) -> f64 {
        self.alpha_in.norm_sqr()
    }

    pub fn power_dbm(&self) -> f64 {
        flux_to_dbm(self.flux(), self.omega_p)
    }
}

/// Incident power in dBm to photon flux (photons/s) at carrier omega_p.
pub fn dbm_to_flux(power_dbm: f64, omega_p: f64) -> f64 {
    let watts = 10f64.powf((power_dbm - 30.0) / 10.0);
    watts / (HBAR * omega_p)
}

pub fn flux_to_dbm(flux: f64, omega_p: f64) -> f64 {
    10.0 * (flux * HBAR * omega_p).log10() + 30.0
}

/// Time derivatives (d alpha_L/dt, d alpha_R/dt) of the classical amplitudes
/// in the frame rotating at the pump:
///
///   daL/dt = -i(dL + U_L|aL|^2) aL - iJ aR - (kappa_tot_L/2) aL + sqrt(kappa) a_in
///   daR/dt = -i(dR + U_R|aR|^2) aR - iJ aL - (kappa_tot_R/2) aR
///
/// Steady states are the zeros of this field.
pub fn equations_of_motion(p: &DimerParams, drive: &Drive, al: C64, ar: C64) -> (C64, C64) {
    let i = C64::i();
    let dl = p.detuning_l(drive.omega_p);
    let dr = p.detuning_r(drive.omega_p);
    let fl = -i * (dl + p.u_l * al.norm_sqr()) * al - i * p.j * ar - 0.5 * p.kappa_tot_l() * al
        + p.kappa.sqrt() * drive.alpha_in;
    let fr = -i * (dr + p.u_r * ar.norm_sqr()) * ar - i * p.j * al - 0.5 * p.kappa_tot_r() * ar;
    (fl, fr)
}

/// Max norm of the two steady-state residuals at (al, ar).
pub fn residual(p: &DimerParams, drive: &Drive, al: C64, ar: C64) -> f64 {
    let (fl, fr) = equations_of_motion(p, drive, al, ar);
    fl.norm().max(fr.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_is_steady_without_drive() {
        let p = DimerParams::symmetric(TAU * 7.0e9, -TAU * 8.0e4, TAU * 0.25e9, TAU * 0.29e9);
        let d = Drive::from_flux(TAU * 7.1e9, 0.0);
        let (fl, fr) = equations_of_motion(&p, &d, c(0.0, 0.0), c(0.0, 0.0));
        assert_eq!(fl, c(0.0, 0.0));
        assert_eq!(fr, c(0.0, 0.0));
    }

    #[test]
    fn drive_term_enters_left_mode_only() {
        let p = DimerParams::symmetric(1.0, 0.0, 0.0, 4.0);
        let d = Drive::new(1.0, c(2.0, 0.0)); // on resonance, J = 0
        let (fl, fr) = equations_of_motion(&p, &d, c(0.0, 0.0), c(0.0, 0.0));
        assert_relative_eq!(fl.re, 4.0); // sqrt(kappa)*alpha_in = 2*2
        assert_relative_eq!(fl.im, 0.0);
        assert_eq!(fr, c(0.0, 0.0));
    }

    #[test]
    fn single_mode_linear_steady_state() {
        // J=0, U=0: alpha_L = sqrt(kappa) a_in / (i dL + kappa_tot/2).
        let p = DimerParams {
            omega_l: 10.0,
            omega_r: 0.0,
            u_l: 0.0,
            u_r: 0.0,
            j: 0.0,
            kappa: 3.0,
            kappa_int_l: 1.0,
            kappa_r: 1.0,
            kappa_int_r: 0.0,
        };
        let d = Drive::new(9.0, c(1.5, 0.5));
        let al = p.kappa.sqrt() * d.alpha_in / (C64::i() * p.detuning_l(d.omega_p) + 0.5 * p.kappa_tot_l());
        let (fl, fr) = equations_of_motion(&p, &d, al, c(0.0, 0.0));
        assert!(fl.norm() < 1e-12 * al.norm());
        assert!(fr.norm() < 1e-12);
    }

    // The coherent part of the flow must be the gradient flow of the real
    // classical energy
    //   E = dL|aL|^2 + dR|aR|^2 + U_L/2 |aL|^4 + U_R/2 |aR|^4
    //     + J(conj(aL) aR + conj(aR) aL) - 2 Im(a_in conj(aL)) sqrt(kappa),
    // i.e. d alpha/dt |_coh = -i dE/d conj(alpha). Checked by central
    // differences in the real coordinates.
    #[test]
    fn coherent_flow_matches_energy_gradient() {
        let p = DimerParams {
            omega_l: 1.3,
            omega_r: 0.7,
            u_l: -0.11,
            u_r: -0.23,
            j: 0.4,
            kappa: 0.9,
            kappa_int_l: 0.0,
            kappa_r: 0.0,
            kappa_int_r: 0.0,
        };
        let d = Drive::new(0.65, c(0.8, -0.3));
        let energy = |al: C64, ar: C64| -> f64 {
            let dl = p.detuning_l(d.omega_p);
            let dr = p.detuning_r(d.omega_p);
            dl * al.norm_sqr()
                + dr * ar.norm_sqr()
                + 0.5 * p.u_l * al.norm_sqr().powi(2)
                + 0.5 * p.u_r * ar.norm_sqr().powi(2)
                + p.j * 2.0 * (al.conj() * ar).re
                - 2.0 * p.kappa.sqrt() * (d.alpha_in * al.conj()).im
        };
        let al = c(0.37, -0.81);
        let ar = c(-0.55, 0.21);
        let h = 1e-6;
        // dE/d conj(aL) = (dE/dx + i dE/dy)/2 with aL = x + i y
        let dx = (energy(al + c(h, 0.0), ar) - energy(al - c(h, 0.0), ar)) / (2.0 * h);
        let dy = (energy(al + c(0.0, h), ar) - energy(al - c(0.0, h), ar)) / (2.0 * h);
        let grad_l = 0.5 * c(dx, dy);
        let dx = (energy(al, ar + c(h, 0.0)) - energy(al, ar - c(h, 0.0))) / (2.0 * h);
        let dy = (energy(al, ar + c(0.0, h)) - energy(al, ar - c(0.0, h))) / (2.0 * h);
        let grad_r = 0.5 * c(dx, dy);

        let (fl, fr) = equations_of_motion(&p, &d, al, ar);
        // the drive is part of the energy; only the damping is stripped
        let coh_l = fl + 0.5 * p.kappa_tot_l() * al;
        let coh_r = fr + 0.5 * p.kappa_tot_r() * ar;
        let expect_l = -C64::i() * grad_l;
        let expect_r = -C64::i() * grad_r;
        assert!((coh_l - expect_l).norm() < 1e-8, "{coh_l} vs {expect_l}");
        assert!((coh_r - expect_r).norm() < 1e-8, "{coh_r} vs {expect_r}");
    }

    #[test]
    fn dbm_anchor_near_two_thousand_photons_per_us() {
        // -110 dBm at 2pi*7.79 GHz is about 1.94e9 photons/s.
        let flux = dbm_to_flux(-110.0, TAU * 7.79e9);
        assert!((flux * 1e-6 - 2000.0).abs() / 2000.0 < 0.05, "flux/us = {}", flux * 1e-6);
        assert_relative_eq!(flux, 1.937e9, max_relative = 2e-3);
    }

    #[test]
    fn dbm_flux_round_trip() {
        let w = TAU * 7.0e9;
        for &dbm in &[-140.0, -110.0, -75.9, -60.0] {
            assert_relative_eq!(flux_to_dbm(dbm_to_flux(dbm, w), w), dbm, max_relative = 1e-12);
        }
        assert_eq!(dbm_to_flux(f64::NEG_INFINITY, w), 0.0);
    }

    #[test]
    fn validation_rejects_bad_rates() {
        let mut p = DimerParams::symmetric(1.0, -0.1, 0.2, 0.5);
        assert!(p.validate().is_ok());
        p.kappa = 0.0;
        assert!(matches!(p.validate(), Err(ParamError::NonPositiveKappa(_))));
        p.kappa = 0.5;
        p.kappa_int_r = -1.0;
        assert!(matches!(p.validate(), Err(ParamError::NegativeRate { .. })));
    }

    #[test]
    fn hybridized_frequencies_split_by_2j_when_degenerate() {
        let p = DimerParams::symmetric(TAU * 7.1e9, 0.0, TAU * 0.25e9, TAU * 0.29e9);
        let (lo, hi) = p.hybridized_frequencies();
        assert_relative_eq!(hi - lo, 2.0 * p.j, max_relative = 1e-12);
        assert_relative_eq!(0.5 * (hi + lo), p.omega_bar(), max_relative = 1e-12);
    }
}
