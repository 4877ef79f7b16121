//! Driven-dissipative two-mode Kerr resonator ("Bose-Hubbard dimer") toolkit.
//!
//! Two Kerr nonlinear modes coupled by a linear hopping J; the left mode is
//! measured and driven through a single transmission-line port at rate kappa.
//! Everything internal is in angular frequency (rad/s); photon flux is
//! photons/s. The working frame rotates at the pump frequency omega_p.

pub mod circuit;
pub mod drift;
pub mod estimation;
pub mod fluctuations;
pub mod fock;
pub mod optimize;
pub mod params;
pub mod poly;
pub mod semiclassical;
pub mod units;

pub use params::{dbm_to_flux, flux_to_dbm, DimerParams, Drive};

/// Shorthand used throughout: double-precision complex.
pub type C64 = num_complex::Complex64;
