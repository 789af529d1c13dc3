//! Dynamics of two (or more) three-level atoms sharing a single cavity pump
//! photon and emitting one Stokes photon into a discretized continuum.
//!
//! The pump photon is converted into a Stokes photon by a two-photon
//! Raman-type process; once the Stokes photon is out, the atoms are left in a
//! long-lived maximally entangled state. This crate provides:
//!
//! - [`model`]: physical parameters, coupling profiles, and the uniform mode
//!   grid that discretizes the Stokes continuum;
//! - [`dynamics`]: the effective single-excitation Hamiltonian and two
//!   independent propagators (exact eigendecomposition and fixed-step RK4);
//! - [`analytic`]: the closed-form Wigner-Weisskopf solution (decay rate
//!   gamma, pole shift Delta, steady amplitudes) used as an oracle against
//!   the numerics;
//! - [`full`]: the un-eliminated three-level model used to validate the
//!   adiabatic removal of the intermediate atomic level;
//! - [`observables`]: populations, reduced atomic density matrix, Wootters
//!   concurrence, emitted-photon spectrum, and exponential/Lorentzian fits.
//!
//! All frequencies are angular and dimensionless (hbar = 1); presets carry a
//! conversion factor to physical rad/s.

pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod full;
pub mod model;
pub mod observables;

pub use error::{Error, Result};
