//! Per-Fourier-mode simulator for the linearized 2D Navier-Stokes equations
//! around a shear equilibrium with vertically stratified viscosity.
//!
//! The equilibria satisfy the balance mu(y) * U'(y) = sigma (constant), so the
//! local shear is U' = sigma / mu and the local enhanced-dissipation rate is
//! (mu U'^2)^(1/3) = sigma^(2/3) * mu^(-1/3): decreasing the viscosity by a
//! factor of 1000 speeds the decay up by a factor of 10.
//!
//! After the shear-frame change of variables z = U(y),
//! W(t, x, z) = omega(t, x + t U(y), y), each horizontal mode k evolves under
//!
//!   dW/dt = U'' V2 + div_t(mu grad_t W) - div_t(mu' grad_t V1) - mu'' ik V2,
//!
//! where grad_t = (ik, U'(d/dz - ikt)) and (V1, V2) are the velocity
//! components recovered from the stream function. The crate provides:
//!
//! * [`profiles`]: viscosity profiles, equilibrium construction, admissibility
//!   validation and local rate maps;
//! * [`grid`]: the periodic z-grid with unitary DFT and spectral calculus;
//! * [`multiplier`]: the time-dependent Fourier multiplier that absorbs the
//!   resonance window around t = xi/k, with its frequency weights;
//! * [`partition`]: the interval decomposition of the vertical domain with
//!   smooth cutoffs and per-interval constant-shear extensions;
//! * [`dynamics`]: the stream solve and the IMEX time stepper;
//! * [`oracle`]: the closed-form constant-viscosity (Couette) solution;
//! * [`diagnostics`]: energies, dissipation functionals, decay-rate fits and
//!   the Lyapunov / localized-decay checks;
//! * [`config`] and [`run`]: file-driven runs, sweeps and reports used by the
//!   command-line front end.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod grid;
pub(crate) mod interp;
pub mod multiplier;
pub mod oracle;
pub mod partition;
pub mod profiles;
pub mod run;

pub use error::{Error, Result};
