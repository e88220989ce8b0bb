//! Semiclassical sine-Gordon fluxon condensates.
//!
//! The crate computes, for a pure-impulse initial profile `G(x)`:
//!
//! * the WKB scattering data (Bohr–Sommerfeld eigenvalues and the pole locus);
//! * exact condensates `u_N(x, t)` by solving the reflectionless
//!   Riemann–Hilbert problem with dense linear algebra;
//! * the elliptic-function small-time asymptotics, whose band endpoints are
//!   obtained by Newton continuation of the moment and integral conditions;
//! * Whitham-theory diagnostics (characteristic velocities, hyperbolicity,
//!   PDE residuals) for the computed modulation fields.
//!
//! Module overview:
//!
//! ```text
//! profiles    -> G(x), ||G||_1, x_crit, kink interval, phase continuation
//! spectra     -> E, D, Q, Psi, Abel inverse, eigenvalues, poles, Delta split
//! exact_ist   -> residue system, exact WaveSamples, grids, PDE residual
//! elliptic    -> K, E, sn/cn/dn, Riemann theta
//! modulation  -> M, I, H, continuation, near-origin chart, derived fields
//! asymptotics -> leading-order WaveSamples, theta cross-checks
//! whitham     -> J(E), characteristic velocities, residual audits
//! ```

// Range checks are written `!(lo < x && x < hi)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod elliptic;
pub mod error;
pub mod exact_ist;
pub mod modulation;
pub mod profiles;
pub mod quadrature;
pub mod roots;
pub mod spectra;
pub mod whitham;

pub use error::{FluxonError, Result};
