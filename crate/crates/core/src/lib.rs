//! Numerics for gradient blow-up in the insulated conductivity problem with
//! m-convex inclusions.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! * [`geometry`]: the angular weight `κ(ξ)`, the gap height `δ(x')`, the
//!   explicit constants `θ₁, θ₂, θ₃, c₀, c̄₀`, weighted norms and averages,
//!   curvilinear-cube profiles and the thin-gap change of variables.
//! * [`spectral`]: the weighted eigenproblem `−(κu')' = λκu` on the circle,
//!   Rayleigh quotients, reflection parity (property O) and the perturbation
//!   continuation experiment.
//! * [`exponents`]: closed-form exponents `α(λ)`, `α±`, `β(λ)` and rate
//!   predictions.
//! * [`radial`]: the Euler-type radial ODEs, RK4 cross-checks, variation of
//!   parameters and leading-coefficient fits.
//! * [`solver`]: a finite-volume solver for `div(δ∇v) = div F` on the unit
//!   disk with preconditioned CG, plus the decay, gradient-rate, lower-bound,
//!   Moser, Hardy and CKN measurements.
//! * [`regression`]: log-log rate fits.
//!
//! File formats, the CLI and multi-threaded sweeps live in the `gapgrad`
//! companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
pub mod exponents;
pub mod geometry;
pub mod linalg;
pub(crate) mod math;
pub mod quadrature;
pub mod radial;
pub mod regression;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
