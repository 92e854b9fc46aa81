//! Photon statistics of multimode thermal light conditioned on photon subtraction.
//!
//! A source prepares `M` identical thermal modes with mean photon number `mu0`
//! per mode; a weak tap plus a photon counter heralds the subtraction of `k`
//! photons from the full state. This crate computes what an observer holding a
//! subsystem of `m <= M` of the modes then sees:
//!
//! * exact photon-number distributions and their factorial moments,
//! * the Polya (ball drawing with return and addition) law that governs how
//!   the `k` subtractions split across modes, together with its classical and
//!   fermionic siblings,
//! * generating functions tying all of the above together,
//! * homodyne quadrature densities of the conditioned single-mode state and a
//!   seeded sampler for them,
//! * a Monte Carlo model of the tap-and-count experiment itself, and
//! * maximum-likelihood reconstruction of `mu0` from quadrature samples with
//!   chi-squared adequacy and fidelity reporting.
//!
//! Everything downstream of a seed is deterministic: parallel simulation uses
//! per-worker ChaCha8 substreams, so results are reproducible for a fixed
//! `(seed, worker count)` pair.

pub mod error;
pub mod expsim;
pub mod genfun;
pub mod homodyne;
pub mod inference;
pub mod photon_stats;
pub mod specfun;
pub mod urn;

pub(crate) mod rng;

pub use error::{Error, Result};
