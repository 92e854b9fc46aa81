//! Numerically stable special functions used by every other module.
//!
//! * [`log_gamma`]: natural log of the gamma function on the positive axis.
//! * [`hyp2f1_terminating`]: the terminating Gauss series `F(-k, b; c; x)`,
//!   evaluated by the term-ratio recurrence so huge parameter ranges (the
//!   photon distributions push `c` to -10^4 and beyond) never pass through a
//!   prefactored gamma-ratio blowup. An exact-rational twin serves as oracle.
//! * [`oscillator_eigenfunction`]: normalized harmonic-oscillator
//!   eigenfunctions by upward recurrence (stable for this family).

mod gamma;
mod hyp;
mod oscillator;

pub use gamma::log_gamma;
pub use hyp::{hyp2f1_terminating, hyp2f1_terminating_exact};
pub use oscillator::{oscillator_eigenfunction, oscillator_values, DEFAULT_MAX_ORDER};
