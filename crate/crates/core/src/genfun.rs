//! Probability generating functions of the subtracted thermal states, and a
//! reporter that checks them against truncated PMF series.
//!
//! The GF route and the PMF route are computed independently (closed form
//! versus term-by-term series), which makes their agreement a meaningful
//! consistency check rather than a tautology.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::photon_stats::{build_pmf, moments, Pmf, SubtractedThermalParams};
use crate::specfun::hyp2f1_terminating;

/// Generating function of a single thermal mode, E[z^n] = 1/(1 + mu0(1-z)).
pub fn gf_thermal(z: f64, mu0: f64) -> Result<f64> {
    if !z.is_finite() || !mu0.is_finite() || mu0 < 0.0 {
        return Err(Error::Domain(format!(
            "thermal GF needs finite z and nonnegative mu0, got z={z} mu0={mu0}"
        )));
    }
    let denom = 1.0 + mu0 * (1.0 - z);
    if denom <= 0.0 {
        return Err(Error::Domain(format!(
            "thermal GF pole crossed at z={z} for mu0={mu0}"
        )));
    }
    Ok(1.0 / denom)
}

/// Generating function of the observed subsystem after subtraction: the
/// thermal factor for the observed modes times a terminating hypergeometric
/// correction carrying the heralding.
pub fn gf_subtracted(z: f64, p: &SubtractedThermalParams) -> Result<f64> {
    let g = gf_thermal(z, p.mu0)?;
    let (m, big_m, k) = (p.observed, p.modes, p.subtracted);
    if m == big_m {
        // The correction factor collapses to g^k when every mode is observed.
        return Ok(g.powi((big_m + k) as i32));
    }
    let f = hyp2f1_terminating(k, m as f64, big_m as f64, 1.0 - g)?;
    Ok(g.powi(m as i32) * f)
}

/// First or second factorial moment from the closed forms; orders beyond
/// two are not defined here.
pub fn factorial_moment(order: u8, p: &SubtractedThermalParams) -> Result<f64> {
    let m = moments(p)?;
    match order {
        1 => Ok(m.mean),
        2 => Ok(m.second_factorial),
        _ => Err(Error::Domain(format!(
            "factorial moments are provided for orders 1 and 2, got {order}"
        ))),
    }
}

/// Outcome of comparing the PMF series against the closed-form GF.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub max_abs_deviation: f64,
    pub tol: f64,
    pub tail_bound: f64,
    /// Deviation stayed within `tol`.
    pub passed: bool,
    /// `tol` is finer than the truncation can certify, so a failure would
    /// not be evidence against the closed form.
    pub inconclusive: bool,
}

/// Evaluates `sum_n P(n) z^n` from a freshly built PMF and compares it with
/// [`gf_subtracted`] at each requested point. Points must lie in [-1, 1] so
/// the truncated tail bounds the series error.
pub fn gf_pmf_consistency(
    p: &SubtractedThermalParams,
    z_points: &[f64],
    tol: f64,
    tail_eps: f64,
) -> Result<ConsistencyReport> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if z_points.iter().any(|z| !z.is_finite() || z.abs() > 1.0) {
        return Err(Error::Domain("comparison points must lie in [-1, 1]".into()));
    }
    let pmf = build_pmf(p, tail_eps)?;
    let mut max_abs_deviation: f64 = 0.0;
    for &z in z_points {
        let series = pmf_series(&pmf, z);
        let closed = gf_subtracted(z, p)?;
        max_abs_deviation = max_abs_deviation.max((series - closed).abs());
    }
    Ok(ConsistencyReport {
        max_abs_deviation,
        tol,
        tail_bound: pmf.tail_bound(),
        passed: max_abs_deviation <= tol,
        inconclusive: tol < pmf.tail_bound(),
    })
}

/// Horner evaluation of the truncated series sum_n P(n) z^n.
fn pmf_series(pmf: &Pmf, z: f64) -> f64 {
    pmf.probabilities().iter().rev().fold(0.0, |acc, &p| acc * z + p)
}
