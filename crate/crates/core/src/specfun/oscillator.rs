//! Normalized harmonic-oscillator eigenfunctions.
//!
//! Convention: vacuum quadrature variance 1/2, i.e.
//! `phi_0(x) = pi^{-1/4} exp(-x^2/2)` and
//! `phi_n(x) = sqrt(2/n) x phi_{n-1}(x) - sqrt((n-1)/n) phi_{n-2}(x)`.
//!
//! The upward recurrence is stable here: the wanted solution grows from the
//! Gaussian seed toward its classical turning point, so rounding noise decays
//! relative to it. Magnitudes below 1e-300 are flushed to zero; the Gaussian
//! seed underflows only for |x| > ~37.6 where every density in scope is
//! negligible anyway.

use crate::error::{Error, Result};

/// Cap for the single-point accessor; batch evaluation via
/// [`oscillator_values`] sets its own explicit order.
pub const DEFAULT_MAX_ORDER: usize = 512;

const FLUSH: f64 = 1e-300;
#[allow(clippy::excessive_precision)]
const PI_POW_NEG_QUARTER: f64 = 0.751_125_544_464_942_48;

/// phi_n(x) for a single order, guarded by [`DEFAULT_MAX_ORDER`].
pub fn oscillator_eigenfunction(n: usize, x: f64) -> Result<f64> {
    if n > DEFAULT_MAX_ORDER {
        return Err(Error::Truncation {
            n,
            cap: DEFAULT_MAX_ORDER,
        });
    }
    let (mut prev, mut cur) = (0.0_f64, flush(PI_POW_NEG_QUARTER * (-0.5 * x * x).exp()));
    if n == 0 {
        return Ok(cur);
    }
    for order in 1..=n {
        let next = flush((2.0 / order as f64).sqrt() * x * cur
            - ((order as f64 - 1.0) / order as f64).sqrt() * prev);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// All of phi_0(x) ..= phi_{max_order}(x) in one upward pass.
pub fn oscillator_values(x: f64, max_order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_order + 1);
    let phi0 = flush(PI_POW_NEG_QUARTER * (-0.5 * x * x).exp());
    out.push(phi0);
    if max_order == 0 {
        return out;
    }
    out.push(flush(2.0_f64.sqrt() * x * phi0));
    for n in 2..=max_order {
        let fn_ = n as f64;
        let next = flush((2.0 / fn_).sqrt() * x * out[n - 1] - ((fn_ - 1.0) / fn_).sqrt() * out[n - 2]);
        out.push(next);
    }
    out
}

#[inline]
fn flush(v: f64) -> f64 {
    if v.abs() < FLUSH {
        0.0
    } else {
        v
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // reference values are frozen at full printed precision
mod tests {
    use super::*;

    #[test]
    fn vacuum_at_origin() {
        // pi^{-1/4}
        let got = oscillator_eigenfunction(0, 0.0).unwrap();
        assert!((got - 0.75112554446494248286).abs() < 1e-15);
    }

    #[test]
    fn odd_orders_vanish_at_origin() {
        assert_eq!(oscillator_eigenfunction(1, 0.0).unwrap(), 0.0);
        assert_eq!(oscillator_eigenfunction(7, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn explicit_low_orders() {
        // phi_2 = (2x^2 - 1)/sqrt(2) * phi_0, phi_3 = (2x^3 - 3x)/sqrt(3) * phi_0
        for &x in &[-2.3f64, -0.4, 0.0, 0.9, 3.7] {
            let phi0 = PI_POW_NEG_QUARTER * (-0.5 * x * x).exp();
            let want2 = (2.0 * x * x - 1.0) / 2.0_f64.sqrt() * phi0;
            let want3 = (2.0 * x * x * x - 3.0 * x) / 3.0_f64.sqrt() * phi0;
            assert!((oscillator_eigenfunction(2, x).unwrap() - want2).abs() < 1e-14);
            assert!((oscillator_eigenfunction(3, x).unwrap() - want3).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_norm_order_three() {
        // trapezoid on [-20, 20]; the integrand is dead far before the edges
        let h = 1e-3;
        let steps = (40.0 / h) as usize;
        let mut acc = 0.0;
        for i in 0..=steps {
            let x = -20.0 + i as f64 * h;
            let v = oscillator_eigenfunction(3, x).unwrap();
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            acc += w * v * v;
        }
        assert!((acc * h - 1.0).abs() < 1e-10);
    }

    #[test]
    fn batch_matches_single() {
        let vals = oscillator_values(1.37, 60);
        assert_eq!(vals.len(), 61);
        for (n, &v) in vals.iter().enumerate() {
            assert_eq!(v, oscillator_eigenfunction(n, 1.37).unwrap(), "n = {n}");
        }
    }

    #[test]
    fn order_above_cap_is_reported() {
        let err = oscillator_eigenfunction(DEFAULT_MAX_ORDER + 1, 0.5).unwrap_err();
        assert!(matches!(
            err,
            crate::Error::Truncation { n: 513, cap: 512 }
        ));
    }

    #[test]
    fn far_tail_flushes_to_zero() {
        // Gaussian seed underflows past |x| ~ 37.6
        assert_eq!(oscillator_eigenfunction(0, 40.0).unwrap(), 0.0);
        assert!(oscillator_eigenfunction(0, 35.0).unwrap() > 0.0);
    }

    #[test]
    fn orthogonality_dense_grid() {
        let h = 1e-3;
        let steps = (40.0 / h) as usize;
        let pairs = [(0usize, 2usize), (1, 5), (10, 11), (20, 50)];
        let mut accs = [0.0_f64; 4];
        for i in 0..=steps {
            let x = -20.0 + i as f64 * h;
            let vals = oscillator_values(x, 50);
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            for (j, &(a, b)) in pairs.iter().enumerate() {
                accs[j] += w * vals[a] * vals[b];
            }
        }
        for (j, &(a, b)) in pairs.iter().enumerate() {
            assert!(
                (accs[j] * h).abs() < 1e-8,
                "<phi_{a}, phi_{b}> = {}",
                accs[j] * h
            );
        }
    }
}
