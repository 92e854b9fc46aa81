//! Log-gamma via the Lanczos approximation (g = 7, 9 coefficients).

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
// published coefficients kept at full precision even where f64 rounds them
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// ln Gamma(x) for x > 0.
///
/// Relative accuracy is ~1e-14 across [0.1, 1e6] (checked against 30-digit
/// references in the tests), comfortably inside the 1e-13 budget the photon
/// distributions rely on.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!(
            "log_gamma requires x > 0, got {x}"
        )));
    }
    if x == 1.0 || x == 2.0 {
        return Ok(0.0);
    }
    if x < 0.5 {
        // reflection: ln Gamma(x) = ln(pi / sin(pi x)) - ln Gamma(1 - x)
        let reflected = lanczos_ln_gamma(1.0 - x);
        return Ok((std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - reflected);
    }
    Ok(lanczos_ln_gamma(x))
}

fn lanczos_ln_gamma(x: f64) -> f64 {
    let z = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let base = z + LANCZOS_G + 0.5;
    HALF_LN_TWO_PI + (z + 0.5) * base.ln() - base + sum.ln()
}
