//! Terminating Gauss hypergeometric series F(-k, b; c; x).
//!
//! With a negative integer first parameter the series is the finite sum
//!
//! ```text
//! F(-k, b; c; x) = sum_{i=0}^{k} (-k)_i (b)_i / ((c)_i i!) x^i
//! ```
//!
//! Each term is produced from its predecessor by the ratio
//! `(i - k)(b + i) / ((c + i)(i + 1)) * x`, so nothing ever passes through a
//! ratio of huge gamma values; `c` may be a large negative non-integer (the
//! photon-number distributions use `c` near -(k + M)). The series is singular
//! exactly when `c + i = 0` for some integer `0 <= i <= k-1`.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// F(-k, b; c; x) in double precision with compensated summation.
pub fn hyp2f1_terminating(k: u64, b: f64, c: f64, x: f64) -> Result<f64> {
    if !(b.is_finite() && c.is_finite() && x.is_finite()) {
        return Err(Error::Domain(format!(
            "hypergeometric arguments must be finite, got b={b}, c={c}, x={x}"
        )));
    }
    if k > 0 && c <= 0.0 && c == c.trunc() && -c < k as f64 {
        return Err(Error::SingularParameter { index: (-c) as u64 });
    }

    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut comp = 0.0_f64; // Neumaier compensation
    for i in 0..k {
        let fi = i as f64;
        term *= (fi - k as f64) * (b + fi) / ((c + fi) * (fi + 1.0)) * x;
        let t = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
    }
    Ok(sum + comp)
}

/// Exact-rational twin of [`hyp2f1_terminating`], the oracle for the float
/// path. Intended for moderate `k` (the cross-checks use k <= 30); cost grows
/// with the digit counts of the running term.
pub fn hyp2f1_terminating_exact(
    k: u64,
    b: &BigRational,
    c: &BigRational,
    x: &BigRational,
) -> Result<BigRational> {
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    for i in 0..k {
        let fi = BigRational::from_integer(BigInt::from(i));
        let c_shift = c + &fi;
        if c_shift.is_zero() {
            return Err(Error::SingularParameter { index: i });
        }
        let numer = (&fi - BigRational::from_integer(BigInt::from(k))) * (b + &fi);
        let denom = c_shift * (&fi + BigRational::one());
        term = term * numer / denom * x;
        sum += &term;
    }
    Ok(sum)
}
