//! Photon-number statistics of multimode thermal light conditioned on
//! multiphoton subtraction.
//!
//! The central object is the distribution P(n) of photons found in an
//! `observed`-mode subsystem of a `modes`-mode thermal state from which
//! `subtracted` photons were removed by a conditional measurement. It is a
//! finite mixture of negative binomials whose weights follow a Polya urn
//! scheme, so the module also carries the three classical ball-sampling
//! distributions (with return, without return, return with addition) and
//! their generating functions.
//!
//! All truncated distributions carry a certified tail bound: the sum of the
//! stored probabilities plus the bound deviates from one by at most
//! [`NORMALIZATION_SLACK`].

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun::{hyp2f1_terminating, log_gamma};
use crate::urn::UrnScheme;

/// Default truncation budget for PMF construction.
pub const DEFAULT_TAIL_EPS: f64 = 1e-10;
/// Tolerance on `sum(probabilities) + tail_bound == 1`.
pub const NORMALIZATION_SLACK: f64 = 1e-9;
/// Largest tail budget accepted by the builders.
const MAX_TAIL_EPS: f64 = 1e-6;
/// Hard cap on stored support; reaching it is a resource error, not a panic.
const MAX_SUPPORT: usize = 100_000;

/// Log-gamma restricted to the strictly positive arguments used here.
fn lg(x: f64) -> f64 {
    log_gamma(x).expect("argument is structurally positive")
}

/// Parameters of the conditionally prepared state.
///
/// `modes` is the number of populated thermal modes, `observed` the number
/// of modes reaching the measured subsystem, `subtracted` the number of
/// photons removed by the heralding detector, and `mu0` the mean photon
/// number per mode before subtraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubtractedThermalParams {
    pub modes: u64,
    pub observed: u64,
    pub subtracted: u64,
    pub mu0: f64,
}

impl SubtractedThermalParams {
    pub fn new(modes: u64, observed: u64, subtracted: u64, mu0: f64) -> Result<Self> {
        if observed == 0 || observed > modes {
            return Err(Error::Domain(format!(
                "observed modes must satisfy 1 <= observed <= modes, got {observed} of {modes}"
            )));
        }
        if !mu0.is_finite() || mu0 < 0.0 {
            return Err(Error::Domain(format!(
                "mean photon number per mode must be finite and nonnegative, got {mu0}"
            )));
        }
        Ok(Self { modes, observed, subtracted, mu0 })
    }
}

/// Parameters of the ball-sampling schemes: `draws` balls taken from an urn
/// holding `red` red balls among `total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PolyaParams {
    pub draws: u64,
    pub red: u64,
    pub total: u64,
}

impl PolyaParams {
    pub fn new(draws: u64, red: u64, total: u64) -> Result<Self> {
        if red == 0 || red > total {
            return Err(Error::Domain(format!(
                "red balls must satisfy 1 <= red <= total, got {red} of {total}"
            )));
        }
        Ok(Self { draws, red, total })
    }
}

/// First and second moments of a photon-number distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    /// Second factorial moment, E[n(n-1)].
    pub second_factorial: f64,
    /// Normalized second-order correlation, E[n(n-1)] / E[n]^2.
    pub g2: f64,
    pub variance: f64,
}

/// Provenance of a truncated PMF, carried for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PmfSource {
    SubtractedThermal(SubtractedThermalParams),
    Polya(PolyaParams),
    NegativeBinomial { shape: f64, mu0: f64 },
    PointMass { at: usize },
    Custom(String),
}

impl PmfSource {
    pub fn label(&self) -> String {
        match self {
            PmfSource::SubtractedThermal(p) => format!(
                "subtracted-thermal(modes={}, observed={}, subtracted={}, mu0={})",
                p.modes, p.observed, p.subtracted, p.mu0
            ),
            PmfSource::Polya(p) => {
                format!("polya(draws={}, red={}, total={})", p.draws, p.red, p.total)
            }
            PmfSource::NegativeBinomial { shape, mu0 } => {
                format!("negative-binomial(shape={shape}, mu0={mu0})")
            }
            PmfSource::PointMass { at } => format!("point-mass(at={at})"),
            PmfSource::Custom(s) => s.clone(),
        }
    }
}

/// A photon-number PMF truncated to `0..=n_max`, with a certified bound on
/// the discarded mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pmf {
    probabilities: Vec<f64>,
    tail_bound: f64,
    source: PmfSource,
}

impl Pmf {
    /// Wraps raw probabilities, enforcing nonnegativity and normalization.
    pub fn new(probabilities: Vec<f64>, tail_bound: f64, source: PmfSource) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::Domain("a PMF needs at least one entry".into()));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain("PMF entries must be finite and nonnegative".into()));
        }
        if !tail_bound.is_finite() || tail_bound < 0.0 {
            return Err(Error::Domain(format!("tail bound must be nonnegative, got {tail_bound}")));
        }
        let sum: f64 = neumaier_sum(&probabilities);
        if (sum + tail_bound - 1.0).abs() > NORMALIZATION_SLACK {
            return Err(Error::Domain(format!(
                "PMF mass {sum} plus tail bound {tail_bound} is not 1 within {NORMALIZATION_SLACK}"
            )));
        }
        Ok(Self { probabilities, tail_bound, source })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Probability of `n`; zero beyond the stored support.
    pub fn prob(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    /// Largest photon number carried by the truncation.
    pub fn n_max(&self) -> usize {
        self.probabilities.len() - 1
    }

    /// Upper bound on the probability mass beyond `n_max`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn source(&self) -> &PmfSource {
        &self.source
    }

    pub fn mean(&self) -> f64 {
        self.probabilities.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// E[n(n-1)] over the stored support.
    pub fn second_factorial_moment(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.second_factorial_moment() + mean - mean * mean
    }
}

fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

fn check_tail_eps(tail_eps: f64) -> Result<()> {
    if !(tail_eps > 0.0 && tail_eps <= MAX_TAIL_EPS) {
        return Err(Error::Domain(format!(
            "tail budget must lie in (0, {MAX_TAIL_EPS}], got {tail_eps}"
        )));
    }
    Ok(())
}

/// Negative binomial with `shape` failures-parameter and mean `shape * mu0`,
/// the photon-number law of `shape` equally populated thermal modes.
pub fn negative_binomial_pmf(n: u64, shape: f64, mu0: f64) -> Result<f64> {
    if !shape.is_finite() || shape <= 0.0 {
        return Err(Error::Domain(format!("shape must be positive, got {shape}")));
    }
    if !mu0.is_finite() || mu0 < 0.0 {
        return Err(Error::Domain(format!("mu0 must be finite and nonnegative, got {mu0}")));
    }
    if mu0 == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    Ok(nb_log(n, shape, mu0).exp())
}

/// ln P(n) for the negative binomial; callers guarantee shape > 0, mu0 > 0.
fn nb_log(n: u64, shape: f64, mu0: f64) -> f64 {
    let nf = n as f64;
    lg(nf + shape) - lg(shape) - lg(nf + 1.0) + nf * mu0.ln()
        - (nf + shape) * (1.0 + mu0).ln()
}

/// P(n): probability of finding `n` photons in the observed subsystem.
///
/// Closed form: a gamma-function prefactor times a terminating
/// hypergeometric factor whose terms are all positive, so the evaluation is
/// cancellation-free for every valid parameter set.
pub fn subtracted_thermal_pmf(n: u64, p: &SubtractedThermalParams) -> f64 {
    let (m, big_m, k, mu0) = (p.observed, p.modes, p.subtracted, p.mu0);
    if mu0 == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if m == big_m || k == 0 {
        // All modes observed: the heralded photons pile back onto the
        // observed subsystem and the law is plain thermal with a larger
        // shape. No subtraction: thermal with the bare shape.
        let shape = if m == big_m { (big_m + k) as f64 } else { m as f64 };
        return nb_log(n, shape, mu0).exp();
    }
    let (nf, mf, big_mf, kf) = (n as f64, m as f64, big_m as f64, k as f64);
    let ln_pref = lg(nf + mf) - lg(mf) - lg(nf + 1.0) + lg(big_mf) - lg(big_mf - mf)
        + lg(big_mf + kf - mf)
        - lg(big_mf + kf)
        + nf * mu0.ln()
        - (nf + mf) * (1.0 + mu0).ln();
    let f = hyp2f1_terminating(k, nf + mf, mf + 1.0 - kf - big_mf, 1.0 / (1.0 + mu0))
        .expect("lower parameter is a negative integer below -draws, never singular");
    ln_pref.exp() * f
}

/// Builds the truncated PMF of the subtracted state.
///
/// Truncation stops once a geometric majorant certifies that the remaining
/// mass is below half of `tail_eps`; the recorded `tail_bound` is the
/// measured residual `1 - sum`, which the certificate keeps within budget.
pub fn build_pmf(p: &SubtractedThermalParams, tail_eps: f64) -> Result<Pmf> {
    check_tail_eps(tail_eps)?;
    let source = PmfSource::SubtractedThermal(*p);
    if p.mu0 == 0.0 {
        return Pmf::new(vec![1.0], 0.0, source);
    }
    // Largest negative-binomial shape appearing in the mixture.
    let shape_cap = (p.observed + p.subtracted) as f64;
    accumulate(|n| subtracted_thermal_pmf(n, p), p.mu0, shape_cap, tail_eps, source)
}

/// Builds a truncated negative binomial with the same tail contract as
/// [`build_pmf`].
pub fn build_negative_binomial_pmf(shape: f64, mu0: f64, tail_eps: f64) -> Result<Pmf> {
    check_tail_eps(tail_eps)?;
    negative_binomial_pmf(0, shape, mu0)?;
    let source = PmfSource::NegativeBinomial { shape, mu0 };
    if mu0 == 0.0 {
        return Pmf::new(vec![1.0], 0.0, source);
    }
    accumulate(|n| nb_log(n, shape, mu0).exp(), mu0, shape, tail_eps, source)
}

/// Reference law for the many-mode limit: an `observed`-mode thermal state
/// with mean `observed * mu0`, which the sampling weights approach when the
/// pool of modes grows at fixed subtraction fraction.
pub fn thermo_limit_reference(observed: u64, mu0: f64, tail_eps: f64) -> Result<Pmf> {
    if observed == 0 {
        return Err(Error::Domain("observed modes must be at least 1".into()));
    }
    build_negative_binomial_pmf(observed as f64, mu0, tail_eps)
}

fn accumulate(
    pmf: impl Fn(u64) -> f64,
    mu0: f64,
    shape_cap: f64,
    tail_eps: f64,
    source: PmfSource,
) -> Result<Pmf> {
    let q = mu0 / (1.0 + mu0);
    let mut probs: Vec<f64> = Vec::new();
    let mut sum = 0.0;
    let mut comp = 0.0;
    for n in 0..MAX_SUPPORT as u64 {
        let pn = pmf(n);
        probs.push(pn);
        let t = sum + pn;
        comp += if sum.abs() >= pn.abs() { (sum - t) + pn } else { (pn - t) + sum };
        sum = t;
        // Successive-ratio majorant: p(i+1)/p(i) <= q*(i+shape_cap)/(i+1)
        // for every i >= n, and the factor is monotone from i = n on.
        let nf = n as f64;
        let rho = q * ((nf + shape_cap) / (nf + 1.0)).max(1.0);
        if rho < 1.0 && pn * rho / (1.0 - rho) <= 0.5 * tail_eps {
            let residual = (1.0 - (sum + comp)).max(0.0);
            return Pmf::new(probs, residual, source);
        }
    }
    Err(Error::Resource(format!(
        "PMF support exceeded {MAX_SUPPORT} entries before meeting tail budget {tail_eps}"
    )))
}

/// Probability of drawing exactly `j` red balls in the return-with-addition
/// scheme. Zero outside `0..=draws`; a point mass at `draws` when every
/// ball is red.
pub fn polya_pmf(j: u64, p: &PolyaParams) -> f64 {
    let (k, m, big_m) = (p.draws, p.red, p.total);
    if j > k {
        return 0.0;
    }
    if k == 0 || m == big_m {
        return if j == k { 1.0 } else { 0.0 };
    }
    let (jf, kf, mf, big_mf) = (j as f64, k as f64, m as f64, big_m as f64);
    let ln_p = lg(kf + 1.0) + lg(big_mf) + lg(mf + jf) + lg(big_mf - mf + kf - jf)
        - lg(jf + 1.0)
        - lg(kf - jf + 1.0)
        - lg(mf)
        - lg(big_mf - mf)
        - lg(big_mf + kf);
    ln_p.exp()
}

/// Finite-support PMF over `0..=draws` for the return-with-addition scheme.
pub fn build_polya_pmf(p: &PolyaParams) -> Result<Pmf> {
    let probs: Vec<f64> = (0..=p.draws).map(|j| polya_pmf(j, p)).collect();
    Pmf::new(probs, 0.0, PmfSource::Polya(*p))
}

/// `C(n, r)` in exact integer arithmetic; zero when `r > n`.
pub(crate) fn big_binomial(n: u64, r: u64) -> BigInt {
    if r > n {
        return BigInt::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigInt::one();
    for i in 1..=r {
        acc = acc * BigInt::from(n - r + i) / BigInt::from(i);
    }
    acc
}

/// Exact rational form of [`polya_pmf`] built from the counting argument:
/// ways of seating `j` bosons on `red` levels times ways of seating the
/// remaining `draws - j` on the other levels, over the total statistical
/// weight. Requires `red < total`.
pub fn polya_pmf_integer(j: u64, p: &PolyaParams) -> Result<BigRational> {
    if p.red == p.total {
        return Err(Error::Domain(
            "the counting form needs at least one non-red ball; use polya_pmf".into(),
        ));
    }
    let k = p.draws;
    if j > k {
        return Ok(BigRational::zero());
    }
    let num = big_binomial(p.red + j - 1, j) * big_binomial(p.total - p.red + k - j - 1, k - j);
    Ok(BigRational::new(num, big_binomial(p.total + k - 1, k)))
}

/// PMF of any of the three sampling schemes at outcome `j`.
pub fn sibling_pmf(scheme: UrnScheme, j: u64, p: &PolyaParams) -> Result<f64> {
    let (k, m, big_m) = (p.draws, p.red, p.total);
    match scheme {
        UrnScheme::WithReturn => {
            if j > k {
                return Ok(0.0);
            }
            if m == big_m {
                return Ok(if j == k { 1.0 } else { 0.0 });
            }
            let prob = m as f64 / big_m as f64;
            let (jf, kf) = (j as f64, k as f64);
            let ln_choose = lg(kf + 1.0) - lg(jf + 1.0) - lg(kf - jf + 1.0);
            Ok((ln_choose + jf * prob.ln() + (kf - jf) * (1.0 - prob).ln()).exp())
        }
        UrnScheme::WithoutReturn => {
            if k > big_m {
                return Err(Error::Domain(format!(
                    "cannot draw {k} balls from {big_m} without return"
                )));
            }
            if j > k || j > m || k - j > big_m - m {
                return Ok(0.0);
            }
            let (jf, kf, mf, big_mf) = (j as f64, k as f64, m as f64, big_m as f64);
            let ln_p = lg(mf + 1.0) - lg(jf + 1.0) - lg(mf - jf + 1.0)
                + lg(big_mf - mf + 1.0)
                - lg(kf - jf + 1.0)
                - lg(big_mf - mf - (kf - jf) + 1.0)
                - (lg(big_mf + 1.0) - lg(kf + 1.0) - lg(big_mf - kf + 1.0));
            Ok(ln_p.exp())
        }
        UrnScheme::ReturnWithAddition => Ok(polya_pmf(j, p)),
    }
}

/// Exact rational counterpart of [`sibling_pmf`].
pub fn sibling_pmf_integer(scheme: UrnScheme, j: u64, p: &PolyaParams) -> Result<BigRational> {
    let (k, m, big_m) = (p.draws, p.red, p.total);
    match scheme {
        UrnScheme::WithReturn => {
            if j > k {
                return Ok(BigRational::zero());
            }
            let num = big_binomial(k, j)
                * BigInt::from(m).pow(j as u32)
                * BigInt::from(big_m - m).pow((k - j) as u32);
            Ok(BigRational::new(num, BigInt::from(big_m).pow(k as u32)))
        }
        UrnScheme::WithoutReturn => {
            if k > big_m {
                return Err(Error::Domain(format!(
                    "cannot draw {k} balls from {big_m} without return"
                )));
            }
            if j > k {
                return Ok(BigRational::zero());
            }
            let num = big_binomial(m, j) * big_binomial(big_m - m, k - j);
            Ok(BigRational::new(num, big_binomial(big_m, k)))
        }
        UrnScheme::ReturnWithAddition => polya_pmf_integer(j, p),
    }
}

/// Closed-form moments of the subtracted state. The correlation g2 needs a
/// nonzero mean, so a dark input is rejected.
pub fn moments(p: &SubtractedThermalParams) -> Result<Moments> {
    let (m, big_m, k, mu0) = (p.observed as f64, p.modes as f64, p.subtracted as f64, p.mu0);
    let mean = m * mu0 * (1.0 + k / big_m);
    let second_factorial = mu0
        * mu0
        * (m * (m + 1.0)
            + 2.0 * k * m * m / big_m
            + 2.0 * k * m / big_m
            + k * (k - 1.0) * m * (m + 1.0) / (big_m * (big_m + 1.0)));
    if mean == 0.0 {
        return Err(Error::UndefinedMoment("g2 is undefined at zero mean".into()));
    }
    Ok(Moments {
        mean,
        second_factorial,
        g2: second_factorial / (mean * mean),
        variance: second_factorial + mean - mean * mean,
    })
}

/// Closed-form moments of the return-with-addition scheme. With no draws
/// every moment ratio degenerates, so `draws == 0` is rejected.
pub fn polya_moments(p: &PolyaParams) -> Result<Moments> {
    let (k, m, big_m) = (p.draws as f64, p.red as f64, p.total as f64);
    if p.draws == 0 {
        return Err(Error::UndefinedMoment("g2 is undefined without draws".into()));
    }
    let mean = k * m / big_m;
    let second_factorial = k * (k - 1.0) * m * (m + 1.0) / (big_m * (big_m + 1.0));
    let g2 = (big_m / (big_m + 1.0)) * ((m + 1.0) / m) * ((k - 1.0) / k);
    let variance = k * m * (big_m - m) * (big_m + k) / (big_m * big_m * (big_m + 1.0));
    Ok(Moments { mean, second_factorial, g2, variance })
}

/// Probability generating function of a sampling scheme, taken on raw real
/// parameters so the sign-flip correspondence between the with-addition and
/// without-return schemes can be evaluated directly.
pub fn scheme_gf(scheme: UrnScheme, z: f64, draws: u64, red: f64, total: f64) -> Result<f64> {
    if !z.is_finite() || !red.is_finite() || !total.is_finite() || total == 0.0 {
        return Err(Error::Domain(format!(
            "generating function needs finite arguments and nonzero total, got z={z} red={red} total={total}"
        )));
    }
    match scheme {
        UrnScheme::WithReturn => {
            let exponent = i32::try_from(draws)
                .map_err(|_| Error::Domain(format!("draw count {draws} is out of range")))?;
            Ok((1.0 - red / total * (1.0 - z)).powi(exponent))
        }
        UrnScheme::WithoutReturn => hyp2f1_terminating(draws, -red, -total, 1.0 - z),
        UrnScheme::ReturnWithAddition => hyp2f1_terminating(draws, red, total, 1.0 - z),
    }
}

/// Return-with-addition generating function rearranged as a polynomial in z
/// itself rather than in 1 - z. Requires `red < total`.
pub fn polya_gf_z_form(z: f64, p: &PolyaParams) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("z must be finite, got {z}")));
    }
    if p.red == p.total {
        return Err(Error::Domain("the z-form needs red < total".into()));
    }
    let (k, m, big_m) = (p.draws, p.red as f64, p.total as f64);
    let kf = k as f64;
    let ln_pref = lg(big_m) + lg(kf + big_m - m) - lg(kf + big_m) - lg(big_m - m);
    let f = hyp2f1_terminating(k, m, m + 1.0 - kf - big_m, z)?;
    Ok(ln_pref.exp() * f)
}

/// Total variation distance between two truncated PMFs, extended by zero
/// beyond each support. The truncated tails enter as an upper bound.
pub fn total_variation(a: &Pmf, b: &Pmf) -> f64 {
    let len = a.probabilities.len().max(b.probabilities.len());
    let mut acc = 0.0;
    for n in 0..len {
        acc += (a.prob(n) - b.prob(n)).abs();
    }
    0.5 * (acc + a.tail_bound + b.tail_bound)
}
