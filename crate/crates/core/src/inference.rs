//! Reconstruction of the per-mode mean photon number from homodyne samples,
//! with adequacy and closeness diagnostics.
//!
//! The model family has a single free parameter, so the fit is a bracketed
//! one-dimensional likelihood maximization; everything else (chi-square,
//! fidelity, KS) consumes the fitted or the true model symmetrically.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::homodyne::{quadrature_density, QuadratureGrid, QuadratureModel, DEFAULT_GRID_STEP};
use crate::photon_stats::{build_pmf, Pmf, SubtractedThermalParams, DEFAULT_TAIL_EPS};

/// Search interval for the mean photon number per mode.
pub const MU0_SEARCH: (f64, f64) = (1e-4, 50.0);
const FIT_REL_TOL: f64 = 1e-6;
const MAX_FIT_ITERS: usize = 200;
const MIN_FIT_SAMPLES: usize = 100;
const MIN_CHI2_SAMPLES: usize = 500;
const MAX_CHI2_BINS: usize = 50;

/// Outcome of the one-parameter likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub mu0_hat: f64,
    /// From the observed information at the optimum; positive whenever the
    /// fit converged.
    pub std_error: f64,
    pub log_likelihood: f64,
    pub n_samples: usize,
    /// False when the optimizer stalled, the optimum sits at the search
    /// boundary, or the curvature is not positive.
    pub converged: bool,
}

/// A phase-invariant state described entirely by its number-basis diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalState {
    pmf: Pmf,
}

impl DiagonalState {
    pub fn new(pmf: Pmf) -> Self {
        Self { pmf }
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }
}

/// Chi-square adequacy summary over equiprobable bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Chi2Report {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
    pub bins: usize,
}

/// One row of the mean-photon table: closed form next to the PMF route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanPhotonRow {
    pub modes: u64,
    pub subtracted: u64,
    pub mu0: f64,
    pub mean: f64,
    pub pmf_mean: f64,
}

/// Total log-likelihood of the samples under the given parameters.
pub fn log_likelihood(samples: &[f64], p: &SubtractedThermalParams) -> Result<f64> {
    let model = QuadratureModel::new(build_pmf(p, DEFAULT_TAIL_EPS)?);
    let mut acc = 0.0;
    for &x in samples {
        let d = quadrature_density(x, &model);
        if d.is_nan() || d <= 0.0 {
            return Err(Error::Data(format!(
                "sample {x} has no support under the model (density {d})"
            )));
        }
        acc += d.ln();
    }
    Ok(acc)
}

/// Maximum-likelihood estimate of the per-mode mean photon number with the
/// subtraction protocol (subtracted, observed, modes) known and fixed.
pub fn fit_mu0(
    samples: &[f64],
    subtracted: u64,
    observed: u64,
    modes: u64,
) -> Result<FitResult> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::Data(format!(
            "fit needs at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("samples must be finite".into()));
    }
    let mut nll = |mu0: f64| -> Result<f64> {
        let p = SubtractedThermalParams::new(modes, observed, subtracted, mu0)?;
        Ok(-log_likelihood(samples, &p)?)
    };
    let (lo, hi) = MU0_SEARCH;
    let (mu0_hat, min_nll, stopped) = brent_minimize(&mut nll, lo, hi, FIT_REL_TOL, MAX_FIT_ITERS)?;
    let at_boundary = mu0_hat <= lo * 1.05 || mu0_hat >= hi * 0.95;
    let h = (1e-3 * mu0_hat).max(1e-6);
    let info = (nll(mu0_hat + h)? - 2.0 * min_nll + nll(mu0_hat - h)?) / (h * h);
    let converged = stopped && !at_boundary && info > 0.0;
    Ok(FitResult {
        mu0_hat,
        std_error: if info > 0.0 { 1.0 / info.sqrt() } else { 0.0 },
        log_likelihood: -min_nll,
        n_samples: samples.len(),
        converged,
    })
}

/// Bracketed scalar minimization by golden-section steps with parabolic
/// acceleration. Returns (argmin, min, converged-within-budget).
fn brent_minimize(
    f: &mut impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(f64, f64, bool)> {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = rel_tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Ok((x, fx, true));
        }
        let mut take_golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                take_golden = false;
            }
        }
        if take_golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + if d >= 0.0 { tol1 } else { -tol1 }
        };
        let fu = f(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx, false))
}

/// Chi-square goodness of fit over bins that are equiprobable under the
/// model, so every bin expects `n/bins >= 10` counts. Set
/// `fitted_on_samples` when the model parameter was estimated from these
/// same samples; it costs one degree of freedom.
pub fn chi2_adequacy(
    samples: &[f64],
    model: &QuadratureModel,
    fitted_on_samples: bool,
) -> Result<Chi2Report> {
    let n = samples.len();
    if n < MIN_CHI2_SAMPLES {
        return Err(Error::Data(format!(
            "chi-square needs at least {MIN_CHI2_SAMPLES} samples, got {n}"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("samples must be finite".into()));
    }
    let bins = MAX_CHI2_BINS.min(n / 10);
    let grid = QuadratureGrid::build(model, DEFAULT_GRID_STEP)?;
    let edges: Vec<f64> = (1..bins).map(|i| grid.quantile(i as f64 / bins as f64)).collect();
    let mut observed = vec![0u64; bins];
    for &x in samples {
        observed[edges.partition_point(|&e| e < x)] += 1;
    }
    let expected = n as f64 / bins as f64;
    let statistic: f64 = observed
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let dof = (bins - 1 - usize::from(fitted_on_samples)) as f64;
    Ok(Chi2Report { statistic, dof, p_value: chi2_survival(statistic, dof), bins })
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_survival(statistic: f64, dof: f64) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(dof / 2.0, statistic / 2.0)
}

/// Fidelity between two diagonal states: the squared sum of sqrt(p q) over
/// the common (zero-extended) support. Symmetric, in [0, 1], and 1 exactly
/// when the diagonals agree.
pub fn fidelity_diagonal(p: &DiagonalState, q: &DiagonalState) -> f64 {
    let len = p.pmf.probabilities().len().max(q.pmf.probabilities().len());
    let mut root_sum = 0.0;
    for n in 0..len {
        root_sum += (p.pmf.prob(n) * q.pmf.prob(n)).sqrt();
    }
    (root_sum * root_sum).clamp(0.0, 1.0)
}

/// Mean photon number of the single observed mode for every (modes,
/// subtracted) pair, with the closed form cross-checked against the PMF.
pub fn mean_photon_report(
    modes_list: &[u64],
    subtracted_list: &[u64],
    mu0: f64,
) -> Result<Vec<MeanPhotonRow>> {
    let mut rows = Vec::with_capacity(modes_list.len() * subtracted_list.len());
    for &modes in modes_list {
        for &subtracted in subtracted_list {
            let p = SubtractedThermalParams::new(modes, 1, subtracted, mu0)?;
            let pmf = build_pmf(&p, 1e-12)?;
            rows.push(MeanPhotonRow {
                modes,
                subtracted,
                mu0,
                mean: mu0 * (1.0 + subtracted as f64 / modes as f64),
                pmf_mean: pmf.mean(),
            });
        }
    }
    Ok(rows)
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Data("KS needs at least one sample".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("samples must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Data("KS needs at least one sample on each side".into()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Data("samples must be finite".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("finite values compare"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("finite values compare"));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        if sa[i] <= sb[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok((d, kolmogorov_q(lambda)))
}

/// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_j (-1)^(j-1) exp(-2 j^2 lambda^2).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100u32 {
        let term = (-2.0 * (j as f64 * lambda) * (j as f64 * lambda)).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
