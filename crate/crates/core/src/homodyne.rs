//! Quadrature statistics of phase-invariant states: densities, grid CDFs,
//! inverse-CDF sampling, and shape diagnostics.
//!
//! Convention: the vacuum quadrature variance is 1/2, so a number state n
//! contributes variance n + 1/2.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::specfun::oscillator_values;

/// Grid pitch used by the sampler.
pub const DEFAULT_GRID_STEP: f64 = 0.01;
const MAX_GRID_STEP: f64 = 0.5;

/// A phase-invariant quadrature model: a photon-number PMF observed through
/// oscillator eigenfunctions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureModel {
    pmf: crate::photon_stats::Pmf,
}

impl QuadratureModel {
    pub fn new(pmf: crate::photon_stats::Pmf) -> Self {
        Self { pmf }
    }

    pub fn pmf(&self) -> &crate::photon_stats::Pmf {
        &self.pmf
    }

    pub fn n_max(&self) -> usize {
        self.pmf.n_max()
    }

    /// Edge of the numerically relevant support: the classical turning
    /// point of the highest retained number state plus a wide margin.
    pub fn x_max(&self) -> f64 {
        (2.0 * self.n_max() as f64).sqrt() + 6.0
    }

    pub fn convention(&self) -> &'static str {
        "vacuum-variance-1/2"
    }

    /// E[x^2], summed in the number basis: sum_n P(n) (n + 1/2).
    pub fn second_moment(&self) -> f64 {
        self.pmf
            .probabilities()
            .iter()
            .enumerate()
            .map(|(n, p)| p * (n as f64 + 0.5))
            .sum()
    }

    /// Excess kurtosis of the quadrature, from the number-basis identities
    /// E[x^2|n] = n + 1/2 and E[x^4|n] = (3/4)(2n^2 + 2n + 1).
    pub fn excess_kurtosis(&self) -> f64 {
        let (mut m2, mut m4) = (0.0, 0.0);
        for (n, p) in self.pmf.probabilities().iter().enumerate() {
            let nf = n as f64;
            m2 += p * (nf + 0.5);
            m4 += p * 0.75 * (2.0 * nf * nf + 2.0 * nf + 1.0);
        }
        m4 / (m2 * m2) - 3.0
    }
}

/// Probability density of the quadrature at `x`.
pub fn quadrature_density(x: f64, model: &QuadratureModel) -> f64 {
    let phis = oscillator_values(x, model.n_max());
    model
        .pmf
        .probabilities()
        .iter()
        .zip(&phis)
        .map(|(p, phi)| p * phi * phi)
        .sum()
}

/// Tabulated density and cumulative distribution on a symmetric uniform
/// grid, the workhorse for sampling, quantiles, and binning.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureGrid {
    xs: Vec<f64>,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
    step: f64,
    mass: f64,
}

impl QuadratureGrid {
    /// Tabulates the model on `[-x_max, x_max]` and accumulates the CDF by
    /// the trapezoid rule, normalized to end exactly at one.
    pub fn build(model: &QuadratureModel, step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= MAX_GRID_STEP) {
            return Err(Error::Domain(format!(
                "grid step must lie in (0, {MAX_GRID_STEP}], got {step}"
            )));
        }
        let half = (model.x_max() / step).ceil() as i64;
        let xs: Vec<f64> = (-half..=half).map(|i| i as f64 * step).collect();
        let pdf: Vec<f64> = xs.iter().map(|&x| quadrature_density(x, model)).collect();
        let mut cdf = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in pdf.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * step;
            cdf.push(acc);
        }
        let mass = acc;
        if mass.is_nan() || mass <= 0.0 {
            return Err(Error::Domain("density integrates to zero on the grid".into()));
        }
        for c in &mut cdf {
            *c /= mass;
        }
        Ok(Self { xs, pdf, cdf, step, mass })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn pdf(&self) -> &[f64] {
        &self.pdf
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Trapezoid integral of the density before normalization; one up to
    /// truncation and quadrature error.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// CDF at an arbitrary point by linear interpolation; clamped to [0, 1]
    /// outside the grid.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let (first, last) = (self.xs[0], *self.xs.last().unwrap());
        if x <= first {
            return 0.0;
        }
        if x >= last {
            return 1.0;
        }
        let idx = ((x - first) / self.step) as usize;
        let idx = idx.min(self.xs.len() - 2);
        let t = (x - self.xs[idx]) / self.step;
        self.cdf[idx] + t * (self.cdf[idx + 1] - self.cdf[idx])
    }

    /// Inverse CDF by binary search plus linear interpolation. Flat spans
    /// (zero density) resolve to their left edge.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let hi = self.cdf.partition_point(|&c| c < u);
        if hi == 0 {
            return self.xs[0];
        }
        if hi >= self.cdf.len() {
            return *self.xs.last().unwrap();
        }
        let lo = hi - 1;
        let width = self.cdf[hi] - self.cdf[lo];
        if width <= 0.0 {
            return self.xs[lo];
        }
        self.xs[lo] + (u - self.cdf[lo]) / width * self.step
    }

    /// E[x^2] by the trapezoid rule on the stored grid.
    pub fn second_moment(&self) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.xs.len() {
            let a = self.xs[i - 1] * self.xs[i - 1] * self.pdf[i - 1];
            let b = self.xs[i] * self.xs[i] * self.pdf[i];
            acc += 0.5 * (a + b) * self.step;
        }
        acc / self.mass
    }
}

/// Draws `n` quadrature samples by inverse-CDF transform on the default
/// grid. Reproducible for a fixed seed.
pub fn sample_quadratures(model: &QuadratureModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let grid = QuadratureGrid::build(model, DEFAULT_GRID_STEP)?;
    let mut rng = substream(seed, 0);
    Ok((0..n).map(|_| grid.quantile(rng.gen())).collect())
}
