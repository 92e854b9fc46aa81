//! Group-by-group simulation of conditional photon subtraction from
//! multimode thermal light, with homodyne readout of the first mode.
//!
//! Physical mode follows the apparatus: per-mode thermal intensities, a
//! weakly reflecting tap whose click count is Poisson in the tapped
//! intensity, and acceptance of groups whose click count hits the target.
//! Idealized mode samples the zero-reflectivity limit of the same
//! conditional law directly (the intensity tilt has a closed form), so it
//! is fast and serves as the oracle for the physical path.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{split_evenly, substream};

/// Tap reflectivity used when none is given.
pub const DEFAULT_REFLECTIVITY: f64 = 0.01;
const MAX_REFLECTIVITY: f64 = 0.2;

/// Which generation path to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SimMode {
    /// Literal apparatus: intensities, tap clicks, postselection.
    Physical,
    /// Direct draw from the zero-reflectivity conditional law.
    Idealized,
}

/// Full description of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// Number of populated thermal modes.
    pub modes: u64,
    /// Click count a group must show to be accepted.
    pub subtracted: u64,
    /// Mean photon number per mode before the tap.
    pub mu0: f64,
    /// Tap reflectivity, in (0, 0.2].
    pub reflectivity: f64,
    /// Number of groups to generate.
    pub groups: u64,
    pub mode: SimMode,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(
        modes: u64,
        subtracted: u64,
        mu0: f64,
        reflectivity: f64,
        groups: u64,
        mode: SimMode,
        seed: u64,
    ) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Domain("at least one mode is required".into()));
        }
        if !mu0.is_finite() || mu0 <= 0.0 {
            return Err(Error::Domain(format!(
                "mean photon number per mode must be positive, got {mu0}"
            )));
        }
        if !(reflectivity > 0.0 && reflectivity <= MAX_REFLECTIVITY) {
            return Err(Error::Domain(format!(
                "reflectivity must lie in (0, {MAX_REFLECTIVITY}], got {reflectivity}"
            )));
        }
        if groups == 0 {
            return Err(Error::Domain("at least one group is required".into()));
        }
        Ok(Self { modes, subtracted, mu0, reflectivity, groups, mode, seed })
    }
}

/// Accepted homodyne samples plus the bookkeeping of the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalSampleSet {
    pub quadratures: Vec<f64>,
    pub accepted: u64,
    pub generated: u64,
    pub acceptance_rate: f64,
}

impl ConditionalSampleSet {
    /// True when no group met the acceptance condition; a valid outcome,
    /// not an error.
    pub fn is_empty(&self) -> bool {
        self.quadratures.is_empty()
    }
}

/// Tap click histogram over unconditioned groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TapCounts {
    /// `histogram[t]` groups produced exactly `t` clicks.
    pub histogram: Vec<u64>,
    pub mean: f64,
    pub generated: u64,
}

/// Poisson draw by single-uniform inversion; cheap for the small means a
/// weak tap produces. The early return resolves the overwhelmingly common
/// zero-click case without an exp().
fn poisson_inversion(rng: &mut impl Rng, lambda: f64) -> u64 {
    let u: f64 = rng.gen();
    // exp(-x) >= 1 - x, so u + lambda < 1 certifies a zero-click draw.
    if u + lambda < 1.0 {
        return 0;
    }
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut n = 0u64;
    let cap = (100.0 + 10.0 * lambda) as u64;
    while u >= cdf && n < cap {
        n += 1;
        p *= lambda / n as f64;
        cdf += p;
    }
    n
}

/// Quadrature of a coherent component of the given intensity under a
/// uniformly random phase: mean sqrt(2 I) cos(theta), variance 1/2.
fn coherent_quadrature(rng: &mut impl Rng, intensity: f64) -> f64 {
    let theta = rng.gen::<f64>() * std::f64::consts::TAU;
    let noise: f64 = rng.sample(StandardNormal);
    (2.0 * intensity).sqrt() * theta.cos() + std::f64::consts::FRAC_1_SQRT_2 * noise
}

fn physical_chunk(cfg: &ExperimentConfig, groups: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::new();
    for _ in 0..groups {
        let first: f64 = cfg.mu0 * rng.sample::<f64, _>(Exp1);
        let mut total = first;
        for _ in 1..cfg.modes {
            total += cfg.mu0 * rng.sample::<f64, _>(Exp1);
        }
        if poisson_inversion(rng, cfg.reflectivity * total) != cfg.subtracted {
            continue;
        }
        out.push(coherent_quadrature(rng, (1.0 - cfg.reflectivity) * first));
    }
    out
}

fn idealized_chunk(cfg: &ExperimentConfig, groups: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // Conditioning tilts the total intensity law by a factor S^subtracted,
    // turning its gamma shape from `modes` into `modes + subtracted`; the
    // per-mode split is unaffected, and the first share is Beta(1, modes-1).
    let shape = (cfg.modes + cfg.subtracted) as f64;
    let total_intensity =
        Gamma::new(shape, cfg.mu0).expect("shape and scale are validated positive");
    let split_exponent = 1.0 / (cfg.modes as f64 - 1.0);
    let mut out = Vec::with_capacity(groups as usize);
    for _ in 0..groups {
        let total: f64 = total_intensity.sample(rng);
        let share = if cfg.modes == 1 {
            1.0
        } else {
            1.0 - rng.gen::<f64>().powf(split_exponent)
        };
        out.push(coherent_quadrature(rng, total * share));
    }
    out
}

/// Generates `groups` groups and keeps the homodyne samples of those whose
/// click count equals the target. Work is split across `workers` threads
/// with per-worker substreams; the output depends only on `(seed, workers)`.
pub fn simulate_conditional(cfg: &ExperimentConfig, workers: usize) -> Result<ConditionalSampleSet> {
    let workers = workers.max(1);
    let chunks = split_evenly(cfg.groups, workers);
    let mut quadratures: Vec<f64> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .iter()
            .enumerate()
            .map(|(i, &chunk)| {
                let cfg = *cfg;
                scope.spawn(move || {
                    let mut rng = substream(cfg.seed, i as u64);
                    match cfg.mode {
                        SimMode::Physical => physical_chunk(&cfg, chunk, &mut rng),
                        SimMode::Idealized => idealized_chunk(&cfg, chunk, &mut rng),
                    }
                })
            })
            .collect();
        for handle in handles {
            quadratures.extend(handle.join().expect("simulation worker panicked"));
        }
    });
    let accepted = quadratures.len() as u64;
    Ok(ConditionalSampleSet {
        quadratures,
        accepted,
        generated: cfg.groups,
        acceptance_rate: accepted as f64 / cfg.groups as f64,
    })
}

/// Histograms the tap clicks of unconditioned groups; only meaningful for
/// the physical path, where clicks are actually generated.
pub fn tap_count_statistics(cfg: &ExperimentConfig, workers: usize) -> Result<TapCounts> {
    if cfg.mode != SimMode::Physical {
        return Err(Error::Domain(
            "tap statistics are a physical-mode observable; idealized mode has no tap".into(),
        ));
    }
    let workers = workers.max(1);
    let chunks = split_evenly(cfg.groups, workers);
    let mut histogram: Vec<u64> = Vec::new();
    let mut click_total: u64 = 0;
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .iter()
            .enumerate()
            .map(|(i, &chunk)| {
                let cfg = *cfg;
                scope.spawn(move || {
                    let mut rng = substream(cfg.seed, i as u64);
                    let mut local: Vec<u64> = Vec::new();
                    let mut clicks = 0u64;
                    for _ in 0..chunk {
                        let mut total = 0.0;
                        for _ in 0..cfg.modes {
                            total += cfg.mu0 * rng.sample::<f64, _>(Exp1);
                        }
                        let t = poisson_inversion(&mut rng, cfg.reflectivity * total);
                        let idx = t as usize;
                        if idx >= local.len() {
                            local.resize(idx + 1, 0);
                        }
                        local[idx] += 1;
                        clicks += t;
                    }
                    (local, clicks)
                })
            })
            .collect();
        for handle in handles {
            let (local, clicks) = handle.join().expect("tap worker panicked");
            if local.len() > histogram.len() {
                histogram.resize(local.len(), 0);
            }
            for (dst, src) in histogram.iter_mut().zip(local) {
                *dst += src;
            }
            click_total += clicks;
        }
    });
    Ok(TapCounts {
        histogram,
        mean: click_total as f64 / cfg.groups as f64,
        generated: cfg.groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(
        modes: u64,
        subtracted: u64,
        mu0: f64,
        reflectivity: f64,
        groups: u64,
        mode: SimMode,
        seed: u64,
    ) -> ExperimentConfig {
        ExperimentConfig::new(modes, subtracted, mu0, reflectivity, groups, mode, seed).unwrap()
    }

    #[test]
    fn config_is_validated() {
        assert!(ExperimentConfig::new(0, 1, 0.5, 0.01, 10, SimMode::Physical, 1).is_err());
        assert!(ExperimentConfig::new(1, 1, 0.0, 0.01, 10, SimMode::Physical, 1).is_err());
        assert!(ExperimentConfig::new(1, 1, 0.5, 0.0, 10, SimMode::Physical, 1).is_err());
        assert!(ExperimentConfig::new(1, 1, 0.5, 0.25, 10, SimMode::Physical, 1).is_err());
        assert!(ExperimentConfig::new(1, 1, 0.5, 0.01, 0, SimMode::Physical, 1).is_err());
    }

    #[test]
    fn idealized_samples_match_the_target_moments() {
        // One mode, one subtraction, mu0 = 1: mean photon number 2, so the
        // quadrature variance must be 2.5.
        let cfg = config(1, 1, 1.0, 0.01, 200_000, SimMode::Idealized, 424242);
        let set = simulate_conditional(&cfg, 1).unwrap();
        assert_eq!(set.accepted, cfg.groups);
        assert_eq!(set.acceptance_rate, 1.0);
        let n = set.quadratures.len() as f64;
        let mean = set.quadratures.iter().sum::<f64>() / n;
        let var = set.quadratures.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "sample mean {mean}");
        assert!((var - 2.5).abs() < 0.05, "sample variance {var}");
    }

    #[test]
    fn physical_acceptance_matches_the_tilted_weight() {
        // Acceptance probability of a group is negative binomial in the
        // tapped intensity: C(M+k-1, k) (r mu0)^k / (1 + r mu0)^(M+k).
        let cfg = config(1, 2, 0.6, 0.05, 2_000_000, SimMode::Physical, 99);
        let set = simulate_conditional(&cfg, 1).unwrap();
        let rmu: f64 = 0.05 * 0.6;
        let want = rmu * rmu / (1.0 + rmu).powi(3);
        let se = (want * (1.0 - want) / cfg.groups as f64).sqrt();
        let got = set.acceptance_rate;
        assert!(
            (got - want).abs() < 5.0 * se,
            "acceptance {got} vs {want} (se {se})"
        );
        assert_eq!(set.accepted as usize, set.quadratures.len());
        assert_eq!(set.generated, cfg.groups);
    }

    #[test]
    fn impossible_condition_yields_an_empty_flagged_set() {
        let cfg = config(2, 5, 0.5, 0.01, 10_000, SimMode::Physical, 7);
        let set = simulate_conditional(&cfg, 2).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.accepted, 0);
        assert_eq!(set.acceptance_rate, 0.0);
    }

    #[test]
    fn runs_are_deterministic_for_fixed_seed_and_workers() {
        for mode in [SimMode::Physical, SimMode::Idealized] {
            let cfg = config(2, 1, 0.8, 0.1, 50_000, mode, 31337);
            let a = simulate_conditional(&cfg, 2).unwrap();
            let b = simulate_conditional(&cfg, 2).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn tap_counts_track_the_tapped_intensity() {
        let cfg = config(1, 0, 1.0, 0.01, 1_000_000, SimMode::Physical, 5);
        let taps = tap_count_statistics(&cfg, 1).unwrap();
        assert!((taps.mean - 0.01).abs() < 3e-4, "tap mean {}", taps.mean);
        assert_eq!(taps.histogram.iter().sum::<u64>(), cfg.groups);
        // Zero-click fraction is the void probability 1/(1 + r mu0).
        let zero_frac = taps.histogram[0] as f64 / cfg.groups as f64;
        assert!((zero_frac - 1.0 / 1.01).abs() < 5e-4, "void fraction {zero_frac}");

        let cfg3 = config(3, 0, 1.0, 0.01, 1_000_000, SimMode::Physical, 5);
        let taps3 = tap_count_statistics(&cfg3, 1).unwrap();
        assert!((taps3.mean - 0.03).abs() < 6e-4, "tap mean {}", taps3.mean);
    }

    #[test]
    fn tap_counts_require_the_physical_path() {
        let cfg = config(1, 0, 1.0, 0.01, 100, SimMode::Idealized, 5);
        assert!(tap_count_statistics(&cfg, 1).is_err());
    }

    #[test]
    fn poisson_inversion_has_the_right_first_moments() {
        let mut rng = crate::rng::substream(123, 0);
        let lambda = 0.8;
        let n = 200_000;
        let mut sum = 0u64;
        let mut sq = 0u64;
        for _ in 0..n {
            let t = poisson_inversion(&mut rng, lambda);
            sum += t;
            sq += t * t;
        }
        let mean = sum as f64 / n as f64;
        let var = sq as f64 / n as f64 - mean * mean;
        assert!((mean - lambda).abs() < 0.01, "poisson mean {mean}");
        assert!((var - lambda).abs() < 0.02, "poisson variance {var}");
    }
}
