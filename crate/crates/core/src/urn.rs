//! Ball-sampling experiments: Monte Carlo trials over a literal mutable urn
//! and exact enumeration of the same process in rational arithmetic.
//!
//! The point of this module is independence: nothing here touches the
//! closed-form distributions, so agreement between a trial histogram or an
//! enumerated table and the formulas elsewhere is a genuine cross-check.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::photon_stats::{big_binomial, PolyaParams};
use crate::rng::{split_evenly, substream};

/// Largest draw count accepted by exact enumeration; the distribution table
/// has `draws + 1` entries but the path space behind it grows fast.
pub const MAX_ENUMERATION_DRAWS: u64 = 20;

/// How the urn changes after each draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UrnScheme {
    /// The ball goes back unchanged: draws are independent.
    WithReturn,
    /// The ball stays out: sampling without replacement.
    WithoutReturn,
    /// The ball goes back together with a new ball of the same color.
    ReturnWithAddition,
}

impl UrnScheme {
    pub fn label(&self) -> &'static str {
        match self {
            UrnScheme::WithReturn => "with-return",
            UrnScheme::WithoutReturn => "without-return",
            UrnScheme::ReturnWithAddition => "return-with-addition",
        }
    }
}

/// Histogram of red-draw counts over repeated independent trials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UrnTrialResult {
    /// `counts[j]` trials ended with exactly `j` red balls; the entries sum
    /// to `trials`.
    pub counts: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
}

fn check_feasible(scheme: UrnScheme, p: &PolyaParams) -> Result<()> {
    if scheme == UrnScheme::WithoutReturn && p.draws > p.total {
        return Err(Error::Domain(format!(
            "cannot draw {} balls from {} without return",
            p.draws, p.total
        )));
    }
    Ok(())
}

fn run_trial(scheme: UrnScheme, p: &PolyaParams, rng: &mut impl Rng) -> u64 {
    let mut red = p.red;
    let mut total = p.total;
    let mut reds_drawn = 0u64;
    for _ in 0..p.draws {
        let u: f64 = rng.gen();
        let is_red = u * (total as f64) < red as f64;
        match scheme {
            UrnScheme::WithReturn => {}
            UrnScheme::WithoutReturn => {
                total -= 1;
                if is_red {
                    red -= 1;
                }
            }
            UrnScheme::ReturnWithAddition => {
                total += 1;
                if is_red {
                    red += 1;
                }
            }
        }
        if is_red {
            reds_drawn += 1;
        }
    }
    reds_drawn
}

/// Runs `trials` independent urn experiments and histograms the outcomes.
///
/// Trials are split across `workers` threads with per-worker random
/// substreams, so the result depends only on `(seed, workers)` and not on
/// scheduling.
pub fn urn_simulate(
    scheme: UrnScheme,
    p: &PolyaParams,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<UrnTrialResult> {
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    check_feasible(scheme, p)?;
    let workers = workers.max(1);
    let chunks = split_evenly(trials, workers);
    let slots = p.draws as usize + 1;
    let mut counts = vec![0u64; slots];
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .iter()
            .enumerate()
            .map(|(i, &chunk)| {
                scope.spawn(move || {
                    let mut rng = substream(seed, i as u64);
                    let mut local = vec![0u64; slots];
                    for _ in 0..chunk {
                        local[run_trial(scheme, p, &mut rng) as usize] += 1;
                    }
                    local
                })
            })
            .collect();
        for handle in handles {
            let local = handle.join().expect("urn worker panicked");
            for (dst, src) in counts.iter_mut().zip(local) {
                *dst += src;
            }
        }
    });
    Ok(UrnTrialResult { counts, trials, seed })
}

/// Exact outcome distribution of the drawing process, by dynamic programming
/// over (draws made, reds seen) in rational arithmetic.
///
/// The urn state after any prefix depends only on that pair, so the forward
/// recursion is exact and costs O(draws^2) rational operations.
pub fn urn_enumerate_exact(scheme: UrnScheme, p: &PolyaParams) -> Result<Vec<BigRational>> {
    if p.draws > MAX_ENUMERATION_DRAWS {
        return Err(Error::Resource(format!(
            "exact enumeration is capped at {MAX_ENUMERATION_DRAWS} draws, got {}",
            p.draws
        )));
    }
    check_feasible(scheme, p)?;
    let k = p.draws as usize;
    let mut dist = vec![BigRational::zero(); k + 1];
    dist[0] = BigRational::one();
    for step in 0..k {
        let mut next = vec![BigRational::zero(); k + 1];
        for j in 0..=step {
            if dist[j].is_zero() {
                continue;
            }
            let (red, total) = match scheme {
                UrnScheme::WithReturn => (p.red, p.total),
                UrnScheme::WithoutReturn => (p.red - j as u64, p.total - step as u64),
                UrnScheme::ReturnWithAddition => (p.red + j as u64, p.total + step as u64),
            };
            let p_red = BigRational::new(BigInt::from(red), BigInt::from(total));
            let p_other = BigRational::one() - &p_red;
            next[j + 1] += &dist[j] * p_red;
            next[j] += &dist[j] * p_other;
        }
        dist = next;
    }
    Ok(dist)
}

/// Number of ways to place `draws` indistinguishable balls on `total`
/// levels; the denominator of the counting form of the with-addition law.
pub fn statistical_weight(draws: u64, total: u64) -> Result<BigInt> {
    if total == 0 {
        return Err(Error::Domain("at least one level is required".into()));
    }
    Ok(big_binomial(total + draws - 1, draws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_stats::{polya_pmf_integer, sibling_pmf_integer};
    use num_traits::ToPrimitive;

    fn polya(draws: u64, red: u64, total: u64) -> PolyaParams {
        PolyaParams::new(draws, red, total).unwrap()
    }

    #[test]
    fn enumerate_uniform_case() {
        let dist = urn_enumerate_exact(UrnScheme::ReturnWithAddition, &polya(2, 1, 2)).unwrap();
        let third = BigRational::new(BigInt::from(1), BigInt::from(3));
        assert_eq!(dist, vec![third.clone(), third.clone(), third]);
    }

    #[test]
    fn enumerate_matches_the_counting_form() {
        for (k, m, big_m) in [(3u64, 1u64, 3u64), (5, 2, 6), (4, 3, 5), (6, 1, 2)] {
            let p = polya(k, m, big_m);
            let dist = urn_enumerate_exact(UrnScheme::ReturnWithAddition, &p).unwrap();
            for j in 0..=k {
                assert_eq!(dist[j as usize], polya_pmf_integer(j, &p).unwrap(), "j={j}");
            }
        }
    }

    #[test]
    fn enumerate_matches_the_closed_forms_for_all_schemes() {
        let p = polya(4, 2, 6);
        for scheme in [UrnScheme::WithReturn, UrnScheme::WithoutReturn, UrnScheme::ReturnWithAddition]
        {
            let dist = urn_enumerate_exact(scheme, &p).unwrap();
            for j in 0..=4u64 {
                assert_eq!(dist[j as usize], sibling_pmf_integer(scheme, j, &p).unwrap());
            }
        }
    }

    #[test]
    fn enumerate_guards() {
        assert!(urn_enumerate_exact(UrnScheme::WithoutReturn, &polya(5, 2, 4)).is_err());
        assert!(urn_enumerate_exact(UrnScheme::ReturnWithAddition, &polya(21, 1, 2)).is_err());
        assert!(statistical_weight(3, 0).is_err());
    }

    #[test]
    fn statistical_weight_cases() {
        assert_eq!(statistical_weight(3, 2).unwrap(), BigInt::from(4));
        assert_eq!(statistical_weight(0, 5).unwrap(), BigInt::from(1));
        assert_eq!(statistical_weight(2, 3).unwrap(), BigInt::from(6));
    }

    // Path-level oracle: walk every red/other sequence explicitly and check
    // that sequences with the same red count are equally likely, then that
    // their grouped sums reproduce the enumeration.
    fn path_distribution(scheme: UrnScheme, p: &PolyaParams) -> Vec<BigRational> {
        let k = p.draws as usize;
        let mut by_count = vec![Vec::new(); k + 1];
        for mask in 0u32..(1 << k) {
            let reds = mask.count_ones() as usize;
            let mut prob = BigRational::one();
            let mut red = p.red;
            let mut total = p.total;
            for step in 0..k {
                let draw_red = mask >> step & 1 == 1;
                let p_red = BigRational::new(BigInt::from(red), BigInt::from(total));
                prob *= if draw_red {
                    p_red
                } else {
                    BigRational::one() - &p_red
                };
                // a zero factor means the supply ran out, nothing to update
                if prob.is_zero() {
                    break;
                }
                match scheme {
                    UrnScheme::WithReturn => {}
                    UrnScheme::WithoutReturn => {
                        total -= 1;
                        if draw_red {
                            red -= 1;
                        }
                    }
                    UrnScheme::ReturnWithAddition => {
                        total += 1;
                        if draw_red {
                            red += 1;
                        }
                    }
                }
            }
            by_count[reds].push(prob);
        }
        by_count
            .into_iter()
            .map(|paths| {
                if let Some(first) = paths.first() {
                    for p in &paths {
                        assert_eq!(p, first, "paths with equal red counts must be exchangeable");
                    }
                }
                paths.into_iter().sum()
            })
            .collect()
    }

    #[test]
    fn draws_are_exchangeable() {
        for scheme in [UrnScheme::WithReturn, UrnScheme::WithoutReturn, UrnScheme::ReturnWithAddition]
        {
            let p = polya(4, 2, 5);
            let grouped = path_distribution(scheme, &p);
            let dist = urn_enumerate_exact(scheme, &p).unwrap();
            assert_eq!(grouped, dist);
        }
        let p = polya(6, 1, 3);
        assert_eq!(
            path_distribution(UrnScheme::ReturnWithAddition, &p),
            urn_enumerate_exact(UrnScheme::ReturnWithAddition, &p).unwrap()
        );
    }

    #[test]
    fn simulation_is_deterministic_and_conserves_trials() {
        let p = polya(3, 2, 4);
        let a = urn_simulate(UrnScheme::ReturnWithAddition, &p, 20_000, 7, 2).unwrap();
        let b = urn_simulate(UrnScheme::ReturnWithAddition, &p, 20_000, 7, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.iter().sum::<u64>(), 20_000);
        let c = urn_simulate(UrnScheme::ReturnWithAddition, &p, 20_000, 7, 3).unwrap();
        assert_eq!(c.counts.iter().sum::<u64>(), 20_000);
        assert!(urn_simulate(UrnScheme::ReturnWithAddition, &p, 0, 7, 1).is_err());
    }

    #[test]
    fn simulation_tracks_the_exact_distribution() {
        let p = polya(3, 2, 4);
        let trials = 200_000u64;
        let result = urn_simulate(UrnScheme::ReturnWithAddition, &p, trials, 42, 1).unwrap();
        let exact = urn_enumerate_exact(UrnScheme::ReturnWithAddition, &p).unwrap();
        for (j, (e, &count)) in exact.iter().zip(&result.counts).enumerate() {
            let want = e.to_f64().unwrap();
            let freq = count as f64 / trials as f64;
            let se = (want * (1.0 - want) / trials as f64).sqrt();
            assert!(
                (freq - want).abs() < 5.0 * se,
                "outcome {j}: freq {freq} vs exact {want} (se {se})"
            );
        }
    }
}
