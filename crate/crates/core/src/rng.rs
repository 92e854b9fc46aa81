//! Seeded, splittable random streams for the simulation modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ChaCha8 substream `worker` of the generator family identified by `seed`.
///
/// Stream 0 is the plain single-threaded generator for that seed, so a serial
/// run and worker 0 of a parallel run see the same stream.
pub(crate) fn substream(seed: u64, worker: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker);
    rng
}

/// Near-even split of `n` work items over `workers` slots.
pub(crate) fn split_evenly(n: u64, workers: usize) -> Vec<u64> {
    assert!(workers >= 1, "worker count must be at least 1");
    let w = workers as u64;
    (0..w).map(|i| n / w + u64::from(i < n % w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn substreams_differ_and_are_reproducible() {
        let a: Vec<u64> = (0..4).map(|_| substream(7, 0).next_u64()).collect();
        assert!(a.iter().all(|&v| v == a[0]));
        assert_ne!(substream(7, 0).next_u64(), substream(7, 1).next_u64());
        assert_ne!(substream(7, 0).next_u64(), substream(8, 0).next_u64());
    }

    #[test]
    fn split_covers_everything() {
        assert_eq!(split_evenly(10, 3), vec![4, 3, 3]);
        assert_eq!(split_evenly(2, 4), vec![1, 1, 0, 0]);
        assert_eq!(split_evenly(0, 2), vec![0, 0]);
    }
}
