//! Seeded random streams.
//!
//! Every replica of every Monte Carlo arm gets its own ChaCha stream keyed by
//! `(seed, replica index)`, so results do not depend on how work is split
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives an unrelated seed for a named sub-experiment.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs `f` once per replica in parallel; output is in replica order.
pub fn replicate<T, F>(count: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng, usize) -> T + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(&mut stream(seed, i as u64), i))
        .collect()
}

/// Fallible variant of [`replicate`]; the first error in replica order wins.
pub fn try_replicate<T, E, F>(count: usize, seed: u64, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(&mut SimRng, usize) -> Result<T, E> + Sync,
{
    replicate(count, seed, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn replicate_is_thread_count_independent() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| replicate(1000, 42, |rng, _| rng.random::<u64>()))
        };
        assert_eq!(run(1), run(7));
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream(1, 0).random();
        let b: u64 = stream(1, 1).random();
        assert_ne!(a, b);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }
}
