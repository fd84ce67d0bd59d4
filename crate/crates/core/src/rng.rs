//! Counter-based random streams.
//!
//! Samples are grouped into fixed-size blocks. Block `i` draws from ChaCha8 keyed by the
//! run seed with stream id `i`, so the values a block produces never depend on which
//! worker ran it. Block tallies are merged pairwise in block order, which keeps every
//! floating-point sum identical across thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per block.
pub const BLOCK_LEN: u64 = 4096;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of run `seed`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th independent repetition of a run.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Running sums over a batch of samples.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
    pub steps: u64,
    pub absorbed: u64,
}

impl Tally {
    pub fn record(&mut self, value: f64, steps: u64, absorbed: bool) {
        self.count += 1;
        self.sum += value;
        self.sum_sq += value * value;
        self.steps += steps;
        self.absorbed += u64::from(absorbed);
    }

    pub fn merge(a: Tally, b: Tally) -> Tally {
        Tally {
            count: a.count + b.count,
            sum: a.sum + b.sum,
            sum_sq: a.sum_sq + b.sum_sq,
            steps: a.steps + b.steps,
            absorbed: a.absorbed + b.absorbed,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.sum / n;
        ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0)
    }
}

/// Merges in a fixed binary tree over the slice order.
pub fn pairwise_merge(parts: &[Tally]) -> Tally {
    match parts.len() {
        0 => Tally::default(),
        1 => parts[0],
        len => {
            let (l, r) = parts.split_at(len / 2);
            Tally::merge(pairwise_merge(l), pairwise_merge(r))
        }
    }
}

/// Runs `n` samples split into blocks, in parallel, and merges the block tallies.
pub fn run_blocks<F>(seed: u64, n: u64, sample: F) -> Tally
where
    F: Fn(&mut StreamRng, &mut Tally) + Sync,
{
    let blocks = n.div_ceil(BLOCK_LEN);
    let parts: Vec<Tally> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let len = BLOCK_LEN.min(n - b * BLOCK_LEN);
            let mut t = Tally::default();
            for _ in 0..len {
                sample(&mut rng, &mut t);
            }
            t
        })
        .collect();
    pairwise_merge(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(substream(7, 3), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(substream(7, 3), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(substream(7, 4), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn block_sums_do_not_depend_on_thread_count() {
        let f = |rng: &mut StreamRng, t: &mut Tally| t.record(rng.random::<f64>(), 1, false);
        let n = 3 * BLOCK_LEN + 17;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_blocks(11, n, f));
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run_blocks(11, n, f));
        assert_eq!(one, four);
        assert_eq!(one.count, n);
    }

    #[test]
    fn variance_of_constant_is_zero() {
        let mut t = Tally::default();
        for _ in 0..10 {
            t.record(2.5, 0, false);
        }
        assert_eq!(t.mean(), 2.5);
        assert_eq!(t.variance(), 0.0);
    }
}
