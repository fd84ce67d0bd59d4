//! Fixed instances for the benchmarks.

use sublin::gen::{self, SystemKind};
use sublin::rng::substream;
use sublin::{decompose, truncation_length, Decomposition, GapMode, Graph, SparseVector, VecStats};

/// A random RDD problem with `t = e_0`, its gap set to `gamma` and `L` for `epsilon`.
pub struct Problem {
    pub dec: Decomposition,
    pub b: SparseVector,
    pub t: SparseVector,
    pub gamma: f64,
    pub epsilon: f64,
    pub length: usize,
}

pub fn rdd_problem(n: usize, seed: u64, epsilon: f64) -> Problem {
    let mut rng = substream(seed, 0);
    let m = gen::random_system(n, 4.0, SystemKind::Rdd, false, 0.5, &mut rng);
    let dec = decompose(&m).expect("generated systems are dominant");
    let b = gen::random_vector(n, 8.min(n), false, &mut rng);
    let t = SparseVector::unit(n, 0, 1.0).expect("n > 0");
    // ratio 0.5 keeps the inf-norm gap at 1/4 or more
    let gamma = 0.25;
    let length =
        truncation_length(&dec, &VecStats::of(&dec, &b), &VecStats::of(&dec, &t), gamma, epsilon, GapMode::General)
            .expect("valid parameters");
    Problem { dec, b, t, gamma, epsilon, length }
}

pub fn eulerian_graph(n: usize, seed: u64) -> Graph {
    gen::random_eulerian(n, 2 * n, &mut substream(seed, 1))
}

pub fn er_graph(n: usize, seed: u64) -> Graph {
    gen::connected_er(n, 8.0 / n as f64, &mut substream(seed, 2))
}
