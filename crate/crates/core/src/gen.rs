//! Random and structured instances for tests, benches and the CLI.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::system::SparseSystem;
use crate::vector::SparseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Rdd,
    Cdd,
    Rcdd,
    Sdd,
}

/// A random diagonally dominant system with about `avg_nnz` off-diagonal entries per row.
///
/// Off-diagonal magnitudes are uniform in `[0.1, 1]`, signed unless `z_class`. The
/// diagonal is the relevant absolute off-diagonal sum divided by `ratio` in `(0, 1]`, so
/// `ratio = 1` gives tight dominance. Rows and columns without off-diagonal mass get a
/// diagonal uniform in `[0.5, 2]`.
pub fn random_system<R: Rng + ?Sized>(
    n: usize,
    avg_nnz: f64,
    kind: SystemKind,
    z_class: bool,
    ratio: f64,
    rng: &mut R,
) -> SparseSystem {
    assert!(n > 0 && ratio > 0.0 && ratio <= 1.0);
    let p = if n > 1 { (avg_nnz / (n - 1) as f64).min(1.0) } else { 0.0 };
    let mut off: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for j in 0..n {
        for k in 0..n {
            if j == k || (kind == SystemKind::Sdd && k < j) || !(rng.random::<f64>() < p) {
                continue;
            }
            let mag = rng.random_range(0.1..=1.0);
            let v = if z_class || rng.random::<bool>() { -mag } else { mag };
            off.insert((j, k), v);
            if kind == SystemKind::Sdd {
                off.insert((k, j), v);
            }
        }
    }
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; n];
    for (&(j, k), v) in &off {
        rows[j] += v.abs();
        cols[k] += v.abs();
    }
    let diag: Vec<f64> = (0..n)
        .map(|k| {
            let need = match kind {
                SystemKind::Rdd | SystemKind::Sdd => rows[k],
                SystemKind::Cdd => cols[k],
                SystemKind::Rcdd => rows[k].max(cols[k]),
            };
            if need > 0.0 {
                need / ratio
            } else {
                rng.random_range(0.5..=2.0)
            }
        })
        .collect();
    SparseSystem::from_triplets(n, off.into_iter().map(|((j, k), v)| (j, k, v)).chain((0..n).map(|k| (k, k, diag[k]))))
        .expect("generated entries are valid")
}

/// Random vector with `nnz` distinct nonzeros, magnitudes in `[0.1, 1]`.
pub fn random_vector<R: Rng + ?Sized>(n: usize, nnz: usize, nonnegative: bool, rng: &mut R) -> SparseVector {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(nnz.min(n));
    let pairs: Vec<(usize, f64)> = idx
        .into_iter()
        .map(|k| {
            let m = rng.random_range(0.1..=1.0);
            (k, if nonnegative || rng.random::<bool>() { m } else { -m })
        })
        .collect();
    SparseVector::from_pairs(n, pairs).expect("generated entries are valid")
}

/// Random digraph where every node has at least one out-arc; about `avg_out` arcs per
/// node, weights in `[0.5, 2]` if `weighted`.
pub fn random_digraph<R: Rng + ?Sized>(n: usize, avg_out: f64, weighted: bool, rng: &mut R) -> Graph {
    let p = if n > 1 { (avg_out / n as f64).min(1.0) } else { 1.0 };
    let mut arcs = Vec::new();
    for u in 0..n {
        let mut any = false;
        for v in 0..n {
            if rng.random::<f64>() < p {
                arcs.push((u, v, weight(weighted, rng)));
                any = true;
            }
        }
        if !any {
            arcs.push((u, rng.random_range(0..n), weight(weighted, rng)));
        }
    }
    Graph::from_arcs(n, arcs).expect("generated arcs are valid")
}

fn weight<R: Rng + ?Sized>(weighted: bool, rng: &mut R) -> f64 {
    if weighted {
        rng.random_range(0.5..=2.0)
    } else {
        1.0
    }
}

/// Unweighted Eulerian digraph: a Hamiltonian cycle over a random permutation plus
/// `extra` random directed cycles of length 2..=n. Parallel arcs merge, so weights can
/// exceed 1 but in- and out-degrees stay equal.
pub fn random_eulerian<R: Rng + ?Sized>(n: usize, extra: usize, rng: &mut R) -> Graph {
    let mut arcs = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    push_cycle(&perm, &mut arcs);
    for _ in 0..extra {
        let len = rng.random_range(2.min(n)..=n);
        perm.shuffle(rng);
        push_cycle(&perm[..len], &mut arcs);
    }
    Graph::from_arcs(n, arcs).expect("generated arcs are valid")
}

/// Simple unweighted Eulerian digraph: arc-disjoint cycles only, so every weight is 1.
pub fn random_simple_eulerian<R: Rng + ?Sized>(n: usize, extra: usize, rng: &mut R) -> Graph {
    let mut used = std::collections::BTreeSet::new();
    let mut arcs = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut add = |cyc: &[usize], arcs: &mut Vec<(usize, usize, f64)>| {
        let pairs: Vec<(usize, usize)> = (0..cyc.len()).map(|i| (cyc[i], cyc[(i + 1) % cyc.len()])).collect();
        if pairs.iter().all(|p| !used.contains(p)) {
            for p in pairs {
                used.insert(p);
                arcs.push((p.0, p.1, 1.0));
            }
        }
    };
    add(&perm, &mut arcs);
    for _ in 0..extra {
        let len = rng.random_range(2.min(n)..=n.min(6));
        perm.shuffle(rng);
        add(&perm[..len], &mut arcs);
    }
    Graph::from_arcs(n, arcs).expect("generated arcs are valid")
}

fn push_cycle(nodes: &[usize], arcs: &mut Vec<(usize, usize, f64)>) {
    for i in 0..nodes.len() {
        arcs.push((nodes[i], nodes[(i + 1) % nodes.len()], 1.0));
    }
}

/// Connected undirected Erdos-Renyi graph, resampled until connected.
pub fn connected_er<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
    loop {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v, 1.0));
                }
            }
        }
        let g = Graph::undirected(n, edges).expect("generated edges are valid");
        if g.is_weakly_connected() {
            return g;
        }
    }
}

/// Union of `k` random permutation digraphs (each node gets `k` out- and in-arcs,
/// counting merged parallel arcs by weight).
pub fn permutation_graph<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Graph {
    let mut arcs = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..k {
        perm.shuffle(rng);
        arcs.extend((0..n).map(|u| (u, perm[u], 1.0)));
    }
    Graph::from_arcs(n, arcs).expect("generated arcs are valid")
}

/// Undirected path `0 - 1 - ... - (n-1)`.
pub fn path(n: usize) -> Graph {
    Graph::undirected(n, (1..n).map(|v| (v - 1, v, 1.0))).expect("path edges are valid")
}

/// Directed cycle `0 -> 1 -> ... -> 0`.
pub fn cycle(n: usize) -> Graph {
    Graph::from_arcs(n, (0..n).map(|v| (v, (v + 1) % n, 1.0))).expect("cycle arcs are valid")
}

/// Undirected complete graph.
pub fn complete(n: usize) -> Graph {
    Graph::undirected(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v, 1.0)))).expect("edges are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::system::classify;

    #[test]
    fn generated_classes() {
        let mut rng = substream(1, 0);
        for _ in 0..20 {
            assert!(classify(&random_system(20, 3.0, SystemKind::Rdd, false, 1.0, &mut rng)).rdd);
            assert!(classify(&random_system(20, 3.0, SystemKind::Cdd, false, 0.7, &mut rng)).cdd);
            assert!(classify(&random_system(20, 3.0, SystemKind::Rcdd, true, 0.9, &mut rng)).rcddz());
            assert!(classify(&random_system(20, 3.0, SystemKind::Sdd, false, 0.9, &mut rng)).sdd());
        }
    }

    #[test]
    fn graph_generators() {
        let mut rng = substream(2, 0);
        for _ in 0..10 {
            assert!(random_eulerian(12, 3, &mut rng).is_eulerian());
            let s = random_simple_eulerian(12, 6, &mut rng);
            assert!(s.is_eulerian() && s.is_unweighted());
            assert!(connected_er(15, 0.2, &mut rng).is_weakly_connected());
            assert!(random_digraph(15, 2.0, true, &mut rng).out_degrees().iter().all(|&d| d > 0.0));
            assert!(permutation_graph(9, 3, &mut rng).is_eulerian());
        }
        assert!(path(5).is_undirected() && complete(4).m() == 12 && cycle(3).is_eulerian());
    }
}
