//! Weighted digraphs, the PageRank linear systems built from them, and the graph-native
//! forward/backward push.

pub mod pagerank;
pub mod resistance;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::push::PushState;
use crate::system::{Decomposition, SparseSystem};
use crate::vector::SparseVector;

/// Degree-equality tolerance for the Eulerian test.
pub const EULERIAN_TOL: f64 = 1e-12;

/// A weighted digraph with cached degrees. Parallel arcs are merged by adding weights.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    out_adj: Vec<Vec<(usize, f64)>>,
    in_adj: Vec<Vec<(usize, f64)>>,
    d_out: Vec<f64>,
    d_in: Vec<f64>,
    m: usize,
    unweighted: bool,
    eulerian: bool,
    undirected: bool,
}

/// Summary numbers used by the PageRank bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n: usize,
    pub m: usize,
    pub min_out: f64,
    pub max_out: f64,
    pub min_in: f64,
    pub max_in: f64,
    /// `||A||_{1,1}`, the total weight.
    pub l11: f64,
    pub frobenius: f64,
    pub unweighted: bool,
    pub eulerian: bool,
    pub undirected: bool,
}

impl Graph {
    /// Graph on `n` nodes from arcs `(u, v, w)`.
    pub fn from_arcs<I>(n: usize, arcs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in arcs {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::IndexOutOfRange { index: x, n });
                }
            }
            if !w.is_finite() {
                return Err(Error::NonFinite(w));
            }
            if !(w > 0.0) {
                return Err(Error::InvalidParameter(format!("arc {u}->{v} has non-positive weight {w}")));
            }
            *acc.entry((u, v)).or_insert(0.0) += w;
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (&(u, v), &w) in &acc {
            out_adj[u].push((v, w));
            in_adj[v].push((u, w));
        }
        let d_out: Vec<f64> = out_adj.iter().map(|a| a.iter().map(|e| e.1).sum()).collect();
        let d_in: Vec<f64> = in_adj.iter().map(|a| a.iter().map(|e| e.1).sum()).collect();
        let eulerian = d_out.iter().zip(&d_in).all(|(a, b)| (a - b).abs() <= EULERIAN_TOL);
        let undirected = acc.iter().all(|(&(u, v), &w)| acc.get(&(v, u)).is_some_and(|&x| x == w));
        let unweighted = acc.values().all(|&w| w == 1.0);
        Ok(Graph { n, out_adj, in_adj, d_out, d_in, m: acc.len(), unweighted, eulerian, undirected })
    }

    /// Undirected graph: each edge `{u, v}` becomes arcs both ways (a loop becomes one arc).
    pub fn undirected<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut arcs = Vec::new();
        for (u, v, w) in edges {
            arcs.push((u, v, w));
            if u != v {
                arcs.push((v, u, w));
            }
        }
        Graph::from_arcs(n, arcs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct arcs.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn out_neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.out_adj[v]
    }

    pub fn in_neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.in_adj[v]
    }

    pub fn d_out(&self, v: usize) -> f64 {
        self.d_out[v]
    }

    pub fn d_in(&self, v: usize) -> f64 {
        self.d_in[v]
    }

    pub fn out_degrees(&self) -> &[f64] {
        &self.d_out
    }

    pub fn in_degrees(&self) -> &[f64] {
        &self.d_in
    }

    /// Weight of arc `u -> v`, 0 if absent.
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        let a = &self.out_adj[u];
        a.binary_search_by_key(&v, |e| e.0).map(|i| a[i].1).unwrap_or(0.0)
    }

    pub fn is_unweighted(&self) -> bool {
        self.unweighted
    }

    pub fn is_eulerian(&self) -> bool {
        self.eulerian
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.out_adj.iter().enumerate().flat_map(|(u, a)| a.iter().map(move |&(v, w)| (u, v, w)))
    }

    pub fn transpose(&self) -> Graph {
        Graph::from_arcs(self.n, self.arcs().map(|(u, v, w)| (v, u, w))).expect("transpose of a valid graph")
    }

    pub fn stats(&self) -> GraphStats {
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        GraphStats {
            n: self.n,
            m: self.m,
            min_out: min(&self.d_out),
            max_out: max(&self.d_out),
            min_in: min(&self.d_in),
            max_in: max(&self.d_in),
            l11: self.arcs().map(|a| a.2).sum(),
            frobenius: self.arcs().map(|a| a.2 * a.2).sum::<f64>().sqrt(),
            unweighted: self.unweighted,
            eulerian: self.eulerian,
            undirected: self.undirected,
        }
    }

    /// `max_u A(u, t)`.
    pub fn column_inf(&self, t: usize) -> f64 {
        self.in_adj[t].iter().map(|e| e.1).fold(0.0, f64::max)
    }

    /// `||A(., t)||_2`.
    pub fn column_l2(&self, t: usize) -> f64 {
        self.in_adj[t].iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    /// Whether every node reaches every other ignoring arc direction.
    pub fn is_weakly_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(u, _) in self.out_adj[v].iter().chain(&self.in_adj[v]) {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n
    }

    pub(crate) fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.n {
            return Err(Error::IndexOutOfRange { index: v, n: self.n });
        }
        Ok(())
    }

    pub(crate) fn check_out_degrees(&self) -> Result<()> {
        match self.d_out.iter().position(|&d| !(d > 0.0)) {
            Some(v) => Err(Error::ZeroOutDegree(v)),
            None => Ok(()),
        }
    }

    /// `L_G = D - A` of an undirected graph; loops cancel.
    pub fn laplacian(&self) -> Result<SparseSystem> {
        if !self.undirected {
            return Err(Error::NotUndirected);
        }
        let mut entries = Vec::with_capacity(self.m + self.n);
        for v in 0..self.n {
            let d = self.d_out[v] - self.weight(v, v);
            if d != 0.0 {
                entries.push((v, v, d));
            }
        }
        entries.extend(self.arcs().filter(|a| a.0 != a.1).map(|(u, v, w)| (u, v, -w)));
        SparseSystem::from_triplets(self.n, entries)
    }
}

/// How a PageRank system is scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// Unit diagonal.
    #[default]
    Identity,
    /// Out-degree diagonal.
    Degree,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

/// The PPR system: `I - (1-a) A^T D^{-1}` (identity form, solution `pi`) or
/// `D - (1-a) A^T` (degree form, solution `D^{-1} pi`); right-hand side `a s`.
pub fn build_ppr_system(g: &Graph, alpha: f64, form: Form) -> Result<Decomposition> {
    check_alpha(alpha)?;
    g.check_out_degrees()?;
    let c = 1.0 - alpha;
    let (diag, entries): (Vec<f64>, Vec<(usize, usize, f64)>) = match form {
        Form::Identity => (vec![1.0; g.n()], g.arcs().map(|(v, u, w)| (u, v, c * w / g.d_out(v))).collect()),
        Form::Degree => (g.out_degrees().to_vec(), g.arcs().map(|(v, u, w)| (u, v, c * w)).collect()),
    };
    Decomposition::forced(diag, SparseSystem::from_triplets(g.n(), entries)?)
}

/// `a s` for a source distribution `s`.
pub fn ppr_rhs(alpha: f64, s: &SparseVector) -> SparseVector {
    s.scaled(alpha)
}

/// The contribution system of target `t`: `I - (1-a) D^{-1} A` with `b = a e_t`, or
/// `D - (1-a) A` with `b = a d(t) e_t`. Both solve for the vector of `pi(., t)`.
pub fn build_contribution_system(g: &Graph, alpha: f64, t: usize, form: Form) -> Result<(Decomposition, SparseVector)> {
    check_alpha(alpha)?;
    g.check_node(t)?;
    g.check_out_degrees()?;
    let c = 1.0 - alpha;
    let (diag, entries, b): (Vec<f64>, Vec<(usize, usize, f64)>, f64) = match form {
        Form::Identity => (vec![1.0; g.n()], g.arcs().map(|(u, v, w)| (u, v, c * w / g.d_out(u))).collect(), alpha),
        Form::Degree => {
            (g.out_degrees().to_vec(), g.arcs().map(|(u, v, w)| (u, v, c * w)).collect(), alpha * g.d_out(t))
        }
    };
    let dec = Decomposition::forced(diag, SparseSystem::from_triplets(g.n(), entries)?)?;
    Ok((dec, SparseVector::unit(g.n(), t, b)?))
}

/// Shared loop of the two graph pushes. `spread(v)` lists `(u, factor)` with
/// `r^{l+1}(u) += factor r^l(v)`; `pushable(v, r)` is the threshold test.
fn graph_push<S, P>(
    g: &Graph,
    start: usize,
    alpha: f64,
    length: usize,
    r_max: f64,
    spread: S,
    pushable: P,
) -> Result<PushState>
where
    S: Fn(usize) -> Vec<(usize, f64)>,
    P: Fn(usize, f64) -> bool,
{
    check_alpha(alpha)?;
    g.check_node(start)?;
    g.check_out_degrees()?;
    if length == 0 {
        return Err(Error::InvalidParameter("truncation length must be at least 1".into()));
    }
    if !(r_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("r_max must be nonnegative, got {r_max}")));
    }
    let mut residues = vec![BTreeMap::new(); length];
    residues[0].insert(start, alpha);
    let mut state = PushState {
        n: g.n(),
        length,
        r_max,
        reserves: vec![BTreeMap::new(); length],
        residues,
        pushes_per_coord: BTreeMap::new(),
        push_count: 0,
        work_units: 0,
    };
    for level in 0..length - 1 {
        let queue: Vec<usize> =
            state.residues[level].iter().filter(|(&v, &r)| pushable(v, r)).map(|(&v, _)| v).collect();
        for v in queue {
            let r = state.residues[level].remove(&v).expect("queued residue");
            *state.reserves[level].entry(v).or_insert(0.0) += r;
            let next = &mut state.residues[level + 1];
            *next.entry(v).or_insert(0.0) += 0.5 * r;
            let targets = spread(v);
            state.work_units += targets.len() as u64 + 1;
            for (u, f) in targets {
                *next.entry(u).or_insert(0.0) += f * r;
            }
            *state.pushes_per_coord.entry(v).or_insert(0) += 1;
            state.push_count += 1;
        }
    }
    Ok(state)
}

/// Leveled forward push from source `s`: pushes `v` when `r(v) / d_out(v) > r_max` and
/// sends `(1-a)/2 A(v,u)/d_out(v)` of the residue to each out-neighbour `u`.
pub fn forward_push(g: &Graph, s: usize, alpha: f64, length: usize, r_max: f64) -> Result<PushState> {
    let c = 0.5 * (1.0 - alpha);
    graph_push(
        g,
        s,
        alpha,
        length,
        r_max,
        |v| g.out_neighbors(v).iter().map(|&(u, w)| (u, c * w / g.d_out(v))).collect(),
        |v, r| r / g.d_out(v) > r_max,
    )
}

/// Leveled backward push to target `t`: pushes `v` when `r(v) > r_max` and sends
/// `(1-a)/2 A(u,v)/d_out(u)` of the residue to each in-neighbour `u`.
pub fn backward_push(g: &Graph, t: usize, alpha: f64, length: usize, r_max: f64) -> Result<PushState> {
    let c = 0.5 * (1.0 - alpha);
    graph_push(
        g,
        t,
        alpha,
        length,
        r_max,
        |v| g.in_neighbors(v).iter().map(|&(u, w)| (u, c * w / g.d_out(u))).collect(),
        |_, r| r > r_max,
    )
}

/// Largest entrywise gap between two push states after scaling the first one's entries
/// at `v` by `scale(v)`.
pub fn push_state_gap(a: &PushState, b: &PushState, scale: impl Fn(usize) -> f64) -> f64 {
    let mut worst = 0.0f64;
    let levels = a.length.max(b.length);
    for l in 0..levels {
        for maps in [(&a.reserves, &b.reserves), (&a.residues, &b.residues)] {
            let (ma, mb) = (maps.0.get(l), maps.1.get(l));
            let keys: std::collections::BTreeSet<usize> =
                ma.into_iter().flat_map(|m| m.keys()).chain(mb.into_iter().flat_map(|m| m.keys())).copied().collect();
            for k in keys {
                let x = ma.and_then(|m| m.get(&k)).copied().unwrap_or(0.0) * scale(k);
                let y = mb.and_then(|m| m.get(&k)).copied().unwrap_or(0.0);
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}
