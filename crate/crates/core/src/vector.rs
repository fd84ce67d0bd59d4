//! Sparse vectors with sorted coordinates, used for right-hand sides `b` and targets `t`.

use crate::error::{Error, Result};

/// A sparse vector of fixed dimension. Coordinates are sorted and every stored value is nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector {
    n: usize,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(n: usize) -> Self {
        SparseVector { n, idx: Vec::new(), val: Vec::new() }
    }

    /// Builds from `(index, value)` pairs. Repeated indices are summed, zeros dropped.
    pub fn from_pairs<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for (i, v) in pairs {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
            entries.push((i, v));
        }
        entries.sort_by_key(|e| e.0);
        let mut idx = Vec::with_capacity(entries.len());
        let mut val: Vec<f64> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            if idx.last() == Some(&i) {
                *val.last_mut().unwrap() += v;
            } else {
                idx.push(i);
                val.push(v);
            }
        }
        let (idx, val) = idx.into_iter().zip(val).filter(|(_, v)| *v != 0.0).unzip();
        Ok(SparseVector { n, idx, val })
    }

    pub fn from_dense(v: &[f64]) -> Result<Self> {
        Self::from_pairs(v.len(), v.iter().copied().enumerate())
    }

    /// `scale * e_k`.
    pub fn unit(n: usize, k: usize, scale: f64) -> Result<Self> {
        Self::from_pairs(n, [(k, scale)])
    }

    /// Every coordinate equal to `value`.
    pub fn constant(n: usize, value: f64) -> Self {
        if value == 0.0 {
            return Self::zeros(n);
        }
        SparseVector { n, idx: (0..n).collect(), val: vec![value; n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn is_zero(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }

    pub fn values(&self) -> &[f64] {
        &self.val
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().copied().zip(self.val.iter().copied())
    }

    /// Entry lookup by binary search; 0.0 for absent coordinates.
    pub fn get(&self, k: usize) -> f64 {
        match self.idx.binary_search(&k) {
            Ok(p) => self.val[p],
            Err(_) => 0.0,
        }
    }

    pub fn l1(&self) -> f64 {
        self.val.iter().map(|v| v.abs()).sum()
    }

    pub fn linf(&self) -> f64 {
        self.val.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// First coordinate holding a negative value, if any.
    pub fn first_negative(&self) -> Option<usize> {
        self.iter().find(|(_, v)| *v < 0.0).map(|(i, _)| i)
    }

    pub fn scaled(&self, c: f64) -> SparseVector {
        let pairs = self.iter().map(|(i, v)| (i, c * v));
        // scaling cannot move indices out of range
        Self::from_pairs(self.n, pairs).expect("scaled vector stays in range")
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn dot_dense(&self, x: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * x[i]).sum()
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.n });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_merged_and_zeros_dropped() {
        let v = SparseVector::from_pairs(5, [(3, 1.0), (1, 2.0), (3, -1.0), (4, 0.5)]).unwrap();
        assert_eq!(v.indices(), &[1, 4]);
        assert_eq!(v.get(1), 2.0);
        assert_eq!(v.get(3), 0.0);
        assert_eq!(v.l1(), 2.5);
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(matches!(SparseVector::from_pairs(2, [(2, 1.0)]), Err(Error::IndexOutOfRange { index: 2, n: 2 })));
    }

    #[test]
    fn dense_round_trip() {
        let d = vec![0.0, -1.5, 0.0, 2.0];
        assert_eq!(SparseVector::from_dense(&d).unwrap().to_dense(), d);
    }
}
