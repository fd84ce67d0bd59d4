//! Walker/Vose alias tables for O(1) draws from a discrete distribution.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    /// Table for weights proportional to `weights` (nonnegative, not all zero).
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if let Some(&w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("alias weight {w} is not a nonnegative number")));
        }
        let total: f64 = weights.iter().sum();
        if n == 0 || total <= 0.0 {
            return Err(Error::InvalidParameter("alias table needs positive total weight".into()));
        }
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers carry probability 1 up to rounding
        Ok(AliasTable { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.prob.len());
        if rng.random::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }

    /// Probability mass the table assigns to each outcome.
    pub fn distribution(&self) -> Vec<f64> {
        let n = self.prob.len() as f64;
        let mut out = vec![0.0; self.prob.len()];
        for i in 0..self.prob.len() {
            out[i] += self.prob[i] / n;
            out[self.alias[i]] += (1.0 - self.prob[i]) / n;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_weights() {
        assert!(AliasTable::new(&[]).is_err());
        assert!(AliasTable::new(&[0.0, 0.0]).is_err());
        assert!(AliasTable::new(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn empirical_frequencies() {
        let t = AliasTable::new(&[1.0, 2.0, 0.0, 5.0]).unwrap();
        let mut rng = substream(1, 0);
        let mut counts = [0u32; 4];
        let n = 200_000;
        for _ in 0..n {
            counts[t.sample(&mut rng)] += 1;
        }
        assert_eq!(counts[2], 0);
        for (c, p) in counts.iter().zip([0.125, 0.25, 0.0, 0.625]) {
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() <= 4.0 * sd + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn table_encodes_the_distribution(w in proptest::collection::vec(0.0f64..10.0, 1..40)) {
            let total: f64 = w.iter().sum();
            prop_assume!(total > 0.0);
            let t = AliasTable::new(&w).unwrap();
            for (p, wi) in t.distribution().iter().zip(&w) {
                prop_assert!((p - wi / total).abs() < 1e-12);
            }
        }
    }
}
