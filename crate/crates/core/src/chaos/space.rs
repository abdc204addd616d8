use std::sync::Arc;

use crate::dist::Distribution;
use crate::error::{Error, Result};

/// Hard cap on the number of enumerated outcomes.
pub const MAX_OUTCOMES: usize = 1 << 18;

/// Product of finitely many independent finite laws.
///
/// Outcomes are tuples of atom indices, enumerated lexicographically with
/// coordinate 0 most significant.
#[derive(Debug)]
pub struct OutcomeSpace {
    laws: Vec<Distribution>,
    sizes: Vec<usize>,
    strides: Vec<usize>,
    probs: Vec<f64>,
}

impl OutcomeSpace {
    pub fn new(laws: Vec<Distribution>) -> Result<Arc<Self>> {
        let outcomes = laws
            .iter()
            .try_fold(1u128, |acc, l| acc.checked_mul(l.len() as u128))
            .unwrap_or(u128::MAX);
        if outcomes > MAX_OUTCOMES as u128 {
            return Err(Error::SpaceTooLarge {
                outcomes,
                cap: MAX_OUTCOMES,
            });
        }
        let sizes: Vec<usize> = laws.iter().map(Distribution::len).collect();
        let mut strides = vec![1; sizes.len()];
        for k in (0..sizes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * sizes[k + 1];
        }
        let total = outcomes as usize;
        let mut probs = vec![1.0; total];
        for (k, law) in laws.iter().enumerate() {
            let (s, m) = (strides[k], sizes[k]);
            for (idx, p) in probs.iter_mut().enumerate() {
                *p *= law.probs()[(idx / s) % m];
            }
        }
        Ok(Arc::new(Self {
            laws,
            sizes,
            strides,
            probs,
        }))
    }

    /// `n` copies of one law.
    pub fn iid(law: &Distribution, n: usize) -> Result<Arc<Self>> {
        Self::new(vec![law.clone(); n])
    }

    pub fn n(&self) -> usize {
        self.laws.len()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn laws(&self) -> &[Distribution] {
        &self.laws
    }

    pub fn law(&self, k: usize) -> &Distribution {
        &self.laws[k]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Atom index of coordinate `k` in outcome `idx`.
    pub fn atom(&self, idx: usize, k: usize) -> usize {
        (idx / self.strides[k]) % self.sizes[k]
    }

    /// Value of coordinate `k` in outcome `idx`.
    pub fn value(&self, idx: usize, k: usize) -> f64 {
        self.laws[k].values()[self.atom(idx, k)]
    }

    pub fn atoms_of(&self, idx: usize) -> Vec<usize> {
        (0..self.n()).map(|k| self.atom(idx, k)).collect()
    }

    pub fn index_of(&self, atoms: &[usize]) -> usize {
        atoms.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    /// Outcome `idx` with coordinate `k` replaced by atom `t`.
    pub fn replace(&self, idx: usize, k: usize, t: usize) -> usize {
        idx - self.atom(idx, k) * self.strides[k] + t * self.strides[k]
    }

    /// `E[v]`.
    pub fn expect(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }

    /// Conditional expectation integrating out coordinate `k`; the result is
    /// a full-size array constant along `k`.
    pub fn expect_axis(&self, v: &[f64], k: usize) -> Vec<f64> {
        let (s, m) = (self.strides[k], self.sizes[k]);
        let w = self.laws[k].probs();
        let mut out = vec![0.0; v.len()];
        for outer in (0..v.len()).step_by(s * m) {
            for inner in 0..s {
                let base = outer + inner;
                let mean: f64 = (0..m).map(|t| w[t] * v[base + t * s]).sum();
                for t in 0..m {
                    out[base + t * s] = mean;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_sum_to_one() {
        let laws = vec![
            Distribution::three_point(),
            Distribution::rademacher(),
            Distribution::new(&[(0.0, 0.1), (1.0, 0.2), (2.0, 0.7)]).unwrap(),
        ];
        let sp = OutcomeSpace::new(laws).unwrap();
        assert_eq!(sp.len(), 18);
        assert!((sp.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lexicographic_order() {
        let sp = OutcomeSpace::iid(&Distribution::three_point(), 3).unwrap();
        assert_eq!(sp.atoms_of(0), vec![0, 0, 0]);
        assert_eq!(sp.atoms_of(1), vec![0, 0, 1]);
        assert_eq!(sp.atoms_of(3), vec![0, 1, 0]);
        assert_eq!(sp.atoms_of(26), vec![2, 2, 2]);
        for i in 0..sp.len() {
            assert_eq!(sp.index_of(&sp.atoms_of(i)), i);
        }
        assert_eq!(sp.replace(0, 0, 2), 18);
    }

    #[test]
    fn size_cap() {
        let r = OutcomeSpace::iid(&Distribution::rademacher(), 19);
        assert!(matches!(r, Err(Error::SpaceTooLarge { .. })));
        assert!(OutcomeSpace::iid(&Distribution::rademacher(), 18).is_ok());
        let huge = OutcomeSpace::iid(&Distribution::three_point(), 200);
        assert!(matches!(huge, Err(Error::SpaceTooLarge { .. })));
    }

    #[test]
    fn axis_expectation() {
        let sp = OutcomeSpace::iid(&Distribution::rademacher(), 2).unwrap();
        // X1 + 2 X2 on outcomes (--, -+, +-, ++).
        let v = [-3.0, 1.0, -1.0, 3.0];
        assert_eq!(sp.expect_axis(&v, 0), vec![-2.0, 2.0, -2.0, 2.0]);
        assert_eq!(sp.expect_axis(&v, 1), vec![-1.0, -1.0, 1.0, 1.0]);
    }
}
