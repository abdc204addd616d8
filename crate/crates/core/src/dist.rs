//! Finite discrete laws with exact moments and inverse-CDF sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

const PROB_TOL: f64 = 1e-12;

/// A finite discrete law. Atoms are kept in strictly increasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    values: Vec<f64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl Distribution {
    /// Builds a law from `(value, prob)` pairs. Pairs may come in any order;
    /// repeated values are merged.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        for &(v, p) in atoms {
            if !v.is_finite() || !p.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "non-finite atom ({v}, {p})"
                )));
            }
            if p <= 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom {v} has non-positive probability {p}"
                )));
            }
        }
        let mut sorted = atoms.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut probs: Vec<f64> = Vec::with_capacity(sorted.len());
        for (v, p) in sorted {
            if values.last() == Some(&v) {
                *probs.last_mut().unwrap() += p;
            } else {
                values.push(v);
                probs.push(p);
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { values, probs, cdf })
    }

    pub fn rademacher() -> Self {
        Self::new(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    pub fn point(value: f64) -> Self {
        Self::new(&[(value, 1.0)]).unwrap()
    }

    /// Uniform law on the given values.
    pub fn uniform(values: &[f64]) -> Result<Self> {
        let p = 1.0 / values.len().max(1) as f64;
        let atoms: Vec<_> = values.iter().map(|&v| (v, p)).collect();
        Self::new(&atoms)
    }

    /// The three-point law {-1: 1/4, 0: 1/2, 1: 1/4}.
    pub fn three_point() -> Self {
        Self::new(&[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]).unwrap()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    /// `E[h(X)]`.
    pub fn expect(&self, h: impl Fn(f64) -> f64) -> f64 {
        self.atoms().map(|(v, p)| p * h(v)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }

    pub fn moments(&self) -> MomentTable {
        MomentTable::of(self)
    }

    /// Shifts the atoms so that the mean is zero.
    pub fn center(&self) -> Self {
        let m = self.mean();
        if m == 0.0 {
            return self.clone();
        }
        let atoms: Vec<_> = self.atoms().map(|(v, p)| (v - m, p)).collect();
        Self::new(&atoms).expect("shift preserves validity")
    }

    pub fn is_centered(&self, tol: f64) -> bool {
        self.mean().abs() <= tol
    }

    /// Index of the atom selected by a uniform draw `u` in `[0, 1)`.
    pub fn quantile_index(&self, u: f64) -> usize {
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.values.len() - 1)
    }

    pub fn sample_index(&self, rng: &mut RngStream) -> usize {
        self.quantile_index(rng.uniform())
    }

    /// One inverse-CDF draw.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.values[self.sample_index(rng)]
    }
}

/// Exact moments of a law.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentTable {
    /// `mu[k] = E[X^k]` for `k = 0..=8`, `mu[0] = 1`.
    pub mu: [f64; 9],
    /// `E[(X^2 - mu_2)^2]`.
    pub mu_tilde4: f64,
    /// `E[(X^2 - mu_2)^3]`.
    pub mu_tilde6: f64,
    /// `E[(X^2 - mu_2)^4]`.
    pub mu_tilde8: f64,
    /// `E|X|^3`.
    pub abs3: f64,
}

impl MomentTable {
    pub fn of(d: &Distribution) -> Self {
        let mut mu = [0.0; 9];
        for (k, m) in mu.iter_mut().enumerate() {
            *m = d.expect(|x| x.powi(k as i32));
        }
        let m2 = mu[2];
        let tilde = |k: i32| d.expect(|x| (x * x - m2).powi(k));
        Self {
            mu,
            mu_tilde4: tilde(2),
            mu_tilde6: tilde(3),
            mu_tilde8: tilde(4),
            abs3: d.expect(|x| x.abs().powi(3)),
        }
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.mu[k]
    }
}

/// Serialized form of a law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LawSpec {
    Rademacher,
    Finite { atoms: Vec<(Number, Number)> },
}

/// A number given either as a JSON number or a decimal string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Float(f64),
    Text(String),
}

impl Number {
    pub fn value(&self) -> Result<f64> {
        match self {
            Number::Float(x) => Ok(*x),
            Number::Text(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("not a number: {s:?}"))),
        }
    }
}

impl LawSpec {
    pub fn build(&self) -> Result<Distribution> {
        match self {
            LawSpec::Rademacher => Ok(Distribution::rademacher()),
            LawSpec::Finite { atoms } => {
                let atoms = atoms
                    .iter()
                    .map(|(v, p)| Ok((v.value()?, p.value()?)))
                    .collect::<Result<Vec<_>>>()?;
                Distribution::new(&atoms)
            }
        }
    }

    pub fn from_distribution(d: &Distribution) -> Self {
        LawSpec::Finite {
            atoms: d
                .atoms()
                .map(|(v, p)| (Number::Float(v), Number::Float(p)))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn rademacher_moments() {
        let m = Distribution::rademacher().moments();
        assert_eq!(m.mu[2], 1.0);
        assert_eq!(m.mu[3], 0.0);
        assert_eq!(m.mu[4], 1.0);
        assert_eq!(m.mu[8], 1.0);
        assert_eq!(m.mu_tilde4, 0.0);
    }

    #[test]
    fn point_mass_at_zero_has_zero_moments() {
        let m = Distribution::point(0.0).moments();
        assert!(m.mu[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn three_point_moments() {
        let m = Distribution::three_point().moments();
        // -1 and 1 carry 1/4 each, so every even moment is 1/2.
        assert_abs_diff_eq!(m.mu[2], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mu[4], 0.5, epsilon = 1e-15);
        // X^2 - 1/2 is +-1/2 with equal weight.
        assert_abs_diff_eq!(m.mu_tilde4, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mu_tilde6, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn center_examples() {
        let d = Distribution::new(&[(0.0, 0.5), (2.0, 0.5)])
            .unwrap()
            .center();
        assert_eq!(d.values(), &[-1.0, 1.0]);
        let r = Distribution::rademacher();
        assert_eq!(r.center(), r);
        let d = Distribution::new(&[(1.0, 0.9), (11.0, 0.1)])
            .unwrap()
            .center();
        assert_abs_diff_eq!(d.values()[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.values()[1], 9.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(Distribution::new(&[]).is_err());
        assert!(Distribution::new(&[(0.0, 0.5)]).is_err());
        assert!(Distribution::new(&[(0.0, 1.5), (1.0, -0.5)]).is_err());
        assert!(Distribution::new(&[(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn merges_repeated_atoms() {
        let d = Distribution::new(&[(1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]).unwrap();
        assert_eq!(d.values(), &[0.0, 1.0]);
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn point_mass_always_samples_its_value() {
        let d = Distribution::point(5.0);
        let mut rng = RngStream::new(3, 0);
        assert!((0..1000).all(|_| d.sample(&mut rng) == 5.0));
    }

    #[test]
    fn rademacher_sample_mean() {
        let d = Distribution::rademacher();
        let mut rng = RngStream::new(1, 0);
        let n = 1_000_000;
        let s: f64 = (0..n).map(|_| d.sample(&mut rng)).sum();
        assert!((s / n as f64).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn sampling_is_replayable() {
        let d = Distribution::three_point();
        let draw = || {
            let mut rng = RngStream::new(1, 0);
            (0..100).map(|_| d.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn empirical_moments_within_five_standard_errors() {
        let d = Distribution::new(&[(-2.0, 0.2), (0.5, 0.5), (1.0, 0.3)]).unwrap();
        let mut rng = RngStream::new(7, 2);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        for k in 1..=4 {
            let exact = d.expect(|x| x.powi(k));
            let var = d.expect(|x| x.powi(2 * k)) - exact * exact;
            let emp = xs.iter().map(|x| x.powi(k)).sum::<f64>() / n as f64;
            assert!(
                (emp - exact).abs() <= 5.0 * (var / n as f64).sqrt(),
                "k={k}"
            );
        }
    }

    #[test]
    fn law_spec_accepts_decimal_strings() {
        let spec: LawSpec = serde_json::from_str(
            r#"{"type":"finite","atoms":[[-1,"0.25"],[0,"0.5"],["1","0.25"]]}"#,
        )
        .unwrap();
        assert_eq!(spec.build().unwrap(), Distribution::three_point());
        let spec: LawSpec = serde_json::from_str(r#"{"type":"rademacher"}"#).unwrap();
        assert_eq!(spec.build().unwrap(), Distribution::rademacher());
    }

    fn arb_law() -> impl Strategy<Value = Distribution> {
        prop::collection::vec((-10.0f64..10.0, 0.01f64..1.0), 1..6).prop_map(|raw| {
            let total: f64 = raw.iter().map(|a| a.1).sum();
            let atoms: Vec<_> = raw.iter().map(|&(v, p)| (v, p / total)).collect();
            let mut d = Distribution::new(&atoms);
            while d.is_err() {
                // Renormalization left a rounding residue; fold it into the first atom.
                let mut a = atoms.clone();
                let s: f64 = a.iter().map(|x| x.1).sum();
                a[0].1 += 1.0 - s;
                d = Distribution::new(&a);
            }
            d.unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn centered_mean_vanishes(d in arb_law()) {
            prop_assert!(d.center().mean().abs() < 1e-12);
        }

        #[test]
        fn mu_tilde4_identity(d in arb_law()) {
            let m = d.center().moments();
            let scale = m.mu[4].max(1.0);
            prop_assert!((m.mu_tilde4 - (m.mu[4] - m.mu[2] * m.mu[2])).abs() < 1e-12 * scale);
            prop_assert!(m.mu[4] >= m.mu[2] * m.mu[2] - 1e-12 * scale);
        }
    }
}
