use std::sync::Arc;

use super::space::OutcomeSpace;
use crate::error::{Error, Result};

/// A real function of the outcome, stored densely in enumeration order.
#[derive(Clone, Debug)]
pub struct RandomFunctional {
    space: Arc<OutcomeSpace>,
    values: Vec<f64>,
}

impl RandomFunctional {
    pub fn new(space: Arc<OutcomeSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Argument(format!(
                "expected {} values, got {}",
                space.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite functional value".into()));
        }
        Ok(Self { space, values })
    }

    /// Evaluates `f` on the coordinate values of every outcome.
    pub fn from_fn(space: &Arc<OutcomeSpace>, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = space.n();
        let mut x = vec![0.0; n];
        let values = (0..space.len())
            .map(|idx| {
                for (k, xk) in x.iter_mut().enumerate() {
                    *xk = space.value(idx, k);
                }
                f(&x)
            })
            .collect();
        Self {
            space: space.clone(),
            values,
        }
    }

    pub fn constant(space: &Arc<OutcomeSpace>, c: f64) -> Self {
        Self {
            space: space.clone(),
            values: vec![c; space.len()],
        }
    }

    /// Coordinate `k` as a functional.
    pub fn coordinate(space: &Arc<OutcomeSpace>, k: usize) -> Self {
        Self::from_fn(space, |x| x[k])
    }

    pub(crate) fn from_raw(space: Arc<OutcomeSpace>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), space.len());
        Self { space, values }
    }

    pub fn space(&self) -> &Arc<OutcomeSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.space.expect(&self.values)
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.space
            .probs()
            .iter()
            .zip(&self.values)
            .map(|(p, v)| p * v.powi(k))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.map(|v| (v - m) * (v - m)).mean()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(
            self.space.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self::from_raw(
            self.space.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn centered(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Centered and scaled to unit variance.
    pub fn standardized(&self) -> Result<Self> {
        let var = self.variance();
        if var <= 0.0 {
            return Err(Error::DegenerateVariance("constant functional".into()));
        }
        let m = self.mean();
        let s = var.sqrt();
        Ok(self.map(|v| (v - m) / s))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_centered(&self, tol: f64) -> bool {
        self.mean().abs() <= tol * (1.0 + self.moment(2).sqrt())
    }

    pub(crate) fn check_same_space(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space.laws() == other.space.laws() {
            Ok(())
        } else {
            Err(Error::Argument(
                "functionals live on different spaces".into(),
            ))
        }
    }
}
