use std::sync::Arc;

use super::functional::RandomFunctional;
use super::kernel::{factorial, ChaosKernel};
use super::space::OutcomeSpace;
use crate::error::{Error, Result};
use crate::hoeffding;

/// Mean plus one canonical kernel per order `1..=n`.
#[derive(Clone, Debug)]
pub struct ChaosDecomposition {
    pub mean: f64,
    /// `kernels[d - 1]` has order `d`.
    pub kernels: Vec<ChaosKernel>,
}

impl ChaosDecomposition {
    pub fn space(&self) -> &Arc<OutcomeSpace> {
        self.kernels[0].space()
    }

    pub fn kernel(&self, d: usize) -> Option<&ChaosKernel> {
        d.checked_sub(1).and_then(|i| self.kernels.get(i))
    }

    pub fn reconstruct(&self) -> RandomFunctional {
        let sp = self.space();
        let mut out = vec![self.mean; sp.len()];
        for k in &self.kernels {
            for (o, v) in out.iter_mut().zip(k.integral().values()) {
                *o += v;
            }
        }
        RandomFunctional::new(sp.clone(), out).expect("finite by construction")
    }

    /// `E[I_d(f_d)^2]` for each order.
    pub fn grade_second_moments(&self) -> Vec<f64> {
        self.kernels
            .iter()
            .map(|k| factorial(k.order()) * k.norm2())
            .collect()
    }
}

/// Chaos decomposition from the Hoeffding terms: `f_J = W_J / d!`.
pub fn decompose(x: &RandomFunctional) -> ChaosDecomposition {
    let sp = x.space();
    let h = hoeffding::project(x);
    let mut kernels: Vec<ChaosKernel> = (1..=sp.n()).map(|d| ChaosKernel::zero(sp, d)).collect();
    for t in h.terms() {
        let d = t.subset.len();
        if d == 0 || t.max_abs() == 0.0 {
            continue;
        }
        let c = 1.0 / factorial(d);
        kernels[d - 1].insert(t.subset.clone(), t.data.iter().map(|v| v * c).collect());
    }
    ChaosDecomposition {
        mean: h.mean(),
        kernels,
    }
}

/// Grade components `G_0, ..., G_n` of `X`, as full-size arrays.
///
/// Built one coordinate at a time from
/// `G'_d = E_k G_d + (G_{d-1} - E_k G_{d-1})`.
pub fn grades(x: &RandomFunctional) -> Vec<Vec<f64>> {
    let sp = x.space();
    let mut g = vec![x.values().to_vec()];
    for k in 0..sp.n() {
        let means: Vec<Vec<f64>> = g.iter().map(|v| sp.expect_axis(v, k)).collect();
        let mut next = Vec::with_capacity(g.len() + 1);
        for d in 0..=g.len() {
            let mut v = if d < g.len() {
                means[d].clone()
            } else {
                vec![0.0; sp.len()]
            };
            if d > 0 {
                for ((o, a), b) in v.iter_mut().zip(&g[d - 1]).zip(&means[d - 1]) {
                    *o += a - b;
                }
            }
            next.push(v);
        }
        g = next;
    }
    g
}

/// `(-L)^alpha X`: grade `d` is scaled by `d^alpha`.
///
/// For `alpha = 0` the mean is kept; for `alpha > 0` it is removed; a
/// negative power needs a centered input.
pub fn apply_l_power(x: &RandomFunctional, alpha: f64) -> Result<RandomFunctional> {
    if !alpha.is_finite() {
        return Err(Error::Argument(format!("non-finite power {alpha}")));
    }
    let mean = x.mean();
    if alpha < 0.0 && mean.abs() > 1e-10 * (1.0 + x.moment(2).sqrt()) {
        return Err(Error::Domain(format!(
            "negative power {alpha} needs a centered functional, mean is {mean:e}"
        )));
    }
    if alpha == 0.0 {
        return Ok(x.clone());
    }
    let g = grades(x);
    let mut out = vec![0.0; x.space().len()];
    for (d, v) in g.iter().enumerate().skip(1) {
        let c = (d as f64).powf(alpha);
        for (o, a) in out.iter_mut().zip(v) {
            *o += c * a;
        }
    }
    RandomFunctional::new(x.space().clone(), out)
}

/// `X(ω[k→t]) - sum_s nu_k(s) X(ω[k→s])` for every outcome.
pub fn gradient_at(x: &RandomFunctional, k: usize, t: usize) -> Vec<f64> {
    let sp = x.space();
    let v = x.values();
    let mean = sp.expect_axis(v, k);
    (0..sp.len())
        .map(|idx| v[sp.replace(idx, k, t)] - mean[idx])
        .collect()
}

/// Finite difference gradient for every coordinate and replacement atom.
#[derive(Clone, Debug)]
pub struct DiscreteGradient {
    space: Arc<OutcomeSpace>,
    /// `parts[k][t]` is `∇_{k,t} X`.
    parts: Vec<Vec<Vec<f64>>>,
}

impl DiscreteGradient {
    pub fn at(&self, k: usize, t: usize) -> &[f64] {
        &self.parts[k][t]
    }

    pub fn space(&self) -> &Arc<OutcomeSpace> {
        &self.space
    }

    /// `sum_k E_t[h(∇_{k,t} X)]` as a function of the outcome.
    pub fn block_average(&self, h: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.space.len()];
        for (k, per_t) in self.parts.iter().enumerate() {
            for (t, g) in per_t.iter().enumerate() {
                let w = self.space.law(k).probs()[t];
                for (o, v) in out.iter_mut().zip(g) {
                    *o += w * h(*v);
                }
            }
        }
        out
    }
}

pub fn gradient(x: &RandomFunctional) -> DiscreteGradient {
    let sp = x.space();
    let parts = (0..sp.n())
        .map(|k| (0..sp.sizes()[k]).map(|t| gradient_at(x, k, t)).collect())
        .collect();
    DiscreteGradient {
        space: sp.clone(),
        parts,
    }
}

/// `|Cov(X, Y) - sum_k E E_t[∇(-L)^{α-1} X · ∇(-L)^{-α} Y]|`.
pub fn covariance_identity_check(
    x: &RandomFunctional,
    y: &RandomFunctional,
    alpha: f64,
) -> Result<f64> {
    x.check_same_space(y)?;
    if !x.is_centered(1e-10) || !y.is_centered(1e-10) {
        return Err(Error::Domain(
            "covariance relation needs centered inputs".into(),
        ));
    }
    let sp = x.space();
    let a = apply_l_power(x, alpha - 1.0)?;
    let b = apply_l_power(y, -alpha)?;
    let mut rhs = 0.0;
    for k in 0..sp.n() {
        for (t, w) in sp.law(k).probs().iter().enumerate() {
            let ga = gradient_at(&a, k, t);
            let gb = gradient_at(&b, k, t);
            let prod: Vec<f64> = ga.iter().zip(&gb).map(|(p, q)| p * q).collect();
            rhs += w * sp.expect(&prod);
        }
    }
    let cov = x.mul(y)?.mean() - x.mean() * y.mean();
    Ok((cov - rhs).abs())
}

/// Largest pointwise violation of the discrete product rule
/// `∇_{k,t}(FG) = F(ω[k→t]) ∇_{k,t}G + G(ω[k→t]) ∇_{k,t}F
///   - E_u[∇_{k,t}F ∇_{k,t}G + ∇_{k,u}F ∇_{k,u}G]`.
pub fn product_rule_residual(f: &RandomFunctional, g: &RandomFunctional) -> Result<f64> {
    f.check_same_space(g)?;
    let sp = f.space();
    let fg = f.mul(g)?;
    let mut worst: f64 = 0.0;
    for k in 0..sp.n() {
        let w = sp.law(k).probs();
        let m = sp.sizes()[k];
        let gf: Vec<Vec<f64>> = (0..m).map(|t| gradient_at(f, k, t)).collect();
        let gg: Vec<Vec<f64>> = (0..m).map(|t| gradient_at(g, k, t)).collect();
        let avg: Vec<f64> = (0..sp.len())
            .map(|i| (0..m).map(|u| w[u] * gf[u][i] * gg[u][i]).sum())
            .collect();
        for t in 0..m {
            let lhs = gradient_at(&fg, k, t);
            for i in 0..sp.len() {
                let j = sp.replace(i, k, t);
                let rhs = f.values()[j] * gg[t][i] + g.values()[j] * gf[t][i]
                    - (gf[t][i] * gg[t][i] + avg[i]);
                worst = worst.max((lhs[i] - rhs).abs());
            }
        }
    }
    Ok(worst)
}
