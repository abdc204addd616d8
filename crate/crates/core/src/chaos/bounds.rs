use serde::Serialize;

use super::contraction::contraction_norm2;
use super::functional::RandomFunctional;
use super::operators::{apply_l_power, grades, gradient_at, ChaosDecomposition};
use crate::error::{Error, Result};

/// Grade magnitude below which a grade counts as absent.
const GRADE_TOL: f64 = 1e-10;

/// `sum_k w_k E_t[h(∇_{k,t} X)]` pointwise, with `∇` supplied per `(k, t)`.
fn block_sum(
    x: &RandomFunctional,
    mut per: impl FnMut(usize, usize, &[f64]) -> Vec<f64>,
) -> Vec<f64> {
    let sp = x.space();
    let mut out = vec![0.0; sp.len()];
    for k in 0..sp.n() {
        for (t, &w) in sp.law(k).probs().iter().enumerate() {
            let g = gradient_at(x, k, t);
            for (o, v) in out.iter_mut().zip(per(k, t, &g)) {
                *o += w * v;
            }
        }
    }
    out
}

fn variance(x: &RandomFunctional, v: &[f64]) -> f64 {
    let sp = x.space();
    let m = sp.expect(v);
    sp.expect(&v.iter().map(|a| (a - m) * (a - m)).collect::<Vec<_>>())
        .max(0.0)
}

fn mean_square(x: &RandomFunctional, v: &[f64]) -> f64 {
    x.space()
        .expect(&v.iter().map(|a| a * a).collect::<Vec<_>>())
}

fn require_centered(x: &RandomFunctional) -> Result<()> {
    if x.is_centered(1e-10) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "bound needs a centered functional, mean is {:e}",
            x.mean()
        )))
    }
}

/// `E ∫ (∇X)^4 dt = sum_k 2 E_t E[(∇_{k,t} X)^4]`.
fn gradient_l4(x: &RandomFunctional) -> f64 {
    let per = block_sum(x, |_, _, g| g.iter().map(|v| v.powi(4)).collect());
    2.0 * x.space().expect(&per)
}

/// Terms of the master Kolmogorov bound for a centered functional.
#[derive(Clone, Debug, Serialize)]
pub struct MasterBound {
    /// `|1 - E X^2|`.
    pub variance_gap: f64,
    /// `sqrt(Var[∫ ∇X ∇L^{-1}X dt/2])`.
    pub covariance_term: f64,
    /// `3/2 sqrt(E∫(∇X)^4 dt) ((E X^4 E[(∫|∇L^{-1}X|^2 dt)^2])^{1/4}
    ///  + sqrt(pi)/2 sqrt(E[((-L)^{-1/2}X)^2]))`.
    pub gradient_term: f64,
    /// `4 (E∫((I + 2(-L)^{1/2})|∇X|^2)^2 dt E∫((I + 2(-L)^{1/2})(∇L^{-1}X)^2)^2 dt)^{1/4}`.
    pub smoothing_term: f64,
    pub total: f64,
}

pub fn master_bound(x: &RandomFunctional) -> Result<MasterBound> {
    require_centered(x)?;
    let sp = x.space();
    let inv = apply_l_power(x, -1.0)?;
    let g = grades(x);
    let inv_sqrt_moment: f64 = g
        .iter()
        .enumerate()
        .skip(1)
        .map(|(d, v)| mean_square(x, v) / d as f64)
        .sum();

    // Smoothed squared gradients: (I + 2(-L)^{1/2}) h.
    let smooth = |h: Vec<f64>| -> Result<Vec<f64>> {
        let f = RandomFunctional::new(sp.clone(), h)?;
        let half = apply_l_power(&f, 0.5)?;
        Ok(f.values()
            .iter()
            .zip(half.values())
            .map(|(a, b)| a + 2.0 * b)
            .collect())
    };

    let mut cross = vec![0.0; sp.len()];
    let mut inv_sq = vec![0.0; sp.len()];
    let mut smooth_x = 0.0;
    let mut smooth_inv = 0.0;
    for k in 0..sp.n() {
        for (t, &w) in sp.law(k).probs().iter().enumerate() {
            let gx = gradient_at(x, k, t);
            // ∇L^{-1}X = -∇(-L)^{-1}X.
            let gi: Vec<f64> = gradient_at(&inv, k, t).iter().map(|v| -v).collect();
            for i in 0..sp.len() {
                cross[i] += w * gx[i] * gi[i];
                inv_sq[i] += 2.0 * w * gi[i] * gi[i];
            }
            let sx = smooth(gx.iter().map(|v| v * v).collect())?;
            let si = smooth(gi.iter().map(|v| v * v).collect())?;
            smooth_x += 2.0 * w * mean_square(x, &sx);
            smooth_inv += 2.0 * w * mean_square(x, &si);
        }
    }
    let l4 = gradient_l4(x);
    let m4 = x.moment(4);
    let variance_gap = (1.0 - x.moment(2)).abs();
    let covariance_term = variance(x, &cross).sqrt();
    let gradient_term = 1.5
        * l4.sqrt()
        * ((m4 * mean_square(x, &inv_sq)).powf(0.25)
            + std::f64::consts::PI.sqrt() / 2.0 * inv_sqrt_moment.sqrt());
    let smoothing_term = 4.0 * (smooth_x * smooth_inv).powf(0.25);
    Ok(MasterBound {
        variance_gap,
        covariance_term,
        gradient_term,
        smoothing_term,
        total: variance_gap + covariance_term + gradient_term + smoothing_term,
    })
}

/// The two bounds for a single multiple integral `X = I_d(f)`.
#[derive(Clone, Debug, Serialize)]
pub struct DkiBounds {
    pub order: usize,
    pub variance_gap: f64,
    /// `Var[∫ (∇X)^2 dt/2]`.
    pub gradient_variance: f64,
    /// `E ∫ (∇X)^4 dt`.
    pub gradient_l4: f64,
    /// `gap + (1/d) sqrt(V) + (12 + 5 (E X^4)^{1/4}) / sqrt(d) sqrt(L4)`.
    pub sharp: f64,
    /// `gap + sqrt(V) + 24 sqrt(L4)`.
    pub simple: f64,
}

/// Order of `X` if it has a single nonzero grade of positive order.
pub fn pure_order(x: &RandomFunctional) -> Option<usize> {
    let scale = 1.0 + x.moment(2).sqrt();
    let nonzero: Vec<usize> = grades(x)
        .iter()
        .enumerate()
        .filter(|(_, v)| v.iter().any(|a| a.abs() > GRADE_TOL * scale))
        .map(|(d, _)| d)
        .collect();
    match nonzero.as_slice() {
        [d] if *d > 0 => Some(*d),
        _ => None,
    }
}

pub fn dki_bounds(x: &RandomFunctional) -> Result<DkiBounds> {
    let d = pure_order(x).ok_or_else(|| {
        Error::Domain("bound needs a single multiple integral of positive order".into())
    })?;
    let sq = block_sum(x, |_, _, g| g.iter().map(|v| v * v).collect());
    let v = variance(x, &sq);
    let l4 = gradient_l4(x);
    let gap = (1.0 - x.moment(2)).abs();
    let df = d as f64;
    Ok(DkiBounds {
        order: d,
        variance_gap: gap,
        gradient_variance: v,
        gradient_l4: l4,
        sharp: gap + v.sqrt() / df + (12.0 + 5.0 * x.moment(4).powf(0.25)) / df.sqrt() * l4.sqrt(),
        simple: gap + v.sqrt() + 24.0 * l4.sqrt(),
    })
}

/// Both sides of the fourth moment inequality.
#[derive(Clone, Debug, Serialize)]
pub struct FourthMomentBound {
    pub fourth_moment: f64,
    /// `E[(sum_k 2 E_t (∇X)^2)^2]`.
    pub gradient_l2_squared: f64,
    /// `E[sum_k 2 E_t (∇X)^4]`.
    pub gradient_l4: f64,
    /// `36 L2^2 + 15 L4 + 2 (E X^2)^2`.
    pub bound: f64,
}

pub fn fourth_moment_bound(x: &RandomFunctional) -> Result<FourthMomentBound> {
    require_centered(x)?;
    let sq: Vec<f64> = block_sum(x, |_, _, g| g.iter().map(|v| 2.0 * v * v).collect());
    let l2 = mean_square(x, &sq);
    let l4 = gradient_l4(x);
    let m2 = x.moment(2);
    Ok(FourthMomentBound {
        fourth_moment: x.moment(4),
        gradient_l2_squared: l2,
        gradient_l4: l4,
        bound: 36.0 * l2 + 15.0 * l4 + 2.0 * m2 * m2,
    })
}

/// Contraction-norm rate for a finite chaos sum, without its constant.
#[derive(Clone, Debug, Serialize)]
pub struct SumRate {
    pub variance_gap: f64,
    /// `sum_{0<=l<i<=d} |f_i ⋆_i^l f_i|^2`.
    pub diagonal: f64,
    /// `sum_{1<=l<i<=d} |f_i ⋆_l^l f_i|^2`.
    pub partial: f64,
    /// `sum_{1<=l<i<=d} |f_l ⋆_l^l f_i|^2`.
    pub mixed: f64,
    /// Square root of the three sums.
    pub rate: f64,
}

pub fn sum_rate(c: &ChaosDecomposition) -> Result<SumRate> {
    let d = c
        .kernels
        .iter()
        .filter(|k| !k.is_zero(GRADE_TOL))
        .map(|k| k.order())
        .max()
        .unwrap_or(0);
    let (mut diagonal, mut partial, mut mixed) = (0.0, 0.0, 0.0);
    for i in 1..=d {
        let fi = c.kernel(i).expect("order within range");
        for l in 0..i {
            diagonal += contraction_norm2(fi, fi, i, l)?;
            if l >= 1 {
                partial += contraction_norm2(fi, fi, l, l)?;
                let fl = c.kernel(l).expect("order within range");
                mixed += contraction_norm2(fl, fi, l, l)?;
            }
        }
    }
    let second: f64 = c.mean * c.mean + c.grade_second_moments().iter().sum::<f64>();
    Ok(SumRate {
        variance_gap: (1.0 - second).abs(),
        diagonal,
        partial,
        mixed,
        rate: (diagonal + partial + mixed).sqrt(),
    })
}
