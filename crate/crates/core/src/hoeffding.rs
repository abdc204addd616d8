//! Hoeffding (ANOVA) projections by exact marginalization, and the
//! U-statistic rate quantities built from them.

use std::sync::Arc;

use serde::Serialize;

use crate::chaos::kernel::{cell_weights, compact_index, compact_len};
use crate::chaos::{OutcomeSpace, RandomFunctional};
use crate::error::{Error, Result};

/// Magnitude below which a projection term counts as absent.
pub const TERM_TOL: f64 = 1e-12;

/// One term `W_J`, stored as a row-major array over the atoms of `J`.
#[derive(Clone, Debug)]
pub struct HoeffdingTerm {
    pub subset: Vec<usize>,
    pub data: Vec<f64>,
}

impl HoeffdingTerm {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `X = sum_J W_J` with `E[W_J | F_K] = 0` whenever `J` is not inside `K`.
#[derive(Clone, Debug)]
pub struct HoeffdingDecomposition {
    space: Arc<OutcomeSpace>,
    /// All `2^n` terms, ordered by size and then lexicographically.
    terms: Vec<HoeffdingTerm>,
}

/// Splits `X` into its Hoeffding terms.
///
/// Coordinates are peeled off one at a time: every partial term is split
/// into its average over the next coordinate and the residual.
pub fn project(x: &RandomFunctional) -> HoeffdingDecomposition {
    let space = x.space().clone();
    let n = space.n();
    let sizes = space.sizes();
    let mut parts = vec![HoeffdingTerm {
        subset: Vec::new(),
        data: x.values().to_vec(),
    }];
    for k in 0..n {
        let m = sizes[k];
        let inner: usize = sizes[k + 1..].iter().product();
        let w = space.law(k).probs();
        let mut next = Vec::with_capacity(parts.len() * 2);
        for part in parts {
            let outer = part.data.len() / (m * inner);
            let mut mean = vec![0.0; outer * inner];
            for o in 0..outer {
                for i in 0..inner {
                    mean[o * inner + i] = (0..m)
                        .map(|t| w[t] * part.data[(o * m + t) * inner + i])
                        .sum();
                }
            }
            let mut resid = part.data;
            for o in 0..outer {
                for t in 0..m {
                    for i in 0..inner {
                        resid[(o * m + t) * inner + i] -= mean[o * inner + i];
                    }
                }
            }
            let mut with_k = part.subset.clone();
            with_k.push(k);
            next.push(HoeffdingTerm {
                subset: part.subset,
                data: mean,
            });
            next.push(HoeffdingTerm {
                subset: with_k,
                data: resid,
            });
        }
        parts = next;
    }
    parts.sort_by(|a, b| (a.subset.len(), &a.subset).cmp(&(b.subset.len(), &b.subset)));
    HoeffdingDecomposition {
        space,
        terms: parts,
    }
}

impl HoeffdingDecomposition {
    pub fn space(&self) -> &Arc<OutcomeSpace> {
        &self.space
    }

    pub fn terms(&self) -> &[HoeffdingTerm] {
        &self.terms
    }

    pub fn term(&self, subset: &[usize]) -> Option<&HoeffdingTerm> {
        self.terms.iter().find(|t| t.subset == subset)
    }

    /// Terms with some entry above [`TERM_TOL`].
    pub fn nonzero_terms(&self) -> impl Iterator<Item = &HoeffdingTerm> {
        self.terms.iter().filter(|t| t.max_abs() > TERM_TOL)
    }

    /// `W_∅ = E[X]`.
    pub fn mean(&self) -> f64 {
        self.terms[0].data[0]
    }

    pub fn max_order(&self) -> usize {
        self.nonzero_terms()
            .map(|t| t.subset.len())
            .max()
            .unwrap_or(0)
    }

    /// Orders of all nonzero terms of positive order.
    pub fn orders(&self) -> Vec<usize> {
        let mut o: Vec<usize> = self
            .nonzero_terms()
            .map(|t| t.subset.len())
            .filter(|&d| d > 0)
            .collect();
        o.sort_unstable();
        o.dedup();
        o
    }

    /// `W_J` as a functional on the full space.
    pub fn functional_of(&self, term: &HoeffdingTerm) -> RandomFunctional {
        let sp = &self.space;
        let sizes = sp.sizes();
        let mut atoms = vec![0; sp.n()];
        let values = (0..sp.len())
            .map(|idx| {
                for (k, a) in atoms.iter_mut().enumerate() {
                    *a = sp.atom(idx, k);
                }
                term.data[compact_index(sizes, &term.subset, &atoms)]
            })
            .collect();
        RandomFunctional::new(sp.clone(), values).expect("finite by construction")
    }

    /// Sum of the terms of the given order.
    pub fn grade(&self, d: usize) -> RandomFunctional {
        let sp = &self.space;
        let mut out = vec![0.0; sp.len()];
        for t in self.terms.iter().filter(|t| t.subset.len() == d) {
            accumulate(sp, t, &mut out);
        }
        RandomFunctional::new(sp.clone(), out).expect("finite by construction")
    }

    pub fn reconstruct(&self) -> RandomFunctional {
        let sp = &self.space;
        let mut out = vec![0.0; sp.len()];
        for t in &self.terms {
            accumulate(sp, t, &mut out);
        }
        RandomFunctional::new(sp.clone(), out).expect("finite by construction")
    }

    /// `E[W_J^2]`.
    pub fn second_moment(&self, term: &HoeffdingTerm) -> f64 {
        let w = cell_weights(&self.space, &term.subset);
        w.iter().zip(&term.data).map(|(p, v)| p * v * v).sum()
    }
}

fn accumulate(sp: &OutcomeSpace, t: &HoeffdingTerm, out: &mut [f64]) {
    let sizes = sp.sizes();
    debug_assert_eq!(t.data.len(), compact_len(sizes, &t.subset));
    for (idx, o) in out.iter_mut().enumerate() {
        let off = t
            .subset
            .iter()
            .fold(0, |acc, &k| acc * sizes[k] + sp.atom(idx, k));
        *o += t.data[off];
    }
}

/// The three families of conditional moment sums in the general Hoeffding
/// rate, and the square root of their total.
#[derive(Clone, Debug, Serialize)]
pub struct HoeffdingRate {
    /// `sum_{J,l} E[(sum_{|K|=l} E[W_{J∪K}^2 | F_J])^2]`, `l >= 0`.
    pub squares: f64,
    /// `sum_{J1,J2,l} E[(sum_{|K|=l} E[W_{J1∪K} W_{J2∪K} | F_{J1∪J2}])^2]`
    /// over ordered disjoint pairs of equal size, `l >= 1`.
    pub pairs: f64,
    /// `sum_{J,l} E[(sum_{|K|=l} E[W_K W_{J∪K} | F_J])^2]`, `l >= 1`.
    pub mixed: f64,
    pub rate: f64,
    /// True when the input was centered or rescaled to unit variance.
    pub normalized: bool,
}

/// Constant-free rate for a general Hoeffding decomposition.
///
/// `J`, `J1`, `J2` range over nonempty coordinate sets and `K` over sets
/// disjoint from them. The outer square is taken separately for each size
/// `l` of `K`. The functional is centered and scaled to unit variance first.
pub fn hoeffding_rate(h: &HoeffdingDecomposition) -> Result<HoeffdingRate> {
    let sp = h.space().clone();
    let var: f64 = h
        .terms()
        .iter()
        .filter(|t| !t.subset.is_empty())
        .map(|t| h.second_moment(t))
        .sum();
    if var <= 0.0 {
        return Err(Error::DegenerateVariance("functional is constant".into()));
    }
    let normalized = (var - 1.0).abs() > 1e-10 || h.mean().abs() > 1e-10;
    let scale = 1.0 / var.sqrt();
    let terms: Vec<(u64, Vec<f64>)> = h
        .nonzero_terms()
        .filter(|t| !t.subset.is_empty())
        .map(|t| {
            (
                mask(&t.subset),
                h.functional_of(t).scale(scale).into_values(),
            )
        })
        .collect();
    let find = |m: u64| terms.iter().find(|t| t.0 == m).map(|t| t.1.as_slice());
    let top = terms.iter().map(|t| t.0.count_ones()).max().unwrap_or(0) as usize;

    // Conditional expectation onto the coordinates in `keep`.
    let condition = |v: Vec<f64>, keep: u64| -> Vec<f64> {
        (0..sp.n())
            .filter(|k| keep & (1 << k) == 0)
            .fold(v, |acc, k| sp.expect_axis(&acc, k))
    };
    let product =
        |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
    let sum_squares = |groups: Vec<Option<Vec<f64>>>| -> f64 {
        groups
            .into_iter()
            .flatten()
            .map(|g| sp.expect(&product(&g, &g)))
            .sum()
    };
    let add_to = |slot: &mut Option<Vec<f64>>, v: Vec<f64>| match slot {
        Some(acc) => acc.iter_mut().zip(v).for_each(|(a, b)| *a += b),
        None => *slot = Some(v),
    };

    let full = (1u64 << sp.n()) - 1;
    let j_sets: Vec<u64> = (1..=full)
        .filter(|j| (j.count_ones() as usize) <= top)
        .collect();

    let mut squares = 0.0;
    let mut mixed = 0.0;
    for &j in &j_sets {
        let mut by_l: Vec<Option<Vec<f64>>> = vec![None; top + 1];
        let mut cross_l: Vec<Option<Vec<f64>>> = vec![None; top + 1];
        for (m, w) in &terms {
            if m & j != j {
                continue;
            }
            let k = m & !j;
            let l = k.count_ones() as usize;
            add_to(&mut by_l[l], condition(product(w, w), j));
            if k != 0 {
                if let Some(wk) = find(k) {
                    add_to(&mut cross_l[l], condition(product(wk, w), j));
                }
            }
        }
        squares += sum_squares(by_l);
        mixed += sum_squares(cross_l);
    }

    let mut pairs = 0.0;
    for &j1 in &j_sets {
        for &j2 in &j_sets {
            if j1 & j2 != 0 || j1.count_ones() != j2.count_ones() {
                continue;
            }
            let u = j1 | j2;
            let mut by_l: Vec<Option<Vec<f64>>> = vec![None; top + 1];
            for (m1, w1) in &terms {
                if m1 & j1 != j1 {
                    continue;
                }
                let k = m1 & !j1;
                if k == 0 || k & u != 0 {
                    continue;
                }
                if let Some(w2) = find(j2 | k) {
                    add_to(
                        &mut by_l[k.count_ones() as usize],
                        condition(product(w1, w2), u),
                    );
                }
            }
            pairs += sum_squares(by_l);
        }
    }
    Ok(HoeffdingRate {
        squares,
        pairs,
        mixed,
        rate: (squares + pairs + mixed).sqrt(),
        normalized,
    })
}

fn mask(subset: &[usize]) -> u64 {
    subset.iter().fold(0, |m, &k| m | (1 << k))
}

/// Terms of the certified bound for a degenerate U-statistic of pure order.
#[derive(Clone, Debug, Serialize)]
pub struct DegenerateRate {
    pub var_term: f64,
    pub fourth_term: f64,
    /// `sqrt(var_term) + 24 * sqrt(2 * fourth_term)`.
    pub bound: f64,
}

/// With `D_k = W - E[W | all coordinates but k]`:
/// `var_term = Var[sum_k E[D_k^2 | all but k]]` and
/// `fourth_term = sum_k E[D_k^4]`.
///
/// The input must have only terms of a single positive order. It is used
/// as given; callers wanting the certified bound pass a unit-variance `W`.
pub fn rate_degenerate(h: &HoeffdingDecomposition) -> Result<DegenerateRate> {
    let orders = h.orders();
    if orders.len() > 1 || h.mean().abs() > TERM_TOL {
        return Err(Error::Domain(format!(
            "expected a single pure order, found orders {orders:?} and mean {}",
            h.mean()
        )));
    }
    let w = h.reconstruct();
    Ok(degenerate_terms(&w))
}

pub(crate) fn degenerate_terms(w: &RandomFunctional) -> DegenerateRate {
    let sp = w.space();
    let mut cond_sq = vec![0.0; sp.len()];
    let mut fourth = 0.0;
    for k in 0..sp.n() {
        let e = sp.expect_axis(w.values(), k);
        let d: Vec<f64> = w.values().iter().zip(&e).map(|(a, b)| a - b).collect();
        let d2: Vec<f64> = d.iter().map(|x| x * x).collect();
        let d4: Vec<f64> = d2.iter().map(|x| x * x).collect();
        fourth += sp.expect(&d4);
        for (a, b) in cond_sq.iter_mut().zip(sp.expect_axis(&d2, k)) {
            *a += b;
        }
    }
    let m = sp.expect(&cond_sq);
    let var = sp
        .expect(
            &cond_sq
                .iter()
                .map(|x| (x - m) * (x - m))
                .collect::<Vec<_>>(),
        )
        .max(0.0);
    DegenerateRate {
        var_term: var,
        fourth_term: fourth,
        bound: var.sqrt() + 24.0 * (2.0 * fourth).sqrt(),
    }
}
