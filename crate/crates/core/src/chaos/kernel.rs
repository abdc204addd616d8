use std::collections::BTreeMap;
use std::sync::Arc;

use super::functional::RandomFunctional;
use super::space::OutcomeSpace;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Admission tolerance for the canonical (degenerate) condition.
pub const DEGENERACY_TOL: f64 = 1e-10;

pub(crate) fn factorial(d: usize) -> f64 {
    (1..=d).map(|i| i as f64).product()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Number of cells of a row-major array over the listed coordinates.
pub(crate) fn compact_len(sizes: &[usize], coords: &[usize]) -> usize {
    coords.iter().map(|&c| sizes[c]).product()
}

/// Row-major offset of the cell picked out by full outcome `atoms`.
pub(crate) fn compact_index(sizes: &[usize], coords: &[usize], atoms: &[usize]) -> usize {
    coords.iter().fold(0, |acc, &c| acc * sizes[c] + atoms[c])
}

/// Centers slot `slot` of a row-major array against `weights`.
pub(crate) fn center_slot(data: &mut [f64], dims: &[usize], slot: usize, weights: &[f64]) {
    let m = dims[slot];
    let inner: usize = dims[slot + 1..].iter().product();
    for outer in (0..data.len()).step_by(m * inner) {
        for i in 0..inner {
            let base = outer + i;
            let mean: f64 = (0..m).map(|t| weights[t] * data[base + t * inner]).sum();
            for t in 0..m {
                data[base + t * inner] -= mean;
            }
        }
    }
}

/// Largest slot mean `|sum_s nu(s) f(.., s, ..)|` of a row-major array.
pub(crate) fn slot_violation(data: &[f64], dims: &[usize], slot: usize, weights: &[f64]) -> f64 {
    let m = dims[slot];
    let inner: usize = dims[slot + 1..].iter().product();
    let mut worst: f64 = 0.0;
    for outer in (0..data.len()).step_by(m * inner) {
        for i in 0..inner {
            let base = outer + i;
            let mean: f64 = (0..m).map(|t| weights[t] * data[base + t * inner]).sum();
            worst = worst.max(mean.abs());
        }
    }
    worst
}

/// Canonical symmetric kernel of order `d`, stored per sorted `d`-subset of
/// coordinates as a row-major array over the atoms of those coordinates.
/// Missing subsets are zero.
#[derive(Clone, Debug)]
pub struct ChaosKernel {
    space: Arc<OutcomeSpace>,
    order: usize,
    entries: BTreeMap<Vec<usize>, Vec<f64>>,
}

impl ChaosKernel {
    pub fn zero(space: &Arc<OutcomeSpace>, order: usize) -> Self {
        Self {
            space: space.clone(),
            order,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a kernel and rejects entries that are not canonical.
    pub fn new(
        space: &Arc<OutcomeSpace>,
        order: usize,
        entries: Vec<(Vec<usize>, Vec<f64>)>,
    ) -> Result<Self> {
        let k = Self::unchecked(space, order, entries)?;
        let v = k.degeneracy_violation();
        if v > DEGENERACY_TOL {
            return Err(Error::Domain(format!(
                "kernel is not canonical: slot mean {v:.3e} exceeds {DEGENERACY_TOL:e}"
            )));
        }
        Ok(k)
    }

    /// Builds a kernel and projects every entry onto its canonical part.
    pub fn canonicalized(
        space: &Arc<OutcomeSpace>,
        order: usize,
        entries: Vec<(Vec<usize>, Vec<f64>)>,
    ) -> Result<Self> {
        let mut k = Self::unchecked(space, order, entries)?;
        k.canonicalize();
        Ok(k)
    }

    /// Validates shapes only.
    pub fn unchecked(
        space: &Arc<OutcomeSpace>,
        order: usize,
        entries: Vec<(Vec<usize>, Vec<f64>)>,
    ) -> Result<Self> {
        let n = space.n();
        if order > n {
            return Err(Error::Argument(format!(
                "order {order} exceeds coordinate count {n}"
            )));
        }
        let mut map = BTreeMap::new();
        for (subset, data) in entries {
            if subset.len() != order {
                return Err(Error::Argument(format!(
                    "subset {subset:?} does not have {order} elements"
                )));
            }
            if subset.windows(2).any(|w| w[0] >= w[1]) || subset.iter().any(|&c| c >= n) {
                return Err(Error::Argument(format!(
                    "subset {subset:?} must be strictly increasing below {n}"
                )));
            }
            let len = compact_len(space.sizes(), &subset);
            if data.len() != len {
                return Err(Error::Argument(format!(
                    "subset {subset:?} needs {len} entries, got {}",
                    data.len()
                )));
            }
            if data.iter().any(|x| !x.is_finite()) {
                return Err(Error::Input("non-finite kernel entry".into()));
            }
            if map.insert(subset.clone(), data).is_some() {
                return Err(Error::Argument(format!("subset {subset:?} repeated")));
            }
        }
        Ok(Self {
            space: space.clone(),
            order,
            entries: map,
        })
    }

    /// Random canonical kernel with entries on every subset.
    pub fn random(space: &Arc<OutcomeSpace>, order: usize, rng: &mut RngStream) -> Self {
        let sizes = space.sizes();
        let entries = subsets(space.n(), order)
            .into_iter()
            .map(|s| {
                let len = compact_len(sizes, &s);
                let data = (0..len).map(|_| 2.0 * rng.uniform() - 1.0).collect();
                (s, data)
            })
            .collect();
        Self::canonicalized(space, order, entries).expect("shapes are valid")
    }

    pub fn space(&self) -> &Arc<OutcomeSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, &Vec<f64>)> {
        self.entries.iter()
    }

    pub fn entry(&self, subset: &[usize]) -> Option<&[f64]> {
        self.entries.get(subset).map(Vec::as_slice)
    }

    fn dims(&self, subset: &[usize]) -> Vec<usize> {
        subset.iter().map(|&c| self.space.sizes()[c]).collect()
    }

    /// Per-slot centering against the coordinate laws.
    pub fn canonicalize(&mut self) {
        let space = self.space.clone();
        for (subset, data) in self.entries.iter_mut() {
            let dims: Vec<usize> = subset.iter().map(|&c| space.sizes()[c]).collect();
            for (slot, &c) in subset.iter().enumerate() {
                center_slot(data, &dims, slot, space.law(c).probs());
            }
        }
    }

    /// Largest slot mean over all subsets and slots.
    pub fn degeneracy_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (subset, data) in &self.entries {
            let dims = self.dims(subset);
            for (slot, &c) in subset.iter().enumerate() {
                worst = worst.max(slot_violation(data, &dims, slot, self.space.law(c).probs()));
            }
        }
        worst
    }

    /// `f_J` at the given atoms of the coordinates of `J`, listed in the
    /// order of `J`.
    pub fn at(&self, subset: &[usize], atoms: &[usize]) -> f64 {
        match self.entries.get(subset) {
            None => 0.0,
            Some(data) => {
                let sizes = self.space.sizes();
                let off = subset
                    .iter()
                    .zip(atoms)
                    .fold(0, |acc, (&c, &a)| acc * sizes[c] + a);
                data[off]
            }
        }
    }

    /// The symmetric kernel on an ordered tuple of `(coordinate, atom)`
    /// arguments; zero unless the coordinates are distinct.
    pub fn eval_args(&self, args: &[(usize, usize)]) -> f64 {
        debug_assert_eq!(args.len(), self.order);
        let mut sorted = args.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return 0.0;
        }
        let subset: Vec<usize> = sorted.iter().map(|a| a.0).collect();
        let atoms: Vec<usize> = sorted.iter().map(|a| a.1).collect();
        self.at(&subset, &atoms)
    }

    /// `I_d(f)` at an outcome given by its atom indices:
    /// `d! * sum_J f_J(omega_J)`.
    pub fn integral_eval(&self, atoms: &[usize]) -> f64 {
        let sizes = self.space.sizes();
        let s: f64 = self
            .entries
            .iter()
            .map(|(subset, data)| data[compact_index(sizes, subset, atoms)])
            .sum();
        factorial(self.order) * s
    }

    /// `I_d(f)` as a functional.
    pub fn integral(&self) -> RandomFunctional {
        let sp = &self.space;
        let sizes = sp.sizes();
        let mut out = vec![0.0; sp.len()];
        let c = factorial(self.order);
        for (subset, data) in &self.entries {
            for (idx, o) in out.iter_mut().enumerate() {
                let off = subset
                    .iter()
                    .fold(0, |acc, &k| acc * sizes[k] + sp.atom(idx, k));
                *o += c * data[off];
            }
        }
        RandomFunctional::from_raw(sp.clone(), out)
    }

    /// `<f, g>` over ordered argument tuples with the probability measure on
    /// each argument: `d! * sum_J E[f_J g_J]`.
    pub fn inner(&self, other: &Self) -> f64 {
        if self.order != other.order {
            return 0.0;
        }
        let mut s = 0.0;
        for (subset, a) in &self.entries {
            if let Some(b) = other.entries.get(subset) {
                s += self.weighted_sum(subset, |i| a[i] * b[i]);
            }
        }
        factorial(self.order) * s
    }

    pub fn norm2(&self) -> f64 {
        self.inner(self)
    }

    /// `sum_i P(cell i) * h(i)` over the cells of subset `J`.
    fn weighted_sum(&self, subset: &[usize], h: impl Fn(usize) -> f64) -> f64 {
        let w = cell_weights(&self.space, subset);
        w.iter().enumerate().map(|(i, p)| p * h(i)).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut k = self.clone();
        for d in k.entries.values_mut() {
            d.iter_mut().for_each(|x| *x *= c);
        }
        k
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.entries.values().flatten().all(|x| x.abs() <= tol)
    }

    pub(crate) fn insert(&mut self, subset: Vec<usize>, data: Vec<f64>) {
        self.entries.insert(subset, data);
    }
}

/// Product probabilities of the cells of a row-major array over `subset`.
pub(crate) fn cell_weights(space: &OutcomeSpace, subset: &[usize]) -> Vec<f64> {
    let mut w = vec![1.0];
    for &c in subset {
        let p = space.law(c).probs();
        w = w
            .iter()
            .flat_map(|&a| p.iter().map(move |&b| a * b))
            .collect();
    }
    w
}

/// All sorted `d`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(d);
    fn rec(start: usize, n: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < d - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, d, cur, out);
            cur.pop();
        }
    }
    rec(0, n, d, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Distribution;

    #[test]
    fn subsets_enumeration() {
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(subsets(3, 3), vec![vec![0, 1, 2]]);
        assert!(subsets(2, 3).is_empty());
    }

    #[test]
    fn single_coordinate_integral_is_the_coordinate() {
        let law = Distribution::three_point();
        let sp = OutcomeSpace::iid(&law, 2).unwrap();
        let f = ChaosKernel::new(&sp, 1, vec![(vec![1], law.values().to_vec())]).unwrap();
        let x = f.integral();
        let x1 = RandomFunctional::coordinate(&sp, 1);
        assert_eq!(x.max_abs_diff(&x1), 0.0);
    }

    #[test]
    fn zero_kernel_integrates_to_zero() {
        let sp = OutcomeSpace::iid(&Distribution::rademacher(), 3).unwrap();
        let f = ChaosKernel::zero(&sp, 2);
        assert!(f.integral().values().iter().all(|&v| v == 0.0));
        assert_eq!(f.integral_eval(&[0, 1, 0]), 0.0);
    }

    #[test]
    fn rejects_non_canonical() {
        let sp = OutcomeSpace::iid(&Distribution::rademacher(), 2).unwrap();
        let r = ChaosKernel::new(&sp, 1, vec![(vec![0], vec![1.0, 1.0])]);
        assert!(matches!(r, Err(Error::Domain(_))));
        let k = ChaosKernel::canonicalized(&sp, 1, vec![(vec![0], vec![1.0, 3.0])]).unwrap();
        assert_eq!(k.entry(&[0]).unwrap(), &[-1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_shapes() {
        let sp = OutcomeSpace::iid(&Distribution::rademacher(), 2).unwrap();
        assert!(ChaosKernel::new(&sp, 2, vec![(vec![1, 0], vec![0.0; 4])]).is_err());
        assert!(ChaosKernel::new(&sp, 2, vec![(vec![0, 1], vec![0.0; 3])]).is_err());
        assert!(ChaosKernel::new(&sp, 3, vec![]).is_err());
    }

    #[test]
    fn isometry_on_second_order_kernel() {
        let sp = OutcomeSpace::iid(&Distribution::three_point(), 3).unwrap();
        let mut rng = RngStream::new(8, 0);
        let f = ChaosKernel::random(&sp, 2, &mut rng);
        let x = f.integral();
        assert!(x.mean().abs() < 1e-12);
        assert!((x.moment(2) - 2.0 * f.norm2()).abs() < 1e-12);
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let sp = OutcomeSpace::iid(&Distribution::three_point(), 3).unwrap();
        let mut rng = RngStream::new(1, 1);
        let f = ChaosKernel::random(&sp, 3, &mut rng);
        let mut g = f.clone();
        g.canonicalize();
        for (s, a) in f.entries() {
            let b = g.entry(s).unwrap();
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15));
        }
    }
}
