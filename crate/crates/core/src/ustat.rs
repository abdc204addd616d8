//! Degenerate weighted U-statistics
//! `U = C(n,d)^{-1} sum_{k_1<...<k_d} w(k) g(X_{k_1}, ..., X_{k_d})`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::chaos::kernel::binomial;
use crate::chaos::subsets;
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Tolerance for the slot-mean condition on `g`.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Largest dense weight array used by [`ustat_rate`].
const MAX_DENSE: usize = 1 << 24;

/// Symmetric weights vanishing on diagonals, stored per sorted subset.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor {
    n: usize,
    d: usize,
    values: BTreeMap<Vec<usize>, f64>,
}

impl WeightTensor {
    pub fn new(n: usize, d: usize, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if d == 0 || d > n {
            return Err(Error::Argument(format!(
                "need 1 <= d <= n, got d={d}, n={n}"
            )));
        }
        let mut values = BTreeMap::new();
        for (mut s, v) in entries {
            if !v.is_finite() {
                return Err(Error::Input("non-finite weight".into()));
            }
            s.sort_unstable();
            if s.len() != d || s.windows(2).any(|w| w[0] == w[1]) || s.iter().any(|&k| k >= n) {
                return Err(Error::Input(format!(
                    "weight index {s:?} must be {d} distinct coordinates below {n}"
                )));
            }
            if values.insert(s.clone(), v).is_some() {
                return Err(Error::Input(format!("weight index {s:?} repeated")));
            }
        }
        let w = Self { n, d, values };
        if w.sum_squares() <= 0.0 {
            return Err(Error::DegenerateVariance("all weights vanish".into()));
        }
        Ok(w)
    }

    /// Weights `f(J)` on every sorted subset `J`.
    pub fn from_fn(n: usize, d: usize, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let entries = subsets(n, d)
            .into_iter()
            .map(|s| {
                let v = f(&s);
                (s, v)
            })
            .collect();
        Self::new(n, d, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, &f64)> {
        self.values.iter()
    }

    /// Weight of any index tuple; zero when indices repeat.
    pub fn get(&self, idx: &[usize]) -> f64 {
        let mut s = idx.to_vec();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return 0.0;
        }
        self.values.get(&s).copied().unwrap_or(0.0)
    }

    /// Sum of squares over sorted subsets.
    pub fn sum_squares(&self) -> f64 {
        self.values.values().map(|v| v * v).sum()
    }

    /// Weights relabeled by `perm`: coordinate `k` becomes `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let entries = self
            .values
            .iter()
            .map(|(s, &v)| (s.iter().map(|&k| perm[k]).collect(), v))
            .collect();
        Self::new(self.n, self.d, entries)
    }

    /// Dense array over all ordered tuples in `[n]^d`, row-major.
    fn dense(&self) -> Result<Vec<f64>> {
        let cells = (self.n as u128).pow(self.d as u32);
        if cells > MAX_DENSE as u128 {
            return Err(Error::Argument(format!(
                "dense weight array with {cells} cells is too large"
            )));
        }
        let mut out = vec![0.0; cells as usize];
        let perms = permutations(self.d);
        for (s, &v) in &self.values {
            for p in &perms {
                let off = p.iter().fold(0, |acc, &i| acc * self.n + s[i]);
                out[off] = v;
            }
        }
        Ok(out)
    }
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

/// Kernel `g` tabulated on the atoms of `nu`, row-major over `d` slots.
#[derive(Clone, Debug, PartialEq)]
pub struct UKernel {
    law: Distribution,
    d: usize,
    table: Vec<f64>,
}

impl UKernel {
    /// Checks that every slot mean vanishes.
    pub fn new(law: &Distribution, d: usize, table: Vec<f64>) -> Result<Self> {
        let m = law.len();
        if d == 0 {
            return Err(Error::Argument("kernel order must be positive".into()));
        }
        let expected = m.checked_pow(d as u32).unwrap_or(usize::MAX);
        if table.len() != expected {
            return Err(Error::Input(format!(
                "kernel table needs {expected} entries, got {}",
                table.len()
            )));
        }
        if table.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite kernel entry".into()));
        }
        let k = Self {
            law: law.clone(),
            d,
            table,
        };
        let v = k.degeneracy_violation();
        if v > DEGENERACY_TOL {
            return Err(Error::Domain(format!(
                "kernel is not degenerate: largest slot mean {v:.3e}"
            )));
        }
        Ok(k)
    }

    /// `g(x) = f(x_1, ..., x_d)` on atom values.
    pub fn from_fn(law: &Distribution, d: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let m = law.len();
        let mut x = vec![0.0; d];
        let table = (0..m.pow(d as u32))
            .map(|mut cell| {
                for slot in (0..d).rev() {
                    x[slot] = law.values()[cell % m];
                    cell /= m;
                }
                f(&x)
            })
            .collect();
        Self::new(law, d, table)
    }

    /// `g(x) = x_1 ... x_d`; degenerate when the law is centered.
    pub fn product(law: &Distribution, d: usize) -> Result<Self> {
        Self::from_fn(law, d, |x| x.iter().product())
    }

    pub fn law(&self) -> &Distribution {
        &self.law
    }

    pub fn order(&self) -> usize {
        self.d
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn is_symmetric(&self) -> bool {
        let m = self.law.len();
        let d = self.d;
        (0..self.table.len()).all(|cell| {
            let mut idx = digits(cell, m, d);
            idx.sort_unstable();
            let off = idx.iter().fold(0, |acc, &i| acc * m + i);
            (self.table[cell] - self.table[off]).abs() <= 1e-12 * (1.0 + self.table[cell].abs())
        })
    }

    pub fn degeneracy_violation(&self) -> f64 {
        let dims = vec![self.law.len(); self.d];
        (0..self.d)
            .map(|slot| {
                crate::chaos::kernel::slot_violation(&self.table, &dims, slot, self.law.probs())
            })
            .fold(0.0, f64::max)
    }

    /// `E[g^p]` under the product law.
    fn moment(&self, p: i32) -> f64 {
        let m = self.law.len();
        let w = self.law.probs();
        self.table
            .iter()
            .enumerate()
            .map(|(cell, v)| {
                let prob: f64 = digits(cell, m, self.d).iter().map(|&i| w[i]).product();
                prob * v.powi(p)
            })
            .sum()
    }

    /// `|g|_{L^2}^2`.
    pub fn l2_squared(&self) -> f64 {
        self.moment(2)
    }

    /// `|g|_{L^4}^2 = sqrt(E[g^4])`.
    pub fn l4_squared(&self) -> f64 {
        self.moment(4).sqrt()
    }

    /// Value at atom indices.
    pub fn at(&self, atoms: &[usize]) -> f64 {
        let m = self.law.len();
        self.table[atoms.iter().fold(0, |acc, &i| acc * m + i)]
    }

    /// Per-slot centering; idempotent.
    pub fn recentered(&self) -> Self {
        let dims = vec![self.law.len(); self.d];
        let mut t = self.table.clone();
        for slot in 0..self.d {
            crate::chaos::kernel::center_slot(&mut t, &dims, slot, self.law.probs());
        }
        Self {
            law: self.law.clone(),
            d: self.d,
            table: t,
        }
    }
}

fn digits(mut cell: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in (0..len).rev() {
        out[slot] = cell % base;
        cell /= base;
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct UStatRate {
    /// `|g|_{L^4}^2 / |g|_{L^2}^2`.
    pub kernel_ratio: f64,
    /// `sqrt(sum_{k,r} (sum_m w(k,m) w(r,m))^2)` for `l = 1..d-1`.
    pub contractions: Vec<f64>,
    /// `sum` of `w^2` over all ordered tuples.
    pub weight_norm2: f64,
    /// `kernel_ratio * max(contractions) / weight_norm2`.
    pub rate: f64,
}

/// Constant-free rate for `U / sigma`.
pub fn ustat_rate(w: &WeightTensor, g: &UKernel) -> Result<UStatRate> {
    let d = w.order();
    if d < 2 {
        return Err(Error::Argument(
            "the rate needs order at least 2; use the Hoeffding rate for linear statistics".into(),
        ));
    }
    if g.order() != d {
        return Err(Error::Argument(format!(
            "weights have order {d}, kernel has order {}",
            g.order()
        )));
    }
    let v = g.degeneracy_violation();
    if v > DEGENERACY_TOL {
        return Err(Error::Domain(format!(
            "kernel is not degenerate: slot mean {v:.3e}"
        )));
    }
    let l2 = g.l2_squared();
    if l2 <= 0.0 {
        return Err(Error::DegenerateVariance("kernel vanishes".into()));
    }
    let n = w.n();
    let dense = w.dense()?;
    let weight_norm2: f64 = dense.iter().map(|x| x * x).sum();
    let contractions: Vec<f64> = (1..d)
        .map(|l| {
            let rows = n.pow((d - l) as u32);
            let cols = n.pow(l as u32);
            gram_frobenius(&dense, rows, cols)
        })
        .collect();
    let sup = contractions.iter().copied().fold(0.0, f64::max);
    let kernel_ratio = g.l4_squared() / l2;
    Ok(UStatRate {
        kernel_ratio,
        contractions,
        weight_norm2,
        rate: kernel_ratio * sup / weight_norm2,
    })
}

/// `|M M^T|_F` for a row-major `rows x cols` matrix, via the smaller Gram.
fn gram_frobenius(m: &[f64], rows: usize, cols: usize) -> f64 {
    let mut s = 0.0;
    if rows <= cols {
        for a in 0..rows {
            let ra = &m[a * cols..(a + 1) * cols];
            for b in 0..rows {
                let rb = &m[b * cols..(b + 1) * cols];
                let g: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
                s += g * g;
            }
        }
    } else {
        for a in 0..cols {
            for b in 0..cols {
                let g: f64 = (0..rows).map(|r| m[r * cols + a] * m[r * cols + b]).sum();
                s += g * g;
            }
        }
    }
    s.sqrt()
}

/// `Var[U] = C(n,d)^{-2} |g|_{L^2}^2 sum_{sorted} w^2`.
pub fn variance(w: &WeightTensor, g: &UKernel) -> f64 {
    let c = binomial(w.n(), w.order());
    g.l2_squared() * w.sum_squares() / (c * c)
}

/// Value of `U` at given atom indices of `X_1..X_n`.
pub fn ustat_value(w: &WeightTensor, g: &UKernel, atoms: &[usize]) -> f64 {
    let mut buf = vec![0; w.order()];
    let s: f64 = w
        .entries()
        .map(|(s, &v)| {
            for (b, &k) in buf.iter_mut().zip(s) {
                *b = atoms[k];
            }
            v * g.at(&buf)
        })
        .sum();
    s / binomial(w.n(), w.order())
}

/// One draw of `U`.
pub fn ustat_sample(w: &WeightTensor, g: &UKernel, rng: &mut RngStream) -> f64 {
    let atoms: Vec<usize> = (0..w.n()).map(|_| g.law().sample_index(rng)).collect();
    ustat_value(w, g, &atoms)
}
