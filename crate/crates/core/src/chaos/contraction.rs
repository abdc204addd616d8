use super::kernel::{binomial, factorial, subsets, ChaosKernel};
use super::operators::ChaosDecomposition;
use crate::error::{Error, Result};

/// Largest dense contraction table, in cells.
const MAX_CELLS: usize = 1 << 24;

/// Unsymmetrized contraction `f ⋆_k^l g` as a dense table.
///
/// An argument is a `(coordinate, atom)` pair; pairs are numbered
/// coordinate-major, so with `S` pairs in total the table has `S^p` cells
/// for output arity `p = order(f) + order(g) - k - l`. Output arguments are
/// the `k - l` shared slots, then the free slots of `f`, then those of `g`.
#[derive(Clone, Debug)]
pub struct Contraction {
    arity: usize,
    pairs: Vec<(usize, usize)>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl Contraction {
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Value at an output tuple of pair numbers.
    pub fn value(&self, args: &[usize]) -> f64 {
        let s = self.pairs.len();
        self.values[args.iter().fold(0, |acc, &a| acc * s + a)]
    }

    /// Squared norm: every output argument ranges over all coordinates and
    /// atoms with the probability measure, coinciding coordinates included.
    pub fn norm2(&self) -> f64 {
        let s = self.pairs.len();
        let mut total = 0.0;
        let mut digits = vec![0; self.arity];
        for v in &self.values {
            let w: f64 = digits.iter().map(|&a| self.weights[a]).product();
            total += w * v * v;
            advance(&mut digits, s);
        }
        total
    }

    fn pair_number(&self, coord: usize, atom: usize) -> usize {
        self.pairs
            .iter()
            .position(|&p| p == (coord, atom))
            .expect("pair exists")
    }
}

fn advance(digits: &mut [usize], base: usize) {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return;
        }
        *d = 0;
    }
}

pub fn contract(f: &ChaosKernel, g: &ChaosKernel, k: usize, l: usize) -> Result<Contraction> {
    let (a, b) = (f.order(), g.order());
    if l > k || k > a.min(b) {
        return Err(Error::Argument(format!(
            "contraction needs 0 <= l <= k <= min(orders); got k={k}, l={l}, orders {a}, {b}"
        )));
    }
    if f.space().laws() != g.space().laws() {
        return Err(Error::Argument("kernels live on different spaces".into()));
    }
    let sp = f.space();
    let pairs: Vec<(usize, usize)> = (0..sp.n())
        .flat_map(|c| (0..sp.sizes()[c]).map(move |t| (c, t)))
        .collect();
    let weights: Vec<f64> = pairs.iter().map(|&(c, t)| sp.law(c).probs()[t]).collect();
    let s = pairs.len();
    let p = a + b - k - l;
    let cells = (s as u128).pow(p as u32);
    if cells > MAX_CELLS as u128 {
        return Err(Error::Argument(format!(
            "contraction table with {cells} cells is too large"
        )));
    }
    let (shared, free_f) = (k - l, a - k);
    let mut values = vec![0.0; cells as usize];
    let mut out = vec![0; p];
    let mut fa = vec![(0, 0); a];
    let mut ga = vec![(0, 0); b];
    let mut x = vec![0; l];
    for v in values.iter_mut() {
        for i in 0..shared {
            fa[l + i] = pairs[out[i]];
            ga[l + i] = pairs[out[i]];
        }
        for i in 0..free_f {
            fa[k + i] = pairs[out[shared + i]];
        }
        for i in 0..b - k {
            ga[k + i] = pairs[out[shared + free_f + i]];
        }
        let mut acc = 0.0;
        x.iter_mut().for_each(|d| *d = 0);
        for _ in 0..s.pow(l as u32) {
            let mut w = 1.0;
            for (i, &xi) in x.iter().enumerate() {
                fa[i] = pairs[xi];
                ga[i] = pairs[xi];
                w *= weights[xi];
            }
            let fv = f.eval_args(&fa);
            if fv != 0.0 {
                acc += w * fv * g.eval_args(&ga);
            }
            advance(&mut x, s);
        }
        *v = acc;
        advance(&mut out, s);
    }
    Ok(Contraction {
        arity: p,
        pairs,
        weights,
        values,
    })
}

pub fn contraction_norm2(f: &ChaosKernel, g: &ChaosKernel, k: usize, l: usize) -> Result<f64> {
    Ok(contract(f, g, k, l)?.norm2())
}

/// Symmetrization of `f ⋆_k^l g` restricted to distinct coordinates,
/// projected onto its canonical part. Arity above the coordinate count
/// yields a zero kernel of that order, and arity zero a zero-order kernel
/// is not representable, so the scalar is returned separately.
pub fn symmetrized_contraction(
    f: &ChaosKernel,
    g: &ChaosKernel,
    k: usize,
    l: usize,
) -> Result<(Option<ChaosKernel>, f64)> {
    let sp = f.space();
    let p = f.order() + g.order() - k - l;
    if p == 0 {
        let h = contract(f, g, k, l)?;
        return Ok((None, h.value(&[])));
    }
    if p > sp.n() {
        return Ok((None, 0.0));
    }
    let h = contract(f, g, k, l)?;
    let perms = permutations(p);
    let inv = 1.0 / perms.len() as f64;
    let mut entries = Vec::new();
    for subset in subsets(sp.n(), p) {
        let dims: Vec<usize> = subset.iter().map(|&c| sp.sizes()[c]).collect();
        let len: usize = dims.iter().product();
        let mut data = vec![0.0; len];
        let mut atoms = vec![0; p];
        for cell in data.iter_mut() {
            let nums: Vec<usize> = subset
                .iter()
                .zip(&atoms)
                .map(|(&c, &t)| h.pair_number(c, t))
                .collect();
            let mut args = vec![0; p];
            let mut s = 0.0;
            for perm in &perms {
                for (slot, &src) in perm.iter().enumerate() {
                    args[slot] = nums[src];
                }
                s += h.value(&args);
            }
            *cell = s * inv;
            for i in (0..p).rev() {
                atoms[i] += 1;
                if atoms[i] < dims[i] {
                    break;
                }
                atoms[i] = 0;
            }
        }
        entries.push((subset, data));
    }
    Ok((Some(ChaosKernel::canonicalized(sp, p, entries)?), 0.0))
}

fn permutations(p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..p).collect();
    fn rec(i: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for j in i..cur.len() {
            cur.swap(i, j);
            rec(i + 1, cur, out);
            cur.swap(i, j);
        }
    }
    rec(0, &mut cur, &mut out);
    out
}

/// Chaos decomposition of `I_a(f) I_b(g)` from the product formula
/// `sum_k k! C(a,k) C(b,k) sum_{i<=k} C(k,i) I_{a+b-k-i}(sym f ⋆_k^i g)`.
pub fn multiply(f: &ChaosKernel, g: &ChaosKernel) -> Result<ChaosDecomposition> {
    let sp = f.space();
    let (a, b) = (f.order(), g.order());
    let mut kernels: Vec<ChaosKernel> = (1..=sp.n()).map(|d| ChaosKernel::zero(sp, d)).collect();
    let mut mean = 0.0;
    for k in 0..=a.min(b) {
        let ck = factorial(k) * binomial(a, k) * binomial(b, k);
        for i in 0..=k {
            let c = ck * binomial(k, i);
            let (kernel, scalar) = symmetrized_contraction(f, g, k, i)?;
            mean += c * scalar;
            if let Some(h) = kernel {
                let target = &mut kernels[h.order() - 1];
                for (subset, data) in h.entries() {
                    let mut cur = target
                        .entry(subset)
                        .map(<[f64]>::to_vec)
                        .unwrap_or_else(|| vec![0.0; data.len()]);
                    cur.iter_mut().zip(data).for_each(|(x, y)| *x += c * y);
                    target.insert(subset.clone(), cur);
                }
            }
        }
    }
    Ok(ChaosDecomposition { mean, kernels })
}
