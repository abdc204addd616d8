//! Quadratic forms `Q = sum_{i≠j} a_ij X_i X_j + sum_i a_ii (X_i^2 - mu_2)`
//! in i.i.d. centered variables.

use serde::Serialize;

use crate::dist::{Distribution, MomentTable};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Tolerance on `|a_ij - a_ji|` when loading a matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Above this size the top eigenvalue comes from power iteration.
pub const JACOBI_MAX: usize = 512;

/// Dense symmetric matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    a: Vec<f64>,
}

impl SymMatrix {
    /// Checks symmetry up to [`SYMMETRY_TOL`] and stores the symmetrized
    /// matrix `(A + A^T) / 2`.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Input(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite matrix entry".into()));
        }
        let mut a = data;
        for i in 0..n {
            for j in 0..i {
                let (x, y) = (a[i * n + j], a[j * n + i]);
                if (x - y).abs() > SYMMETRY_TOL {
                    return Err(Error::Input(format!(
                        "matrix is not symmetric at ({i},{j}): {x} vs {y}"
                    )));
                }
                let m = 0.5 * (x + y);
                a[i * n + j] = m;
                a[j * n + i] = m;
            }
        }
        Ok(Self { n, a })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Input("matrix rows must all have length n".into()));
        }
        Self::new(n, rows.concat())
    }

    /// Builds a symmetric matrix from its upper triangle `f(i, j)`, `i <= j`.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        Self { n, a }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.a
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n: self.n,
            a: self.a.iter().map(|x| c * x).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn has_diagonal(&self) -> bool {
        (0..self.n).any(|i| self.get(i, i) != 0.0)
    }

    /// Same matrix with the diagonal set to zero.
    pub fn off_diagonal(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.a[i * self.n + i] = 0.0;
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                let row = &other.a[k * n..(k + 1) * n];
                for (o, b) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    /// All eigenvalues by cyclic Jacobi rotations, unsorted.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.a.clone();
        let total: f64 = a.iter().map(|x| x * x).sum();
        if total == 0.0 {
            return vec![0.0; n];
        }
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j] * a[i * n + j])
                .sum();
            if off <= 1e-30 * total {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let (app, aqq) = (a[p * n + p], a[q * n + q]);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k * n + p], a[k * n + q]);
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i * n + i]).collect()
    }

    /// Spectral radius `max |lambda|`.
    pub fn spectral_radius(&self) -> f64 {
        if self.n <= JACOBI_MAX {
            self.eigenvalues().iter().fold(0.0, |m, x| m.max(x.abs()))
        } else {
            self.power_iteration()
        }
    }

    /// `sqrt` of the top eigenvalue of `A^2` by power iteration.
    fn power_iteration(&self) -> f64 {
        let n = self.n;
        let apply = |v: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    self.a[i * n..(i + 1) * n]
                        .iter()
                        .zip(v)
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect()
        };
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618).fract()).collect();
        let mut est = 0.0;
        for _ in 0..10_000 {
            let w = apply(&apply(&v));
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w.iter().map(|x| x / norm).collect();
            if (next - est).abs() <= 1e-14 * next {
                est = next;
                break;
            }
            est = next;
        }
        est.sqrt()
    }
}

/// Every scalar used by the quadratic-form bounds.
#[derive(Clone, Debug, Serialize)]
pub struct QFormAnalysis {
    pub n: usize,
    pub moments: MomentTable,
    pub sigma2: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    /// `S1 + 3 S2 + 4 S3 = E[Q^4]`.
    pub eq4: f64,
    pub tr_a4: f64,
    /// Spectral radius.
    pub lambda1: f64,
    /// `max_i sum_j a_ij^2`.
    pub influence: f64,
    /// `sum_i (sum_k a_ik^2)^2`.
    pub row_square_sum: f64,
    pub offdiag2: f64,
    pub diag2: f64,
    /// `diag2 / (offdiag2 + diag2)`.
    pub gamma: f64,
    pub alpha_n: f64,
    pub beta_n: f64,
    pub has_diagonal: bool,
    /// True when `sigma2 == 0`; the rates are then undefined.
    pub degenerate: bool,
}

/// Index sums making up the fourth moment identity.
///
/// `d2`, `d3`, `d4` denote ordered tuples of distinct indices; `b` is the
/// off-diagonal part and `d_i = a_ii`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct FourthMomentSums {
    pub diag4: f64,
    pub off4_upper: f64,
    pub star: f64,
    pub cycle4: f64,
    pub diag_path: f64,
    pub path_square: f64,
    pub diag_pair: f64,
    pub diag_edge: f64,
    pub matching: f64,
    pub diag_diag_edge2: f64,
    pub diag_edge3: f64,
    pub diag2_edge2: f64,
    pub diag_edge_edge2: f64,
    pub diag_triangle: f64,
    pub diag2_diag_edge: f64,
}

impl FourthMomentSums {
    pub fn of(a: &SymMatrix) -> Self {
        let n = a.n();
        let b = a.off_diagonal();
        let d: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
        let bij = |i: usize, j: usize| b.get(i, j);
        let b2 = b.matmul(&b);
        let c: Vec<f64> = (0..n).map(|i| b2[i * n + i]).collect();
        let p: f64 = c.iter().sum();
        let f: f64 = b.data().iter().map(|x| x.powi(4)).sum();
        let sum_c2: f64 = c.iter().map(|x| x * x).sum();
        let tr_b4: f64 = b2.iter().map(|x| x * x).sum();
        let bd: Vec<f64> = (0..n)
            .map(|k| (0..n).map(|i| d[i] * bij(i, k)).sum())
            .collect();

        let mut s = Self {
            diag4: d.iter().map(|x| x.powi(4)).sum(),
            off4_upper: 0.5 * f,
            star: sum_c2 - f,
            cycle4: tr_b4 - 2.0 * sum_c2 + f,
            matching: p * p - 4.0 * sum_c2 + 2.0 * f,
            ..Self::default()
        };
        let d2: f64 = d.iter().map(|x| x * x).sum();
        s.diag_pair = d2 * d2 - d.iter().map(|x| x.powi(4)).sum::<f64>();
        s.diag_edge = (0..n).map(|i| d[i] * d[i] * (p - 2.0 * c[i])).sum();
        let mut diag_path_corr = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = bij(i, j);
                if x == 0.0 {
                    continue;
                }
                diag_path_corr += d[i] * d[i] * x * x;
                s.path_square += x * x * b2[i * n + j];
                s.diag_diag_edge2 += d[i] * d[j] * x * x;
                s.diag_edge3 += d[i] * x.powi(3);
                s.diag_edge_edge2 += d[i] * x * (c[j] - x * x);
                s.diag2_diag_edge += d[i] * d[i] * d[j] * x;
            }
            s.diag2_edge2 += d[i] * d[i] * c[i];
        }
        s.diag_path = bd.iter().map(|x| x * x).sum::<f64>() - diag_path_corr;
        let b3_diag: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|k| b2[i * n + k] * bij(k, i)).sum())
            .collect();
        s.diag_triangle = (0..n).map(|i| d[i] * b3_diag[i]).sum();
        s
    }

    /// `(S1, S2, S3)` for the given moments.
    pub fn combine(&self, m: &MomentTable) -> (f64, f64, f64) {
        let (mu2, mu3, mu4, mu5) = (m.mu[2], m.mu[3], m.mu[4], m.mu[5]);
        let (t4, t6, t8) = (m.mu_tilde4, m.mu_tilde6, m.mu_tilde8);
        let s1 = t8 * self.diag4
            + 16.0 * mu4 * mu4 * self.off4_upper
            + 48.0 * mu2 * mu2 * mu4 * self.star
            + 48.0 * mu2.powi(4) * self.cycle4
            + 48.0 * mu3 * mu3 * mu2 * self.diag_path
            + 96.0 * mu3 * mu3 * mu2 * self.path_square;
        let s2 = t4 * t4 * self.diag_pair
            + 4.0 * t4 * mu2 * mu2 * self.diag_edge
            + 4.0 * mu2.powi(4) * self.matching;
        let s3 = 6.0 * t4 * t4 * self.diag_diag_edge2
            + 8.0 * mu3 * (mu5 - mu3 * mu2) * self.diag_edge3
            + 6.0 * mu2 * (t6 + t4 * mu2) * self.diag2_edge2
            + 24.0 * mu3 * mu3 * mu2 * self.diag_edge_edge2
            + 24.0 * mu2 * mu2 * t4 * self.diag_triangle
            + 6.0 * mu3 * (mu5 - 2.0 * mu2 * mu3) * self.diag2_diag_edge;
        (s1, s2, s3)
    }
}

/// Full analysis of `Q` for matrix `a` and centered moments `m`.
pub fn analyze(a: &SymMatrix, m: &MomentTable) -> Result<QFormAnalysis> {
    let scale = m.mu[2].sqrt().max(1.0);
    if m.mu[1].abs() > 1e-12 * scale {
        return Err(Error::Domain(format!(
            "the law must be centered, mean is {:e}",
            m.mu[1]
        )));
    }
    let n = a.n();
    let mut diag2 = 0.0;
    let mut offdiag2 = 0.0;
    let mut influence: f64 = 0.0;
    let mut row_square_sum = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let x = a.get(i, j);
            row += x * x;
            if i == j {
                diag2 += x * x;
            } else {
                offdiag2 += x * x;
            }
        }
        influence = influence.max(row);
        row_square_sum += row * row;
    }
    let a2 = a.matmul(a);
    let tr_a4: f64 = a2.iter().map(|x| x * x).sum();
    let sigma2 = 2.0 * m.mu[2] * m.mu[2] * offdiag2 + m.mu_tilde4 * diag2;
    let (s1, s2, s3) = FourthMomentSums::of(a).combine(m);
    let has_diagonal = a.has_diagonal();
    let ind = if has_diagonal { 1.0 } else { 0.0 };
    let total = offdiag2 + diag2;
    Ok(QFormAnalysis {
        n,
        moments: m.clone(),
        sigma2,
        s1,
        s2,
        s3,
        eq4: s1 + 3.0 * s2 + 4.0 * s3,
        tr_a4,
        lambda1: a.spectral_radius(),
        influence,
        row_square_sum,
        offdiag2,
        diag2,
        gamma: if total > 0.0 { diag2 / total } else { 0.0 },
        alpha_n: m.mu[2]
            + if m.mu[2] > 0.0 {
                m.mu[4] / m.mu[2] * ind
            } else {
                0.0
            },
        beta_n: m.mu[4] + m.mu[8].sqrt() * ind,
        has_diagonal,
        degenerate: sigma2 <= 0.0,
    })
}

impl QFormAnalysis {
    fn sigma(&self) -> Result<f64> {
        if self.degenerate {
            Err(Error::DegenerateVariance(
                "the quadratic form has zero variance".into(),
            ))
        } else {
            Ok(self.sigma2.sqrt())
        }
    }

    /// `|E[(Q/sigma)^4] - 3|`.
    pub fn fourth_gap(&self) -> Result<f64> {
        let s2 = self.sigma()?.powi(2);
        Ok((self.eq4 / (s2 * s2) - 3.0).abs())
    }

    /// `sqrt|E[(Q/sigma)^4] - 3| + (alpha_n / sigma) sqrt(influence)`.
    pub fn bound_r1(&self) -> Result<f64> {
        let s = self.sigma()?;
        Ok(self.fourth_gap()?.sqrt() + self.alpha_n / s * self.influence.sqrt())
    }

    /// `(beta_n / sigma^2) sqrt(Tr A^4)`.
    pub fn bound_r2(&self) -> Result<f64> {
        let s = self.sigma()?;
        Ok(self.beta_n / (s * s) * self.tr_a4.sqrt())
    }

    /// `((E|X|^3)^2 + gamma E[X^6]) |lambda_1| / sqrt(sum a_ij^2)`.
    pub fn rate_gt(&self) -> Result<f64> {
        self.sigma()?;
        let m = &self.moments;
        let total = self.offdiag2 + self.diag2;
        Ok((m.abs3 * m.abs3 + self.gamma * m.mu[6]) * self.lambda1 / total.sqrt())
    }

    /// `(|E[(Q/sigma)^4] - 3|, influence / sigma^2, Tr A^4 / sigma^4)`.
    pub fn dejong_check(&self) -> Result<(f64, f64, f64)> {
        let s2 = self.sigma()?.powi(2);
        Ok((
            self.fourth_gap()?,
            self.influence / s2,
            self.tr_a4 / (s2 * s2),
        ))
    }

    /// `row_square_sum / Tr A^4`, reported but not bounded.
    pub fn row_to_trace_ratio(&self) -> f64 {
        if self.tr_a4 > 0.0 {
            self.row_square_sum / self.tr_a4
        } else {
            0.0
        }
    }

    /// Links of the trace and eigenvalue inequality chain.
    ///
    /// The links involving `sigma` need `mu2^2 sum a^2 <= sigma^2`, which
    /// holds when the diagonal is zero or `mu_tilde4 >= mu2^2`; otherwise
    /// they are marked not applicable.
    pub fn chain(&self) -> Vec<ChainLink> {
        let mu2 = self.moments.mu[2];
        let total = self.offdiag2 + self.diag2;
        let sigma_links = !self.has_diagonal || self.moments.mu_tilde4 >= mu2 * mu2;
        let sigma = self.sigma2.max(0.0).sqrt();
        let mut links = vec![
            ChainLink::new(
                "influence <= sqrt(row_square_sum)",
                self.influence,
                self.row_square_sum.sqrt(),
                true,
            ),
            ChainLink::new(
                "row_square_sum <= tr_a4",
                self.row_square_sum,
                self.tr_a4,
                true,
            ),
            ChainLink::new(
                "influence <= sqrt(tr_a4)",
                self.influence,
                self.tr_a4.sqrt(),
                true,
            ),
            ChainLink::new(
                "sqrt(tr_a4) <= lambda1 sqrt(sum a^2)",
                self.tr_a4.sqrt(),
                self.lambda1 * total.sqrt(),
                true,
            ),
        ];
        if mu2 > 0.0 {
            links.push(ChainLink::new(
                "lambda1 sqrt(sum a^2) <= lambda1 sigma / mu2",
                self.lambda1 * total.sqrt(),
                self.lambda1 * sigma / mu2,
                sigma_links,
            ));
            links.push(ChainLink::new(
                "tr_a4 <= sigma^4 / mu2^4",
                self.tr_a4,
                self.sigma2 * self.sigma2 / mu2.powi(4),
                sigma_links,
            ));
        }
        links
    }
}

/// One inequality `lhs <= rhs` of the chain.
#[derive(Clone, Debug, Serialize)]
pub struct ChainLink {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub applicable: bool,
}

impl ChainLink {
    fn new(name: &'static str, lhs: f64, rhs: f64, applicable: bool) -> Self {
        Self {
            name,
            lhs,
            rhs,
            applicable,
        }
    }

    pub fn holds(&self) -> bool {
        !self.applicable || self.lhs <= self.rhs * (1.0 + 1e-10) + 1e-300
    }
}

/// Draws `Q` with fresh coordinates from `law`.
pub fn sample_q(a: &SymMatrix, law: &Distribution, rng: &mut RngStream) -> f64 {
    let n = a.n();
    let x: Vec<f64> = (0..n).map(|_| law.sample(rng)).collect();
    quadratic_value(a, law.moments().mu[2], &x)
}

/// `x^T A x - mu2 tr(A)`.
pub fn quadratic_value(a: &SymMatrix, mu2: f64, x: &[f64]) -> f64 {
    let n = a.n();
    let mut q = 0.0;
    for i in 0..n {
        let row = &a.data()[i * n..(i + 1) * n];
        let s: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        q += x[i] * s;
    }
    q - mu2 * a.trace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::{OutcomeSpace, RandomFunctional};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exchange() -> SymMatrix {
        SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn random_matrix(n: usize, seed: u64, diag: bool) -> SymMatrix {
        let mut rng = RngStream::new(seed, 3);
        let mut a = SymMatrix::from_fn(n, |_, _| 0.0);
        for i in 0..n {
            for j in i..n {
                let v = if i == j && !diag {
                    0.0
                } else {
                    2.0 * rng.uniform() - 1.0
                };
                a.a[i * n + j] = v;
                a.a[j * n + i] = v;
            }
        }
        a
    }

    fn enumerated(a: &SymMatrix, law: &Distribution) -> RandomFunctional {
        let sp = OutcomeSpace::iid(law, a.n()).unwrap();
        let mu2 = law.moments().mu[2];
        RandomFunctional::from_fn(&sp, |x| {
            let mut q = 0.0;
            for i in 0..a.n() {
                for j in 0..a.n() {
                    q += if i == j {
                        a.get(i, i) * (x[i] * x[i] - mu2)
                    } else {
                        a.get(i, j) * x[i] * x[j]
                    };
                }
            }
            q
        })
    }

    fn laws() -> Vec<Distribution> {
        vec![
            Distribution::rademacher(),
            Distribution::three_point(),
            Distribution::new(&[(-1.0, 0.4), (0.0, 0.4), (2.0, 0.2)]).unwrap(),
            Distribution::new(&[(-1.0, 0.75), (3.0, 0.25)]).unwrap(),
        ]
    }

    #[test]
    fn exchange_matrix_fields() {
        let q = analyze(&exchange(), &Distribution::rademacher().moments()).unwrap();
        assert_eq!(q.sigma2, 4.0);
        assert_relative_eq!(q.tr_a4, 2.0);
        assert_relative_eq!(q.lambda1, 1.0, epsilon = 1e-14);
        assert_eq!(q.influence, 1.0);
        assert_eq!(q.gamma, 0.0);
        assert_relative_eq!(q.eq4, 16.0, epsilon = 1e-12);
        assert_relative_eq!(q.bound_r1().unwrap(), 2f64.sqrt() + 0.5, epsilon = 1e-12);
        assert_relative_eq!(q.bound_r2().unwrap(), 2f64.sqrt() / 4.0, epsilon = 1e-12);
        assert_relative_eq!(q.rate_gt().unwrap(), 1.0 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let z = SymMatrix::from_fn(3, |_, _| 0.0);
        let q = analyze(&z, &Distribution::three_point().moments()).unwrap();
        assert!(q.degenerate);
        assert_eq!((q.sigma2, q.tr_a4, q.lambda1, q.eq4), (0.0, 0.0, 0.0, 0.0));
        assert!(matches!(q.bound_r1(), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn diagonal_only_rademacher_is_degenerate() {
        let d = SymMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 0.0 });
        let q = analyze(&d, &Distribution::rademacher().moments()).unwrap();
        assert!(q.degenerate);
        assert!(q.bound_r1().is_err() && q.bound_r2().is_err());
    }

    #[test]
    fn rejects_uncentered_law_and_bad_matrices() {
        let law = Distribution::new(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!(matches!(
            analyze(&exchange(), &law.moments()),
            Err(Error::Domain(_))
        ));
        assert!(SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.1, 0.0]]).is_err());
        assert!(SymMatrix::from_rows(&[vec![0.0, f64::NAN], vec![f64::NAN, 0.0]]).is_err());
        assert!(SymMatrix::from_rows(&[vec![0.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn fourth_moment_identity_against_enumeration() {
        for law in laws() {
            for (n, seed) in [(2, 1), (3, 2), (4, 3), (5, 4), (6, 5)] {
                let a = random_matrix(n, seed, true);
                let q = analyze(&a, &law.moments()).unwrap();
                let x = enumerated(&a, &law);
                assert_relative_eq!(q.eq4, x.moment(4), max_relative = 1e-9);
                assert_relative_eq!(
                    q.sigma2,
                    x.variance(),
                    epsilon = 1e-10,
                    max_relative = 1e-10
                );
            }
        }
    }

    #[test]
    fn index_sums_against_brute_force() {
        let a = random_matrix(6, 9, true);
        let s = FourthMomentSums::of(&a);
        let n = a.n();
        let g = |i: usize, j: usize| a.get(i, j);
        let r = 0..n;
        let mut want = FourthMomentSums::default();
        for i in r.clone() {
            want.diag4 += g(i, i).powi(4);
            for j in r.clone().filter(|&j| j != i) {
                if i < j {
                    want.off4_upper += g(i, j).powi(4);
                }
                want.diag_pair += g(i, i).powi(2) * g(j, j).powi(2);
                want.diag_diag_edge2 += g(i, i) * g(j, j) * g(i, j).powi(2);
                want.diag_edge3 += g(i, i) * g(i, j).powi(3);
                want.diag2_edge2 += g(i, i).powi(2) * g(i, j).powi(2);
                want.diag2_diag_edge += g(i, i).powi(2) * g(j, j) * g(i, j);
                for k in r.clone().filter(|&k| k != i && k != j) {
                    want.star += g(i, j).powi(2) * g(i, k).powi(2);
                    want.diag_path += g(i, i) * g(j, j) * g(i, k) * g(k, j);
                    want.path_square += g(k, j).powi(2) * g(i, k) * g(i, j);
                    want.diag_edge += g(i, i).powi(2) * g(j, k).powi(2);
                    want.diag_edge_edge2 += g(i, i) * g(i, j) * g(j, k).powi(2);
                    want.diag_triangle += g(i, i) * g(i, j) * g(i, k) * g(k, j);
                    for l in r.clone().filter(|&l| l != i && l != j && l != k) {
                        want.cycle4 += g(i, j) * g(j, k) * g(k, l) * g(l, i);
                        want.matching += g(i, j).powi(2) * g(k, l).powi(2);
                    }
                }
            }
        }
        let got = serde_json::to_value(&s).unwrap();
        let exp = serde_json::to_value(&want).unwrap();
        for (k, v) in exp.as_object().unwrap() {
            let (x, y) = (got[k].as_f64().unwrap(), v.as_f64().unwrap());
            assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()), "{k}: {x} vs {y}");
        }
    }

    #[test]
    fn r1_recomputed_from_raw_sums() {
        let law = Distribution::three_point();
        let m = law.moments();
        let a = random_matrix(6, 77, true);
        let q = analyze(&a, &m).unwrap();
        let x = enumerated(&a, &law);
        let var = x.variance();
        let gap = (x.moment(4) / (var * var) - 3.0).abs();
        let infl = (0..6)
            .map(|i| (0..6).map(|j| a.get(i, j).powi(2)).sum::<f64>())
            .fold(0.0, f64::max);
        let alpha = m.mu[2] + m.mu[4] / m.mu[2];
        let want = gap.sqrt() + alpha / var.sqrt() * infl.sqrt();
        assert_relative_eq!(q.bound_r1().unwrap(), want, max_relative = 1e-10);
    }

    #[test]
    fn eigenvalues_match_reference_solver() {
        for (n, seed) in [(1, 1), (5, 2), (17, 3), (40, 4)] {
            let a = random_matrix(n, seed, true);
            let reference = nalgebra::DMatrix::from_row_slice(n, n, a.data())
                .symmetric_eigen()
                .eigenvalues;
            let mut ours = a.eigenvalues();
            let mut theirs: Vec<f64> = reference.iter().copied().collect();
            ours.sort_by(f64::total_cmp);
            theirs.sort_by(f64::total_cmp);
            for (x, y) in ours.iter().zip(&theirs) {
                assert!((x - y).abs() < 1e-10, "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn power_iteration_matches_jacobi() {
        let a = random_matrix(30, 8, true);
        assert_relative_eq!(
            a.power_iteration(),
            a.spectral_radius(),
            max_relative = 1e-8
        );
    }

    #[test]
    fn r2_below_spectral_majorant() {
        let law = Distribution::three_point();
        for seed in 0..100 {
            let n = 2 + (seed as usize % 20);
            let a = random_matrix(n, seed, seed % 2 == 0);
            let q = analyze(&a, &law.moments()).unwrap();
            let total = q.offdiag2 + q.diag2;
            let majorant = q.beta_n / q.sigma2 * q.lambda1 * total.sqrt();
            assert!(q.bound_r2().unwrap() <= majorant * (1.0 + 1e-12));
        }
    }

    proptest! {
        #[test]
        fn r2_is_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
            let a = random_matrix(5, seed, true);
            let m = Distribution::three_point().moments();
            let r = analyze(&a, &m).unwrap().bound_r2().unwrap();
            let rc = analyze(&a.scale(c), &m).unwrap().bound_r2().unwrap();
            prop_assert!((r - rc).abs() <= 1e-10 * r);
        }

        #[test]
        fn chain_holds(seed in 0u64..5000, n in 2usize..41, diag in any::<bool>(), law in 0usize..4) {
            let a = random_matrix(n, seed, diag);
            let q = analyze(&a, &laws()[law].moments()).unwrap();
            for link in q.chain() {
                prop_assert!(link.holds(), "{}: {} > {}", link.name, link.lhs, link.rhs);
            }
        }
    }

    #[test]
    fn sigma_links_fail_without_their_condition() {
        // With a diagonal and mu_tilde4 < mu2^2, Tr A^4 can exceed
        // sigma^4 / mu2^4; the link is then reported as not applicable.
        let a = SymMatrix::from_rows(&[vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
        let q = analyze(&a, &Distribution::rademacher().moments()).unwrap();
        let link = q
            .chain()
            .into_iter()
            .find(|l| l.name.starts_with("tr_a4"))
            .unwrap();
        assert!(!link.applicable);
        assert!(link.lhs > link.rhs);
    }

    fn dejong(a: &SymMatrix) -> (f64, f64, f64) {
        analyze(a, &Distribution::rademacher().moments())
            .unwrap()
            .dejong_check()
            .unwrap()
    }

    #[test]
    fn dejong_band_matrix_tends_to_zero() {
        let band = |n: usize| SymMatrix::from_fn(n, |i, j| if j == i + 1 { 1.0 } else { 0.0 });
        let r: Vec<_> = [8, 16, 32, 64].iter().map(|&n| dejong(&band(n))).collect();
        for w in r.windows(2) {
            assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1 && w[1].2 < w[0].2);
        }
    }

    #[test]
    fn dejong_complete_graph_stays_away_from_zero() {
        // a_ij = 1/n off the diagonal: Q is a centered chi-square in the
        // limit, so the fourth gap and trace ratio stay bounded away from 0
        // while the influence ratio vanishes.
        let ones =
            |n: usize| SymMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { 1.0 / n as f64 });
        let r: Vec<_> = [8, 16, 32, 64].iter().map(|&n| dejong(&ones(n))).collect();
        for x in &r {
            assert!(x.0 > 1.0 && x.2 > 0.1);
        }
        for w in r.windows(2) {
            assert!(w[1].1 < w[0].1);
        }
    }

    #[test]
    fn dejong_dominant_row() {
        let row = |n: usize| SymMatrix::from_fn(n, |i, j| if i == 0 && j > 0 { 1.0 } else { 0.0 });
        // influence n - 1 against sigma^2 = 4 (n - 1).
        for n in [8, 16, 32, 64] {
            assert!((dejong(&row(n)).1 - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_mean_and_variance() {
        let a = random_matrix(8, 4, true);
        let law = Distribution::three_point();
        let q = analyze(&a, &law.moments()).unwrap();
        let mut rng = RngStream::new(1, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_q(&a, &law, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let se_mean = (q.sigma2 / n as f64).sqrt();
        let se_var = ((q.eq4 - q.sigma2 * q.sigma2) / n as f64).sqrt();
        assert!(mean.abs() < 5.0 * se_mean);
        assert!((var - q.sigma2).abs() < 5.0 * se_var);
    }

    #[test]
    fn contraction_norms_match_trace_formulas() {
        use crate::chaos::{contraction_norm2, ChaosKernel};
        // f_{ij}(s, t) = a_ij s t gives I_2(f) = Q for Rademacher X.
        let law = Distribution::rademacher();
        for seed in 0..5 {
            let a = random_matrix(4, seed, false);
            let sp = OutcomeSpace::iid(&law, 4).unwrap();
            let entries = crate::chaos::subsets(4, 2)
                .into_iter()
                .map(|s| {
                    let v = a.get(s[0], s[1]);
                    (s, vec![v, -v, -v, v])
                })
                .collect();
            let f = ChaosKernel::new(&sp, 2, entries).unwrap();
            let q = analyze(&a, &law.moments()).unwrap();
            let x = enumerated(&a, &law);
            assert!(f.integral().max_abs_diff(&x) < 1e-12);
            let n21 = contraction_norm2(&f, &f, 2, 1).unwrap();
            let n11 = contraction_norm2(&f, &f, 1, 1).unwrap();
            assert_relative_eq!(n21, q.row_square_sum, max_relative = 1e-12);
            assert_relative_eq!(n11, q.tr_a4, max_relative = 1e-12);
        }
    }
}
