//! Weighted copies of a fixed template graph in an Erdős–Rényi graph with
//! i.i.d. edge weights.

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::mc::{empirical_kdist, KDistReport};
use crate::rng::{replicate, RngStream};

/// Largest template edge count for the subgraph scan.
pub const MAX_TEMPLATE_EDGES: usize = 10;
/// Largest host size supported by the bitset counters.
pub const MAX_HOST: usize = 128;
/// Largest template handled by generic enumeration.
pub const MAX_GENERIC_VERTICES: usize = 5;

/// Template graph on vertices `0..vertices`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl GraphSpec {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Input("template needs at least one edge".into()));
        }
        let mut seen = Vec::new();
        for &(u, v) in &edges {
            if u >= vertices || v >= vertices {
                return Err(Error::Input(format!("edge ({u},{v}) out of range")));
            }
            if u == v {
                return Err(Error::Input(format!("self-loop at {u}")));
            }
            let key = (u.min(v), u.max(v));
            if seen.contains(&key) {
                return Err(Error::Input(format!("edge ({u},{v}) repeated")));
            }
            seen.push(key);
        }
        for x in 0..vertices {
            if !seen.iter().any(|&(u, v)| u == x || v == x) {
                return Err(Error::Input(format!("vertex {x} is isolated")));
            }
        }
        Ok(Self {
            vertices,
            edges: seen,
        })
    }

    pub fn edge() -> Self {
        Self::new(2, vec![(0, 1)]).unwrap()
    }

    pub fn two_path() -> Self {
        Self::new(3, vec![(0, 1), (1, 2)]).unwrap()
    }

    pub fn triangle() -> Self {
        Self::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    pub fn four_cycle() -> Self {
        Self::new(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.vertices];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    /// Number of vertex permutations preserving the edge set.
    pub fn automorphisms(&self) -> usize {
        let mut count = 0;
        let mut perm: Vec<usize> = (0..self.vertices).collect();
        permute(&mut perm, 0, &mut |p| {
            if self.edges.iter().all(|&(u, v)| self.has_edge(p[u], p[v])) {
                count += 1;
            }
        });
        count
    }

    /// Same template with vertices renamed by `perm`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        Self::new(
            self.vertices,
            self.edges
                .iter()
                .map(|&(u, v)| (perm[u], perm[v]))
                .collect(),
        )
    }

    fn shape(&self) -> Template {
        let d = self.degrees();
        match (self.vertices, self.edges.len()) {
            (2, 1) => Template::Edge,
            (3, 2) => Template::TwoPath,
            (3, 3) => Template::Triangle,
            (4, 4) if d.iter().all(|&x| x == 2) => Template::FourCycle,
            (v, _) if v <= MAX_GENERIC_VERTICES => Template::Generic,
            _ => Template::Unsupported,
        }
    }
}

fn permute(p: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == p.len() {
        f(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, f);
        p.swap(i, j);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Template {
    Edge,
    TwoPath,
    Triangle,
    FourCycle,
    Generic,
    Unsupported,
}

/// How the weight of one copy is formed from its edge weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Product,
    Sum,
}

/// `min over nonempty edge subsets H of n^{v_H} p^{e_H}`.
pub fn min_subgraph_scale(g: &GraphSpec, n: usize, p: f64) -> Result<f64> {
    let e = g.edge_count();
    if e > MAX_TEMPLATE_EDGES {
        return Err(Error::Argument(format!(
            "template has {e} edges; at most {MAX_TEMPLATE_EDGES} supported"
        )));
    }
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << e) {
        let mut touched = 0u64;
        for (i, &(u, v)) in g.edges.iter().enumerate() {
            if mask & (1 << i) != 0 {
                touched |= (1 << u) | (1 << v);
            }
        }
        let val = (n as f64).powi(touched.count_ones() as i32) * p.powi(mask.count_ones() as i32);
        best = best.min(val);
    }
    Ok(best)
}

/// Weight moments entering the rate.
#[derive(Clone, Debug, Serialize)]
pub struct RgBoundInputs {
    pub mean: f64,
    pub variance: f64,
    pub central4: f64,
}

impl RgBoundInputs {
    pub fn of(law: &Distribution) -> Self {
        let m = law.mean();
        Self {
            mean: m,
            variance: law.variance(),
            central4: law.expect(|x| (x - m).powi(4)),
        }
    }
}

/// Constant-free rate
/// `(sqrt(E(X-EX)^4) + (1-p)(EX)^2) / (Var X + (1-p)(EX)^2)
///  * ((1-p) min_H n^{v_H} p^{e_H})^{-1/2}`.
pub fn rg_rate(g: &GraphSpec, n: usize, p: f64, law: &Distribution) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument(format!(
            "retention must lie in (0,1), got {p}"
        )));
    }
    let m = RgBoundInputs::of(law);
    let shift = (1.0 - p) * m.mean * m.mean;
    let den = m.variance + shift;
    if den <= 0.0 {
        return Err(Error::DegenerateVariance(
            "weight law and retention give a zero denominator".into(),
        ));
    }
    let scale = min_subgraph_scale(g, n, p)?;
    Ok((m.central4.sqrt() + shift) / den / ((1.0 - p) * scale).sqrt())
}

/// Host graph with adjacency bitsets and dense edge weights.
#[derive(Clone, Debug)]
pub struct HostGraph {
    n: usize,
    adj: Vec<u128>,
    w: Vec<f64>,
}

impl HostGraph {
    /// Retains each pair with probability `p` and then draws its weight.
    pub fn sample(n: usize, p: f64, law: &Distribution, rng: &mut RngStream) -> Result<Self> {
        if n > MAX_HOST {
            return Err(Error::Argument(format!("host size {n} exceeds {MAX_HOST}")));
        }
        let mut g = Self {
            n,
            adj: vec![0; n],
            w: vec![0.0; n * n],
        };
        for i in 0..n {
            for j in i + 1..n {
                if rng.bernoulli(p) {
                    let x = law.sample(rng);
                    g.adj[i] |= 1 << j;
                    g.adj[j] |= 1 << i;
                    g.w[i * n + j] = x;
                    g.w[j * n + i] = x;
                }
            }
        }
        Ok(g)
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n > MAX_HOST {
            return Err(Error::Argument(format!("host size {n} exceeds {MAX_HOST}")));
        }
        let mut g = Self {
            n,
            adj: vec![0; n],
            w: vec![0.0; n * n],
        };
        for &(i, j, x) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::Input(format!("bad host edge ({i},{j})")));
            }
            g.adj[i] |= 1 << j;
            g.adj[j] |= 1 << i;
            g.w[i * n + j] = x;
            g.w[j * n + i] = x;
        }
        Ok(g)
    }

    fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> {
        bits(self.adj[i])
    }

    pub fn edge_count(&self) -> usize {
        self.adj
            .iter()
            .map(|a| a.count_ones() as usize)
            .sum::<usize>()
            / 2
    }
}

fn bits(mut b: u128) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if b == 0 {
            None
        } else {
            let i = b.trailing_zeros() as usize;
            b &= b - 1;
            Some(i)
        }
    })
}

fn above(j: usize) -> u128 {
    if j + 1 >= 128 {
        0
    } else {
        !0u128 << (j + 1)
    }
}

/// Combined weight of all copies of `g` in `host`.
pub fn weight_of(g: &GraphSpec, host: &HostGraph, conv: Convention) -> Result<f64> {
    let n = host.n;
    let combine = |ws: &[f64]| match conv {
        Convention::Product => ws.iter().product::<f64>(),
        Convention::Sum => ws.iter().sum::<f64>(),
    };
    Ok(match g.shape() {
        Template::Edge => (0..n)
            .flat_map(|i| bits(host.adj[i] & above(i)).map(move |j| (i, j)))
            .map(|(i, j)| host.weight(i, j))
            .sum(),
        Template::TwoPath => {
            let mut total = 0.0;
            for v in 0..n {
                let ws: Vec<f64> = host.neighbors(v).map(|a| host.weight(v, a)).collect();
                let s: f64 = ws.iter().sum();
                let deg = ws.len() as f64;
                total += match conv {
                    Convention::Product => 0.5 * (s * s - ws.iter().map(|x| x * x).sum::<f64>()),
                    Convention::Sum => (deg - 1.0).max(0.0) * s,
                };
            }
            total
        }
        Template::Triangle => {
            let mut total = 0.0;
            for i in 0..n {
                for j in bits(host.adj[i] & above(i)) {
                    let wij = host.weight(i, j);
                    for k in bits(host.adj[i] & host.adj[j] & above(j)) {
                        total += combine(&[wij, host.weight(i, k), host.weight(j, k)]);
                    }
                }
            }
            total
        }
        Template::FourCycle if conv == Convention::Product => {
            // Each cycle a-b-c-d is seen once from each diagonal.
            let mut total = 0.0;
            for a in 0..n {
                for c in a + 1..n {
                    let mut s = 0.0;
                    let mut sq = 0.0;
                    for b in bits(host.adj[a] & host.adj[c]) {
                        let t = host.weight(a, b) * host.weight(b, c);
                        s += t;
                        sq += t * t;
                    }
                    total += 0.5 * (s * s - sq);
                }
            }
            0.5 * total
        }
        Template::FourCycle | Template::Generic => generic_weight(g, host, conv),
        Template::Unsupported => {
            return Err(Error::Argument(format!(
                "templates with more than {MAX_GENERIC_VERTICES} vertices are not supported"
            )))
        }
    })
}

/// Sum over injective vertex maps that carry every template edge onto a
/// host edge, divided by the automorphism count.
fn generic_weight(g: &GraphSpec, host: &HostGraph, conv: Convention) -> f64 {
    // Visit vertices so that each one after the first touches an earlier one.
    let mut order = vec![0];
    while order.len() < g.vertices {
        let next = (0..g.vertices)
            .filter(|v| !order.contains(v))
            .max_by_key(|&v| order.iter().filter(|&&u| g.has_edge(u, v)).count())
            .unwrap();
        order.push(next);
    }
    let back: Vec<Vec<usize>> = (0..order.len())
        .map(|i| (0..i).filter(|&j| g.has_edge(order[i], order[j])).collect())
        .collect();
    let mut walk = Embedding {
        g,
        host,
        conv,
        order,
        back,
        image: vec![0; g.vertices],
        total: 0.0,
    };
    walk.extend(0, 0);
    walk.total / g.automorphisms() as f64
}

/// Depth-first search over partial vertex maps.
struct Embedding<'a> {
    g: &'a GraphSpec,
    host: &'a HostGraph,
    conv: Convention,
    order: Vec<usize>,
    /// Earlier positions in `order` adjacent to each position.
    back: Vec<Vec<usize>>,
    image: Vec<usize>,
    total: f64,
}

impl Embedding<'_> {
    fn extend(&mut self, depth: usize, used: u128) {
        if depth == self.order.len() {
            let ws = self
                .g
                .edges
                .iter()
                .map(|&(u, v)| self.host.weight(self.image[u], self.image[v]));
            self.total += match self.conv {
                Convention::Product => ws.product::<f64>(),
                Convention::Sum => ws.sum::<f64>(),
            };
            return;
        }
        let n = self.host.n;
        let mut cand = if n >= 128 { !0u128 } else { (1u128 << n) - 1 };
        for &j in &self.back[depth] {
            cand &= self.host.adj[self.image[self.order[j]]];
        }
        for x in bits(cand & !used) {
            self.image[self.order[depth]] = x;
            self.extend(depth + 1, used | (1 << x));
        }
    }
}

/// One draw of the combined weight.
pub fn simulate_weight(
    g: &GraphSpec,
    n: usize,
    p: f64,
    law: &Distribution,
    conv: Convention,
    rng: &mut RngStream,
) -> Result<f64> {
    let host = HostGraph::sample(n, p, law, rng)?;
    weight_of(g, &host, conv)
}

/// Settings for one grid point of a Kolmogorov distance experiment.
#[derive(Clone, Debug, Serialize)]
pub struct GraphRun {
    pub n: usize,
    pub p: f64,
    pub convention: Convention,
    pub pilot_samples: usize,
    pub samples: usize,
    pub delta: f64,
    pub seed: u64,
    /// Stream ids used: pilot from `stream_base`, main run from
    /// `stream_base + 2^20`.
    pub stream_base: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphPoint {
    pub n: usize,
    pub p: f64,
    pub rate: f64,
    pub pilot_mean: f64,
    pub pilot_sd: f64,
    pub kdist: KDistReport,
}

/// Standardizes with a pilot run and measures the Kolmogorov distance on
/// an independent main run.
pub fn run_point(g: &GraphSpec, law: &Distribution, run: &GraphRun) -> Result<GraphPoint> {
    let rate = rg_rate(g, run.n, run.p, law)?;
    let draw = |rng: &mut RngStream| simulate_weight(g, run.n, run.p, law, run.convention, rng);
    let pilot: Vec<f64> = replicate(run.seed, run.stream_base, run.pilot_samples, draw)
        .into_iter()
        .collect::<Result<_>>()?;
    let (mean, sd) = mean_sd(&pilot);
    if sd <= 0.0 {
        return Err(Error::DegenerateVariance(
            "pilot run has zero variance".into(),
        ));
    }
    let main: Vec<f64> = replicate(run.seed, run.stream_base + (1 << 20), run.samples, draw)
        .into_iter()
        .map(|r| r.map(|w| (w - mean) / sd))
        .collect::<Result<_>>()?;
    let kdist = empirical_kdist(&main, run.delta, Some(run.seed))?;
    Ok(GraphPoint {
        n: run.n,
        p: run.p,
        rate,
        pilot_mean: mean,
        pilot_sd: sd,
        kdist,
    })
}

/// Sample mean and standard deviation, summed in order.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}
