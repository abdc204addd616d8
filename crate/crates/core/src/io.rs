//! JSON and CSV formats for laws, kernels, weights, graphs and sweeps.

use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::chaos::{ChaosKernel, OutcomeSpace, RandomFunctional};
use crate::dist::{Distribution, LawSpec};
use crate::error::{Error, Result};
use crate::graphweigh::GraphSpec;
use crate::qform::SymMatrix;
use crate::rng::RngStream;
use crate::ustat::{UKernel, WeightTensor};

/// Tolerance when matching a kernel table's support grid to its law.
const SUPPORT_TOL: f64 = 1e-12;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_law(path: &Path) -> Result<Distribution> {
    read_json::<LawSpec>(path)?.build()
}

pub fn parse_law(text: &str) -> Result<Distribution> {
    serde_json::from_str::<LawSpec>(text)?.build()
}

/// `{"order": d, "entries": [{"subset": [...], "array": [...]}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    pub order: usize,
    pub entries: Vec<KernelEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry {
    pub subset: Vec<usize>,
    pub array: Vec<f64>,
}

impl KernelFile {
    pub fn of(k: &ChaosKernel) -> Self {
        Self {
            order: k.order(),
            entries: k
                .entries()
                .map(|(s, a)| KernelEntry {
                    subset: s.clone(),
                    array: a.clone(),
                })
                .collect(),
        }
    }

    fn raw(&self) -> Vec<(Vec<usize>, Vec<f64>)> {
        self.entries
            .iter()
            .map(|e| (e.subset.clone(), e.array.clone()))
            .collect()
    }

    /// Rejects kernels that are not canonical.
    pub fn build(&self, space: &Arc<OutcomeSpace>) -> Result<ChaosKernel> {
        ChaosKernel::new(space, self.order, self.raw())
    }

    /// Keeps the entries as given, canonical or not.
    pub fn build_unchecked(&self, space: &Arc<OutcomeSpace>) -> Result<ChaosKernel> {
        ChaosKernel::unchecked(space, self.order, self.raw())
    }

    /// One past the largest coordinate mentioned.
    pub fn min_coordinates(&self) -> usize {
        self.entries
            .iter()
            .flat_map(|e| e.subset.iter())
            .map(|&c| c + 1)
            .max()
            .unwrap_or(self.order)
            .max(self.order)
    }
}

/// Space of a functional: either `n` copies of one law or a list of laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceSpec {
    Iid { law: LawSpec, n: usize },
    Laws { laws: Vec<LawSpec> },
}

impl SpaceSpec {
    pub fn build(&self) -> Result<Arc<OutcomeSpace>> {
        match self {
            SpaceSpec::Iid { law, n } => OutcomeSpace::iid(&law.build()?, *n),
            SpaceSpec::Laws { laws } => {
                OutcomeSpace::new(laws.iter().map(|l| l.build()).collect::<Result<_>>()?)
            }
        }
    }
}

/// Dense values over the outcome space in lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalFile {
    pub space: SpaceSpec,
    pub values: Vec<f64>,
}

impl FunctionalFile {
    pub fn build(&self) -> Result<RandomFunctional> {
        RandomFunctional::new(self.space.build()?, self.values.clone())
    }

    pub fn of(x: &RandomFunctional) -> Self {
        Self {
            space: SpaceSpec::Laws {
                laws: x
                    .space()
                    .laws()
                    .iter()
                    .map(LawSpec::from_distribution)
                    .collect(),
            },
            values: x.values().to_vec(),
        }
    }
}

/// `{"order": d, "n": n, "entries": [{"subset": [...], "value": w}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    pub order: usize,
    pub n: usize,
    pub entries: Vec<WeightEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub subset: Vec<usize>,
    pub value: f64,
}

impl WeightFile {
    pub fn build(&self) -> Result<WeightTensor> {
        WeightTensor::new(
            self.n,
            self.order,
            self.entries
                .iter()
                .map(|e| (e.subset.clone(), e.value))
                .collect(),
        )
    }

    pub fn of(w: &WeightTensor) -> Self {
        Self {
            order: w.order(),
            n: w.n(),
            entries: w
                .entries()
                .map(|(s, &v)| WeightEntry {
                    subset: s.clone(),
                    value: v,
                })
                .collect(),
        }
    }
}

/// Kernel of a U-statistic as a table over `support^order`, row-major with
/// the first argument most significant. `"product": true` stands for
/// `g(x) = x_1 ... x_d` and needs no table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTableFile {
    pub law: LawSpec,
    pub order: usize,
    #[serde(default)]
    pub support: Option<Vec<f64>>,
    #[serde(default)]
    pub table: Option<Vec<f64>>,
    #[serde(default)]
    pub product: bool,
}

impl KernelTableFile {
    pub fn build(&self) -> Result<UKernel> {
        let law = self.law.build()?;
        if self.product {
            if self.table.is_some() {
                return Err(Error::Input(
                    "give either a table or product, not both".into(),
                ));
            }
            return UKernel::product(&law, self.order);
        }
        if let Some(grid) = &self.support {
            let ok = grid.len() == law.len()
                && grid
                    .iter()
                    .zip(law.values())
                    .all(|(a, b)| (a - b).abs() <= SUPPORT_TOL);
            if !ok {
                return Err(Error::Input(format!(
                    "support grid {grid:?} does not match the law's atoms {:?}",
                    law.values()
                )));
            }
        }
        let table = self
            .table
            .clone()
            .ok_or_else(|| Error::Input("kernel table missing".into()))?;
        UKernel::new(&law, self.order, table)
    }

    pub fn of(g: &UKernel) -> Self {
        Self {
            law: LawSpec::from_distribution(g.law()),
            order: g.order(),
            support: Some(g.law().values().to_vec()),
            table: Some(g.table().to_vec()),
            product: false,
        }
    }
}

/// `{"vertices": k, "edges": [[u, v], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl GraphFile {
    pub fn build(&self) -> Result<GraphSpec> {
        GraphSpec::new(self.vertices, self.edges.clone())
    }
}

/// Matrices generated per size in a quadratic-form sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFamily {
    /// Zero diagonal, independent signs scaled by `1/sqrt(n)`.
    #[default]
    RandomSigns,
    /// `1/sqrt(n)` on the first off-diagonals only.
    Band,
    /// `1/n` off the diagonal.
    Ones,
}

impl MatrixFamily {
    pub fn generate(self, n: usize, seed: u64) -> SymMatrix {
        let s = 1.0 / (n as f64).sqrt();
        match self {
            MatrixFamily::RandomSigns => {
                let mut rng = RngStream::new(seed, n as u64);
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    for j in i + 1..n {
                        let v = if rng.bernoulli(0.5) { s } else { -s };
                        m[i * n + j] = v;
                        m[j * n + i] = v;
                    }
                }
                SymMatrix::new(n, m).expect("symmetric by construction")
            }
            MatrixFamily::Band => SymMatrix::from_fn(n, |i, j| if j == i + 1 { s } else { 0.0 }),
            MatrixFamily::Ones => {
                SymMatrix::from_fn(n, |i, j| if i != j { 1.0 / n as f64 } else { 0.0 })
            }
        }
    }
}

fn default_delta() -> f64 {
    0.01
}

fn default_pilot() -> usize {
    100_000
}

/// Grid experiment description shared by the sweep commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: Vec<usize>,
    #[serde(default)]
    pub p: Vec<f64>,
    pub law: LawSpec,
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub matrix: MatrixFamily,
    #[serde(default = "default_pilot")]
    pub pilot_samples: usize,
}

/// `n` lines of `n` comma-separated numbers; blank lines are skipped.
pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<SymMatrix> {
    let mut rows = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| {
                    Error::Input(format!("line {}: not a number: {:?}", lineno + 1, t.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input("matrix file is empty".into()));
    }
    if rows.iter().any(|r| r.iter().any(|x| !x.is_finite())) {
        return Err(Error::Input("matrix has non-finite entries".into()));
    }
    SymMatrix::from_rows(&rows)
}

pub fn load_matrix_csv(path: &Path) -> Result<SymMatrix> {
    let f = std::fs::File::open(path)?;
    read_matrix_csv(std::io::BufReader::new(f))
}
