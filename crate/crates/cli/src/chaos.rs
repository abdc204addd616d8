use std::path::PathBuf;
use std::sync::Arc;

use be_core::chaos::{
    covariance_identity_check, decompose, dki_bounds, fourth_moment_bound, master_bound, multiply,
    product_rule_residual, ChaosKernel, OutcomeSpace,
};
use be_core::dist::{Distribution, LawSpec};
use be_core::hoeffding::{project, rate_degenerate};
use be_core::io::KernelFile;
use be_core::mc::exact_kdist;
use be_core::rng::RngStream;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::report::*;
use crate::Common;

/// Residuals of equalities and overshoots of inequalities must stay below this.
const TOLERANCE: f64 = 1e-10;

#[derive(Args)]
pub struct ChaosArgs {
    /// Scenario JSON: {"n", "law", "kernels", "max_order"}.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Extra kernel JSON checked before the random ones.
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn default_n() -> usize {
    4
}
fn default_law() -> LawSpec {
    LawSpec::from_distribution(&Distribution::three_point())
}
fn default_kernels() -> usize {
    50
}
fn default_order() -> usize {
    3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_n")]
    n: usize,
    #[serde(default = "default_law")]
    law: LawSpec,
    #[serde(default = "default_kernels")]
    kernels: usize,
    #[serde(default = "default_order")]
    max_order: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            n: default_n(),
            law: default_law(),
            kernels: default_kernels(),
            max_order: default_order(),
        }
    }
}

#[derive(Serialize)]
struct IdentityResult {
    name: &'static str,
    checks: usize,
    max_residual: f64,
    tolerance: f64,
    pass: bool,
    /// First kernel index reaching the maximum.
    worst_kernel: Option<usize>,
}

#[derive(Serialize)]
struct Report {
    #[serde(flatten)]
    header: Header,
    scenario: Scenario,
    kernels_checked: usize,
    identities: Vec<IdentityResult>,
    failed: Vec<&'static str>,
}

struct Tally {
    results: Vec<IdentityResult>,
}

impl Tally {
    fn record(&mut self, name: &'static str, kernel: usize, residual: Result<f64, be_core::Error>) {
        // An evaluation error counts as a failed check.
        let r = residual.unwrap_or(f64::INFINITY);
        let r = if r.is_nan() { f64::INFINITY } else { r };
        let entry = match self.results.iter_mut().find(|e| e.name == name) {
            Some(e) => e,
            None => {
                self.results.push(IdentityResult {
                    name,
                    checks: 0,
                    max_residual: 0.0,
                    tolerance: TOLERANCE,
                    pass: true,
                    worst_kernel: None,
                });
                self.results.last_mut().unwrap()
            }
        };
        entry.checks += 1;
        if entry.worst_kernel.is_none() || r > entry.max_residual {
            entry.max_residual = entry.max_residual.max(r);
            entry.worst_kernel = Some(kernel);
        }
        entry.pass = entry.max_residual <= TOLERANCE;
    }
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// `E[I(f) I(g)] = d! <f, g>` when the orders agree and 0 otherwise.
fn isometry(f: &ChaosKernel, g: &ChaosKernel) -> Result<f64, be_core::Error> {
    let lhs = f.integral().mul(&g.integral())?.mean();
    let rhs = if f.order() == g.order() {
        factorial(f.order()) * f.inner(g)
    } else {
        0.0
    };
    Ok(relative(lhs, rhs))
}

fn product_formula(f: &ChaosKernel, g: &ChaosKernel) -> Result<f64, be_core::Error> {
    let direct = f.integral().mul(&g.integral())?;
    let formula = multiply(f, g)?.reconstruct();
    let scale = direct.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(direct.max_abs_diff(&formula) / scale)
}

fn max_entry_diff(a: Option<&ChaosKernel>, b: Option<&ChaosKernel>) -> f64 {
    let mut worst: f64 = 0.0;
    let mut visit = |x: &ChaosKernel, y: Option<&ChaosKernel>| {
        for (s, v) in x.entries() {
            let other = y.and_then(|k| k.entry(s));
            for (i, p) in v.iter().enumerate() {
                worst = worst.max((p - other.map_or(0.0, |o| o[i])).abs());
            }
        }
    };
    if let Some(x) = a {
        visit(x, b);
    }
    if let Some(y) = b {
        visit(y, a);
    }
    worst
}

/// Decomposing `I_d(f)` returns `f` in grade `d` and nothing elsewhere.
fn roundtrip(f: &ChaosKernel) -> Result<f64, be_core::Error> {
    let c = decompose(&f.integral());
    let mut worst = c.mean.abs();
    for d in 1..=f.space().n() {
        let expected = (d == f.order()).then_some(f);
        worst = worst.max(max_entry_diff(c.kernel(d), expected));
    }
    Ok(worst)
}

fn overshoot(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).max(0.0)
}

fn check_pair(t: &mut Tally, i: usize, f: &ChaosKernel, g: &ChaosKernel) {
    t.record("canonical", i, Ok(f.degeneracy_violation()));
    t.record("isometry", i, isometry(f, f));
    t.record("cross_isometry", i, isometry(f, g));
    t.record("product_formula", i, product_formula(f, g));
    t.record("decomposition_roundtrip", i, roundtrip(f));
    let x = f.integral();
    let y = g.integral();
    t.record("product_rule", i, product_rule_residual(&x, &y));
    for (name, alpha) in [
        ("covariance_alpha_0", 0.0),
        ("covariance_alpha_half", 0.5),
        ("covariance_alpha_1", 1.0),
    ] {
        t.record(name, i, covariance_identity_check(&x, &y, alpha));
    }
    let Ok(z) = x.centered().standardized() else {
        return;
    };
    t.record(
        "fourth_moment_bound",
        i,
        fourth_moment_bound(&z).map(|b| overshoot(b.fourth_moment, b.bound)),
    );
    let kd = match exact_kdist(&z) {
        Ok(k) => k.value,
        Err(e) => {
            t.record("master_bound", i, Err(e));
            return;
        }
    };
    t.record(
        "master_bound",
        i,
        master_bound(&z).map(|b| overshoot(kd, b.total)),
    );
    match dki_bounds(&z) {
        Ok(b) => {
            t.record("single_integral_sharp", i, Ok(overshoot(kd, b.sharp)));
            t.record("single_integral_simple", i, Ok(overshoot(kd, b.simple)));
        }
        Err(e) => t.record("single_integral", i, Err(e)),
    }
    t.record(
        "degenerate_ustat",
        i,
        rate_degenerate(&project(&z)).map(|b| overshoot(kd, b.bound)),
    );
}

pub fn run(args: ChaosArgs) -> CliResult<()> {
    let common = &args.common;
    check_samples(common)?;
    let mut cfg = RunConfig::new("chaos-verify", common);
    let scenario: Scenario = match &args.scenario {
        Some(p) => parse("scenario", &cfg.read("scenario", p)?)?,
        None => Scenario::default(),
    };
    let user = match &args.kernel {
        Some(p) => Some(parse::<KernelFile>("kernel", &cfg.read("kernel", p)?)?),
        None => None,
    };
    let law = scenario.law.build()?;
    let n = match &user {
        Some(k) => scenario.n.max(k.min_coordinates()),
        None => scenario.n,
    };
    if scenario.max_order == 0 || scenario.max_order > n {
        return Err(CliError::input(format!("max_order must lie in 1..={n}")));
    }
    let space: Arc<OutcomeSpace> = OutcomeSpace::iid(&law, n)?;
    let mut kernels = Vec::new();
    if let Some(k) = &user {
        kernels.push(k.build_unchecked(&space)?);
    }
    for i in 0..scenario.kernels {
        let order = 1 + i % scenario.max_order;
        let mut rng = RngStream::new(common.seed, i as u64);
        kernels.push(ChaosKernel::random(&space, order, &mut rng));
    }
    let mut tally = Tally {
        results: Vec::new(),
    };
    let count = kernels.len();
    for i in 0..count {
        // Pair each kernel with the next one of the list, cyclically.
        let g = &kernels[(i + 1) % count];
        check_pair(&mut tally, i, &kernels[i], g);
    }
    let failed: Vec<&'static str> = tally
        .results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name)
        .collect();
    let report = Report {
        header: Header::new(&cfg, common),
        scenario,
        kernels_checked: count,
        identities: tally.results,
        failed: failed.clone(),
    };
    write_json(common.out.as_ref(), &report)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError {
            code: IDENTITY,
            message: format!("identity check failed: {}", failed.join(", ")),
        })
    }
}
