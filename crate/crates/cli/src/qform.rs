use std::path::{Path, PathBuf};

use be_core::dist::{Distribution, LawSpec};
use be_core::io::{read_matrix_csv, SweepConfig};
use be_core::mc::KDistReport;
use be_core::qform::{analyze, sample_q, ChainLink, QFormAnalysis, SymMatrix};
use be_core::rng::replicate;
use clap::Args;
use serde::Serialize;

use crate::report::*;
use crate::Common;

#[derive(Args)]
pub struct QformArgs {
    /// Symmetric matrix as CSV.
    #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
    matrix: Option<PathBuf>,
    /// Coordinate law as JSON.
    #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
    law: Option<PathBuf>,
    /// Sweep over matrix sizes described by a JSON config.
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Serialize)]
struct DeJong {
    fourth_gap: f64,
    influence_ratio: f64,
    trace_ratio: f64,
    row_to_trace_ratio: f64,
}

#[derive(Serialize)]
struct Report {
    #[serde(flatten)]
    header: Header,
    law: LawSpec,
    analysis: QFormAnalysis,
    bounds: Vec<Bound>,
    dejong: DeJong,
    chain: Vec<ChainLink>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical: Option<KDistReport>,
}

#[derive(Serialize)]
struct SweepRow {
    n: usize,
    rate_r1: f64,
    rate_r2: f64,
    rate_gt: f64,
    empirical: Option<KDistReport>,
}

#[derive(Serialize)]
struct SweepReport {
    #[serde(flatten)]
    header: Header,
    sweep: SweepConfig,
    rows: Vec<SweepRow>,
}

fn rates(q: &QFormAnalysis, c: Option<f64>) -> CliResult<Vec<Bound>> {
    Ok(vec![
        Bound::rate("r1", q.bound_r1()?, c),
        Bound::rate("r2", q.bound_r2()?, c),
        Bound::rate("gt", q.rate_gt()?, c),
    ])
}

/// Standardized draws of `Q`; streams start at `stream_base`.
fn draws(
    a: &SymMatrix,
    law: &Distribution,
    q: &QFormAnalysis,
    common: &Common,
    stream_base: u64,
) -> Vec<f64> {
    let sd = q.sigma2.sqrt();
    replicate(common.seed, stream_base, common.samples, |rng| {
        sample_q(a, law, rng) / sd
    })
}

pub fn run(args: QformArgs) -> CliResult<()> {
    check_samples(&args.common)?;
    if let Some(path) = &args.sweep {
        return run_sweep(path, &args.common);
    }
    let common = &args.common;
    let mut cfg = RunConfig::new("qform", common);
    let matrix_text = cfg.read("matrix", args.matrix.as_ref().expect("required by clap"))?;
    let law_text = cfg.read("law", args.law.as_ref().expect("required by clap"))?;
    let a = read_matrix_csv(matrix_text.as_bytes())?;
    let spec: LawSpec = parse("law", &law_text)?;
    let law = spec.build()?;
    let q = analyze(&a, &law.moments())?;
    let bounds = rates(&q, common.constant)?;
    let (fourth_gap, influence_ratio, trace_ratio) = q.dejong_check()?;
    let dejong = DeJong {
        fourth_gap,
        influence_ratio,
        trace_ratio,
        row_to_trace_ratio: q.row_to_trace_ratio(),
    };
    let empirical = empirical(draws(&a, &law, &q, common, 0), common)?;
    let report = Report {
        header: Header::new(&cfg, common),
        law: spec,
        chain: q.chain(),
        analysis: q,
        bounds,
        dejong,
        empirical,
    };
    write_json(common.out.as_ref(), &report)
}

fn run_sweep(path: &Path, common: &Common) -> CliResult<()> {
    let out = require_out(common)?;
    let mut cfg = RunConfig::new("qform-sweep", common);
    let text = cfg.read("sweep", path)?;
    let sweep: SweepConfig = parse("sweep config", &text)?;
    let local = Common {
        seed: sweep.seed,
        samples: sweep.samples,
        delta: sweep.delta,
        ..common.clone()
    };
    check_samples(&local)?;
    let law = sweep.law.build()?;
    let m = law.moments();
    let mut rows = Vec::new();
    for (i, &n) in sweep.n.iter().enumerate() {
        let a = sweep.matrix.generate(n, sweep.seed);
        let q = analyze(&a, &m)?;
        let emp = empirical(draws(&a, &law, &q, &local, (i as u64) << 32), &local)?;
        rows.push(SweepRow {
            n,
            rate_r1: q.bound_r1()?,
            rate_r2: q.bound_r2()?,
            rate_gt: q.rate_gt()?,
            empirical: emp,
        });
    }
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.rate_r1.to_string(),
                r.rate_r2.to_string(),
                fmt_opt(r.empirical.as_ref().map(|e| e.value)),
                fmt_opt(r.empirical.as_ref().map(|e| e.dkw)),
            ]
        })
        .collect();
    write_csv(out, "n,rate_r1,rate_r2,dk_emp,dkw", &csv)?;
    let report = SweepReport {
        header: Header {
            seed: sweep.seed,
            ..Header::new(&cfg, common)
        },
        sweep,
        rows,
    };
    write_json(Some(out), &report)
}
