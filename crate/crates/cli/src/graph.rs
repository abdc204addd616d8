use std::path::PathBuf;

use be_core::dist::LawSpec;
use be_core::graphweigh::{
    min_subgraph_scale, rg_rate, run_point, Convention, GraphPoint, GraphRun,
};
use be_core::io::{GraphFile, SweepConfig};
use clap::Args;
use serde::Serialize;

use crate::report::*;
use crate::Common;

#[derive(Args)]
pub struct GraphArgs {
    /// Template graph JSON.
    #[arg(long)]
    graph: PathBuf,
    /// Edge weight law JSON.
    #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
    law: Option<PathBuf>,
    /// Host graph size.
    #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
    n: Option<usize>,
    /// Edge retention probability.
    #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
    p: Option<f64>,
    /// Grid over host sizes and retention probabilities.
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Pilot sample count used to standardize the weight.
    #[arg(long, default_value_t = 100_000, conflicts_with = "sweep")]
    pilot: usize,
    /// How edge weights combine within one copy.
    #[arg(long, value_enum, default_value_t = ConventionArg::Product)]
    convention: ConventionArg,
    #[command(flatten)]
    common: Common,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum ConventionArg {
    Product,
    Sum,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Product => Convention::Product,
            ConventionArg::Sum => Convention::Sum,
        }
    }
}

#[derive(Serialize)]
struct Row {
    n: usize,
    p: f64,
    min_subgraph_scale: f64,
    rate: Bound,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<GraphPoint>,
}

#[derive(Serialize)]
struct Report {
    #[serde(flatten)]
    header: Header,
    graph: GraphFile,
    law: LawSpec,
    convention: Convention,
    automorphisms: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepConfig>,
    rows: Vec<Row>,
}

struct Point {
    n: usize,
    p: f64,
    seed: u64,
    samples: usize,
    pilot: usize,
    delta: f64,
    index: u64,
}

fn row(
    g: &GraphFile,
    law: &be_core::dist::Distribution,
    conv: Convention,
    pt: &Point,
    constant: Option<f64>,
) -> CliResult<Row> {
    let spec = g.build()?;
    let rate = rg_rate(&spec, pt.n, pt.p, law)?;
    let simulation = if pt.samples > 0 {
        let run = GraphRun {
            n: pt.n,
            p: pt.p,
            convention: conv,
            pilot_samples: pt.pilot.max(be_core::mc::MIN_SAMPLES),
            samples: pt.samples,
            delta: pt.delta,
            seed: pt.seed,
            stream_base: pt.index << 32,
        };
        Some(run_point(&spec, law, &run)?)
    } else {
        None
    };
    Ok(Row {
        n: pt.n,
        p: pt.p,
        min_subgraph_scale: min_subgraph_scale(&spec, pt.n, pt.p)?,
        rate: Bound::rate("rg", rate, constant),
        simulation,
    })
}

pub fn run(args: GraphArgs) -> CliResult<()> {
    let common = &args.common;
    check_samples(common)?;
    let conv: Convention = args.convention.into();
    let mut cfg = RunConfig::new("graph", common);
    cfg.set("convention", conv);
    let graph: GraphFile = parse("graph", &cfg.read("graph", &args.graph)?)?;
    let spec = graph.build()?;
    let mut points = Vec::new();
    let (law_spec, sweep) = if let Some(path) = &args.sweep {
        require_out(common)?;
        let sweep: SweepConfig = parse("sweep config", &cfg.read("sweep", path)?)?;
        let local = Common {
            seed: sweep.seed,
            samples: sweep.samples,
            delta: sweep.delta,
            ..common.clone()
        };
        check_samples(&local)?;
        for &n in &sweep.n {
            for &p in &sweep.p {
                points.push(Point {
                    n,
                    p,
                    seed: sweep.seed,
                    samples: sweep.samples,
                    pilot: sweep.pilot_samples,
                    delta: sweep.delta,
                    index: points.len() as u64,
                });
            }
        }
        (sweep.law.clone(), Some(sweep))
    } else {
        let law_spec: LawSpec = parse(
            "law",
            &cfg.read("law", args.law.as_ref().expect("required by clap"))?,
        )?;
        cfg.set("n", args.n);
        cfg.set("p", args.p);
        cfg.set("pilot", args.pilot);
        points.push(Point {
            n: args.n.expect("required by clap"),
            p: args.p.expect("required by clap"),
            seed: common.seed,
            samples: common.samples,
            pilot: args.pilot,
            delta: common.delta,
            index: 0,
        });
        (law_spec, None)
    };
    let law = law_spec.build()?;
    let rows = points
        .iter()
        .map(|pt| row(&graph, &law, conv, pt, common.constant))
        .collect::<CliResult<Vec<_>>>()?;
    let header = Header::new(&cfg, common);
    let seed = sweep.as_ref().map_or(common.seed, |s| s.seed);
    if sweep.is_some() {
        let csv: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let sim = r.simulation.as_ref();
                vec![
                    r.n.to_string(),
                    r.p.to_string(),
                    r.rate.value.to_string(),
                    fmt_opt(sim.map(|s| s.kdist.value)),
                    fmt_opt(sim.map(|s| s.kdist.dkw)),
                ]
            })
            .collect();
        write_csv(require_out(common)?, "n,p,rg_rate,dk_emp,dkw", &csv)?;
    }
    let report = Report {
        header: Header { seed, ..header },
        automorphisms: spec.automorphisms(),
        graph,
        law: law_spec,
        convention: conv,
        sweep,
        rows,
    };
    write_json(common.out.as_ref(), &report)
}
