use std::path::PathBuf;

use be_core::io::{KernelTableFile, WeightFile};
use be_core::mc::KDistReport;
use be_core::qform::{analyze, SymMatrix};
use be_core::rng::replicate;
use be_core::ustat::{ustat_rate, ustat_sample, variance, UKernel, UStatRate};
use clap::Args;
use serde::Serialize;

use crate::report::*;
use crate::Common;

#[derive(Args)]
pub struct UstatArgs {
    /// Weight JSON.
    #[arg(long)]
    weights: PathBuf,
    /// Kernel table JSON; its law is the coordinate law.
    #[arg(long)]
    kernel: PathBuf,
    #[command(flatten)]
    common: Common,
}

/// For order 2 with the product kernel the statistic is half the quadratic
/// form with matrix `w`, and the U-statistic rate is twice its `r2` rate.
#[derive(Serialize)]
struct CrossCheck {
    qform_rate_r2: f64,
    ratio: f64,
    expected_ratio: f64,
}

#[derive(Serialize)]
struct Report {
    #[serde(flatten)]
    header: Header,
    order: usize,
    n: usize,
    variance: f64,
    rate: UStatRate,
    bounds: Vec<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    qform_crosscheck: Option<CrossCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical: Option<KDistReport>,
}

pub fn run(args: UstatArgs) -> CliResult<()> {
    let common = &args.common;
    check_samples(common)?;
    let mut cfg = RunConfig::new("ustat", common);
    let w = parse::<WeightFile>("weights", &cfg.read("weights", &args.weights)?)?.build()?;
    let g = parse::<KernelTableFile>("kernel", &cfg.read("kernel", &args.kernel)?)?.build()?;
    if w.order() != g.order() {
        return Err(CliError::input(format!(
            "weights have order {} but the kernel has order {}",
            w.order(),
            g.order()
        )));
    }
    let rate = ustat_rate(&w, &g)?;
    let var = variance(&w, &g);
    if var <= 0.0 {
        return Err(
            be_core::Error::DegenerateVariance("the statistic has zero variance".into()).into(),
        );
    }
    let qform_crosscheck = if w.order() == 2 && g == UKernel::product(g.law(), 2)? {
        let a = SymMatrix::from_fn(w.n(), |i, j| if i == j { 0.0 } else { w.get(&[i, j]) });
        let r2 = analyze(&a, &g.law().moments())?.bound_r2()?;
        Some(CrossCheck {
            qform_rate_r2: r2,
            ratio: rate.rate / r2,
            expected_ratio: 2.0,
        })
    } else {
        None
    };
    let sd = var.sqrt();
    let samples = replicate(common.seed, 0, common.samples, |rng| {
        ustat_sample(&w, &g, rng) / sd
    });
    let report = Report {
        header: Header::new(&cfg, common),
        order: w.order(),
        n: w.n(),
        variance: var,
        bounds: vec![Bound::rate("ustat", rate.rate, common.constant)],
        rate,
        qform_crosscheck,
        empirical: empirical(samples, common)?,
    };
    write_json(common.out.as_ref(), &report)
}
