//! Normal CDF and Kolmogorov distances to the standard normal law.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::chaos::RandomFunctional;
use crate::error::{Error, Result};

/// Minimum sample size accepted by [`empirical_kdist`].
pub const MIN_SAMPLES: usize = 100;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KDistReport {
    pub value: f64,
    pub method: Method,
    /// Sample size, empirical method only.
    pub n: Option<u64>,
    /// DKW radius; zero for the exact method.
    pub dkw: f64,
    pub seed: Option<u64>,
}

/// DKW confidence radius `sqrt(ln(2/delta) / (2N))`.
pub fn dkw_radius(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Kolmogorov distance between a finite law given by atoms and the normal
/// law. Atoms may be unsorted and may repeat.
pub fn exact_kdist_atoms(values: &[f64], probs: &[f64]) -> Result<f64> {
    if values.len() != probs.len() || values.is_empty() {
        return Err(Error::Argument("atoms and probabilities must match".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut best: f64 = 0.0;
    let mut below = 0.0;
    let mut i = 0;
    while i < order.len() {
        let a = values[order[i]];
        let mut mass = 0.0;
        while i < order.len() && values[order[i]] == a {
            mass += probs[order[i]];
            i += 1;
        }
        let phi = normal_cdf(a);
        let at = below + mass;
        best = best.max((at - phi).abs()).max((below - phi).abs());
        below = at;
    }
    Ok(best.clamp(0.0, 1.0))
}

/// Exact Kolmogorov distance of a functional on its outcome space.
pub fn exact_kdist(x: &RandomFunctional) -> Result<KDistReport> {
    let value = exact_kdist_atoms(x.values(), x.space().probs())?;
    Ok(KDistReport {
        value,
        method: Method::Exact,
        n: None,
        dkw: 0.0,
        seed: None,
    })
}

/// One-sample Kolmogorov statistic of sorted samples against the normal law.
pub fn kolmogorov_statistic(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let phi = normal_cdf(x);
            ((i + 1) as f64 / n - phi).max(phi - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Empirical Kolmogorov distance with DKW radius at confidence `1 - delta`.
/// Samples are sorted internally if needed.
pub fn empirical_kdist(samples: &[f64], delta: f64, seed: Option<u64>) -> Result<KDistReport> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Argument(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument(format!(
            "delta must be in (0,1), got {delta}"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite sample".into()));
    }
    let sorted_in = samples.windows(2).all(|w| w[0] <= w[1]);
    let value = if sorted_in {
        kolmogorov_statistic(samples)
    } else {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        kolmogorov_statistic(&s)
    };
    Ok(KDistReport {
        value,
        method: Method::Empirical,
        n: Some(samples.len() as u64),
        dkw: dkw_radius(samples.len(), delta),
        seed,
    })
}

/// Writes samples as a little-endian `u64` count followed by `f64` values.
pub fn write_samples_binary<W: Write>(mut w: W, samples: &[f64]) -> Result<()> {
    w.write_all(&(samples.len() as u64).to_le_bytes())?;
    for x in samples {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_samples_binary<R: Read>(mut r: R) -> Result<Vec<f64>> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head)?;
    let n = u64::from_le_bytes(head) as usize;
    let mut out = Vec::with_capacity(n.min(1 << 24));
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

/// One value per line.
pub fn write_samples_csv<W: Write>(mut w: W, samples: &[f64]) -> Result<()> {
    for x in samples {
        writeln!(w, "{x:?}")?;
    }
    Ok(())
}

pub fn read_samples_csv<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(
            t.parse()
                .map_err(|_| Error::Input(format!("line {}: not a number: {t:?}", i + 1)))?,
        );
    }
    Ok(out)
}
