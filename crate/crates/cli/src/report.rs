use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use be_core::mc::{empirical_kdist, KDistReport};
use be_core::Error;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Common;

pub const INPUT: u8 = 2;
pub const DEGENERATE: u8 = 3;
pub const IDENTITY: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DegenerateVariance(_) => DEGENERATE,
            _ => INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Identity of a run: the command, its scalar settings and the contents
/// of every input file. Paths do not enter the hash.
#[derive(Serialize)]
pub struct RunConfig {
    command: &'static str,
    settings: BTreeMap<&'static str, serde_json::Value>,
    inputs: BTreeMap<&'static str, String>,
}

impl RunConfig {
    pub fn new(command: &'static str, common: &Common) -> Self {
        let mut c = Self {
            command,
            settings: BTreeMap::new(),
            inputs: BTreeMap::new(),
        };
        c.set("seed", common.seed);
        c.set("samples", common.samples);
        c.set("delta", common.delta);
        c.set("constant", common.constant);
        c
    }

    pub fn set(&mut self, key: &'static str, v: impl Serialize) {
        self.settings.insert(
            key,
            serde_json::to_value(v).expect("plain values serialize"),
        );
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, role: &'static str, path: &Path) -> CliResult<String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        self.inputs.insert(role, sha256_hex(text.as_bytes()));
        Ok(text)
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn parse<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::input(format!("{what}: {e}")))
}

#[derive(Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub constant: Option<f64>,
}

impl Header {
    pub fn new(cfg: &RunConfig, common: &Common) -> Self {
        Self {
            tool: "be",
            version: env!("CARGO_PKG_VERSION"),
            command: cfg.command,
            config_hash: cfg.hash(),
            seed: common.seed,
            constant: common.constant,
        }
    }
}

/// One reported bound. Constant-free rates are only meaningful up to an
/// unknown absolute constant; `scaled` is filled when one was supplied.
#[derive(Serialize, Clone, Debug)]
pub struct Bound {
    pub name: &'static str,
    pub value: f64,
    pub constant_free: bool,
    pub scaled: Option<f64>,
}

impl Bound {
    pub fn rate(name: &'static str, value: f64, constant: Option<f64>) -> Self {
        Self {
            name,
            value,
            constant_free: true,
            scaled: constant.map(|c| c * value),
        }
    }
}

pub fn check_samples(common: &Common) -> CliResult<()> {
    if common.samples > 0 && common.samples < be_core::mc::MIN_SAMPLES {
        return Err(CliError::input(format!(
            "--samples must be 0 or at least {}",
            be_core::mc::MIN_SAMPLES
        )));
    }
    if !(common.delta > 0.0 && common.delta < 1.0) {
        return Err(CliError::input("--delta must lie in (0,1)"));
    }
    if let Some(c) = common.constant {
        if !(c.is_finite() && c > 0.0) {
            return Err(CliError::input("--constant must be positive and finite"));
        }
    }
    Ok(())
}

/// Empirical Kolmogorov distance of standardized draws, if requested.
pub fn empirical(samples: Vec<f64>, common: &Common) -> CliResult<Option<KDistReport>> {
    if samples.is_empty() {
        return Ok(None);
    }
    Ok(Some(empirical_kdist(
        &samples,
        common.delta,
        Some(common.seed),
    )?))
}

pub fn write_json(out: Option<&PathBuf>, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Writes `rows` under `header` next to the JSON report, with extension `.csv`.
pub fn write_csv(json_out: &Path, header: &str, rows: &[Vec<String>]) -> CliResult<PathBuf> {
    let path = json_out.with_extension("csv");
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn require_out(common: &Common) -> CliResult<&PathBuf> {
    common
        .out
        .as_ref()
        .ok_or_else(|| CliError::input("sweep mode needs --out"))
}
