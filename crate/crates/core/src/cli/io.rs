//! CSV file formats: sample matrices (one observation per line), model
//! parameter files (section-tagged, one logical value per line) and the run
//! manifest. Floats are written with 17 significant digits so every value
//! round-trips bit-exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::debias::KnownCov;
use crate::error::{Error, Result};
use crate::moments::{Covariance, GmmParams};
use crate::sampling::SampleMatrix;

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad float {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad integer {s:?}")))
}

/// One observation per line, coordinates comma separated.
pub fn write_samples(path: &Path, x: &SampleMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..x.num_samples() {
        let line: Vec<String> = x.data().column(i).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<SampleMatrix> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>> = line.split(',').map(parse_f64).collect();
        let row = row.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} values, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptySamples);
    }
    let p = rows.len();
    let n = rows[0].len();
    let mut data = Array2::<f64>::zeros((n, p));
    for (i, row) in rows.iter().enumerate() {
        for (l, &v) in row.iter().enumerate() {
            data[[l, i]] = v;
        }
    }
    SampleMatrix::new(data)
}

/// Section-tagged model file:
/// `kind`, `dims,n,m`, `weights,...`, then m `mean` lines and either
/// m `stddev` lines (diagonal) or m*n `cov` lines (full, n rows per
/// component).
pub fn write_model(path: &Path, params: &GmmParams) -> Result<()> {
    let (n, m) = params.means().dim();
    let mut out = String::new();
    let kind = if params.is_diagonal() { "diagonal" } else { "full" };
    writeln!(out, "kind,{kind}").unwrap();
    writeln!(out, "dims,{n},{m}").unwrap();
    let weights: Vec<String> = params.weights().iter().map(|&v| fmt_f64(v)).collect();
    writeln!(out, "weights,{}", weights.join(",")).unwrap();
    for j in 0..m {
        let vals: Vec<String> = params.means().column(j).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "mean,{}", vals.join(",")).unwrap();
    }
    match params.covariance() {
        Covariance::Diagonal(stddevs) => {
            for j in 0..m {
                let vals: Vec<String> =
                    stddevs.column(j).iter().map(|&v| fmt_f64(v)).collect();
                writeln!(out, "stddev,{}", vals.join(",")).unwrap();
            }
        }
        Covariance::Full(sigmas) => {
            for sigma in sigmas {
                for r in 0..n {
                    let vals: Vec<String> = sigma.row(r).iter().map(|&v| fmt_f64(v)).collect();
                    writeln!(out, "cov,{}", vals.join(",")).unwrap();
                }
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

struct TaggedLines {
    lines: Vec<(String, Vec<String>)>,
    cursor: usize,
}

impl TaggedLines {
    fn parse(text: &str) -> Self {
        let mut lines = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let tag = parts.next().unwrap_or_default().trim().to_string();
            let rest: Vec<String> = parts.map(|s| s.trim().to_string()).collect();
            lines.push((tag, rest));
        }
        Self { lines, cursor: 0 }
    }

    fn expect(&mut self, tag: &str) -> Result<&[String]> {
        let (got, values) = self
            .lines
            .get(self.cursor)
            .ok_or_else(|| Error::Parse(format!("missing `{tag}` line")))?;
        if got != tag {
            return Err(Error::Parse(format!("expected `{tag}` line, found `{got}`")));
        }
        self.cursor += 1;
        Ok(values)
    }
}

pub fn read_model(path: &Path) -> Result<GmmParams> {
    let text = fs::read_to_string(path)?;
    let mut lines = TaggedLines::parse(&text);
    let kind = lines.expect("kind")?.first().cloned().unwrap_or_default();
    let dims = lines.expect("dims")?.to_vec();
    if dims.len() != 2 {
        return Err(Error::Parse("dims line needs n and m".into()));
    }
    let n = parse_usize(&dims[0])?;
    let m = parse_usize(&dims[1])?;
    let weight_strs = lines.expect("weights")?.to_vec();
    if weight_strs.len() != m {
        return Err(Error::Parse(format!("expected {m} weights")));
    }
    let weights: Result<Vec<f64>> = weight_strs.iter().map(|s| parse_f64(s)).collect();
    let weights = Array1::from_vec(weights?);
    let mut means = Array2::<f64>::zeros((n, m));
    for j in 0..m {
        let vals = lines.expect("mean")?.to_vec();
        if vals.len() != n {
            return Err(Error::Parse(format!("mean line needs {n} values")));
        }
        for (l, s) in vals.iter().enumerate() {
            means[[l, j]] = parse_f64(s)?;
        }
    }
    let covariance = match kind.as_str() {
        "diagonal" => {
            let mut stddevs = Array2::<f64>::zeros((n, m));
            for j in 0..m {
                let vals = lines.expect("stddev")?.to_vec();
                if vals.len() != n {
                    return Err(Error::Parse(format!("stddev line needs {n} values")));
                }
                for (l, s) in vals.iter().enumerate() {
                    stddevs[[l, j]] = parse_f64(s)?;
                }
            }
            Covariance::Diagonal(stddevs)
        }
        "full" => {
            let mut sigmas = Vec::with_capacity(m);
            for _ in 0..m {
                let mut sigma = Array2::<f64>::zeros((n, n));
                for r in 0..n {
                    let vals = lines.expect("cov")?.to_vec();
                    if vals.len() != n {
                        return Err(Error::Parse(format!("cov line needs {n} values")));
                    }
                    for (c, s) in vals.iter().enumerate() {
                        sigma[[r, c]] = parse_f64(s)?;
                    }
                }
                sigmas.push(sigma);
            }
            Covariance::Full(sigmas)
        }
        other => return Err(Error::Parse(format!("unknown model kind {other:?}"))),
    };
    GmmParams::new(weights, means, covariance)
}

/// A single covariance: one `stddev` line or n `cov` lines.
pub fn read_sigma(path: &Path) -> Result<KnownCov> {
    let text = fs::read_to_string(path)?;
    let lines = TaggedLines::parse(&text);
    if lines.lines.is_empty() {
        return Err(Error::Parse("empty covariance file".into()));
    }
    match lines.lines[0].0.as_str() {
        "stddev" => {
            let vals: Result<Vec<f64>> =
                lines.lines[0].1.iter().map(|s| parse_f64(s)).collect();
            Ok(KnownCov::Diagonal(Array1::from_vec(vals?)))
        }
        "cov" => {
            let n = lines.lines[0].1.len();
            if lines.lines.len() < n {
                return Err(Error::Parse(format!("need {n} cov rows")));
            }
            let mut sigma = Array2::<f64>::zeros((n, n));
            for r in 0..n {
                let (tag, vals) = &lines.lines[r];
                if tag != "cov" || vals.len() != n {
                    return Err(Error::Parse("malformed cov row".into()));
                }
                for (c, s) in vals.iter().enumerate() {
                    sigma[[r, c]] = parse_f64(s)?;
                }
            }
            Ok(KnownCov::Full(sigma))
        }
        other => Err(Error::Parse(format!("unknown covariance tag {other:?}"))),
    }
}

pub fn write_sigma(path: &Path, sigma: &KnownCov) -> Result<()> {
    let mut out = String::new();
    match sigma {
        KnownCov::Diagonal(d) => {
            let vals: Vec<String> = d.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(out, "stddev,{}", vals.join(",")).unwrap();
        }
        KnownCov::Full(s) => {
            for r in 0..s.nrows() {
                let vals: Vec<String> = s.row(r).iter().map(|&v| fmt_f64(v)).collect();
                writeln!(out, "cov,{}", vals.join(",")).unwrap();
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Everything needed to re-run a command: resolved configuration, seed and
/// code version. Serialized next to every output set.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub threads: String,
    pub config: BTreeMap<String, String>,
    pub runtime_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            threads: std::env::var("MOMGMM_THREADS").unwrap_or_else(|_| "unset".into()),
            config: BTreeMap::new(),
            runtime_seconds: 0.0,
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("manifest serialization: {e}")))?;
        fs::write(path, json + "\n")?;
        Ok(())
    }
}
