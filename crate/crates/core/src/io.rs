//! Flat-file serialization: a textual header (key = value lines) plus CSV
//! bodies for vectors and matrices. No binary formats; all floats are
//! written in Rust's shortest round-trip representation, so re-reading a
//! file reproduces the values bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write as IoWrite};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gamp::ScalarChannelResult;
use crate::mat::Mat;
use crate::model::{OutputChannel, ProblemInstance, SignalPrior, Slab};

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("expected a real number, got {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("expected a nonnegative integer, got {s:?}")))
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim()
        .parse::<u64>()
        .map_err(|_| Error::Parse(format!("expected a seed integer, got {s:?}")))
}

fn csv_row(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_csv_row(line: &str) -> Result<Vec<f64>> {
    line.split(',').map(parse_f64).collect()
}

/// Writes an instance: header with dimensions, seed, prior, and channel,
/// then one section per vector and the matrix as CSV rows.
pub fn write_instance(path: &Path, instance: &ProblemInstance) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    let n = instance.x.len();
    let m = instance.y.len();
    writeln!(out, "format = instance-v1")?;
    writeln!(out, "n = {n}")?;
    writeln!(out, "m = {m}")?;
    writeln!(out, "seed = {}", instance.seed)?;
    writeln!(out, "sparsity = {}", instance.prior.sparsity)?;
    match instance.prior.slab {
        Slab::Gaussian { sigma2 } => {
            writeln!(out, "slab = gaussian")?;
            writeln!(out, "sigma2 = {sigma2}")?;
        }
        Slab::Weibull { lambda, shape } => {
            writeln!(out, "slab = weibull")?;
            writeln!(out, "lambda = {lambda}")?;
            writeln!(out, "shape = {shape}")?;
        }
    }
    match instance.channel {
        OutputChannel::Awgn { noise_variance } => {
            writeln!(out, "channel = awgn")?;
            writeln!(out, "noise_variance = {noise_variance}")?;
        }
        OutputChannel::Poisson { scaling } => {
            writeln!(out, "channel = poisson")?;
            writeln!(out, "scaling = {scaling}")?;
        }
    }
    writeln!(out, "[x]")?;
    writeln!(out, "{}", csv_row(&instance.x))?;
    writeln!(out, "[w]")?;
    writeln!(out, "{}", csv_row(&instance.w))?;
    writeln!(out, "[y]")?;
    writeln!(out, "{}", csv_row(&instance.y))?;
    writeln!(out, "[matrix]")?;
    for i in 0..m {
        writeln!(out, "{}", csv_row(instance.matrix.row(i)))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads back an instance written by `write_instance`.
pub fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let file = File::open(path)?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()?;
    let mut header = std::collections::HashMap::new();
    let mut idx = 0;
    while idx < lines.len() && !lines[idx].starts_with('[') {
        let line = lines[idx].trim();
        idx += 1;
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("malformed header line {line:?}")))?;
        header.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| -> Result<&String> {
        header
            .get(k)
            .ok_or_else(|| Error::Parse(format!("missing header field {k:?}")))
    };
    if get("format")? != "instance-v1" {
        return Err(Error::Parse("unrecognized instance format".into()));
    }
    let n = parse_usize(get("n")?)?;
    let m = parse_usize(get("m")?)?;
    let seed = parse_u64(get("seed")?)?;
    let sparsity = parse_f64(get("sparsity")?)?;
    let prior = match get("slab")?.as_str() {
        "gaussian" => SignalPrior::sparse_gaussian(sparsity, parse_f64(get("sigma2")?)?)?,
        "weibull" => SignalPrior::sparse_weibull(
            sparsity,
            parse_f64(get("lambda")?)?,
            parse_f64(get("shape")?)?,
        )?,
        other => return Err(Error::Parse(format!("unknown slab {other:?}"))),
    };
    let channel = match get("channel")?.as_str() {
        "awgn" => OutputChannel::Awgn {
            noise_variance: parse_f64(get("noise_variance")?)?,
        },
        "poisson" => OutputChannel::Poisson {
            scaling: parse_f64(get("scaling")?)?,
        },
        other => return Err(Error::Parse(format!("unknown channel {other:?}"))),
    };

    let mut x = Vec::new();
    let mut w = Vec::new();
    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut section = String::new();
    for line in &lines[idx..] {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = line.to_string();
            continue;
        }
        match section.as_str() {
            "[x]" => x = parse_csv_row(line)?,
            "[w]" => w = parse_csv_row(line)?,
            "[y]" => y = parse_csv_row(line)?,
            "[matrix]" => rows.push(parse_csv_row(line)?),
            other => return Err(Error::Parse(format!("unexpected section {other:?}"))),
        }
    }
    if x.len() != n || w.len() != m || y.len() != m || rows.len() != m {
        return Err(Error::Parse(
            "section lengths disagree with the header dimensions".into(),
        ));
    }
    let matrix = Mat::from_rows(rows)?;
    if matrix.cols() != n {
        return Err(Error::Parse("matrix width disagrees with n".into()));
    }
    Ok(ProblemInstance {
        x,
        matrix,
        w,
        y,
        channel,
        prior,
        seed,
    })
}

/// Scalar-channel result: header with μ, iteration count, and the μ
/// trajectory, then per-component rows (index, q, x_mmse, x_var).
pub fn write_scalar_result(path: &Path, result: &ScalarChannelResult) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# mu = {}", result.mu)?;
    writeln!(out, "# iterations_run = {}", result.iterations_run)?;
    writeln!(out, "# mu_trajectory = {}", csv_row(&result.mu_trajectory))?;
    writeln!(out, "# floor_hits = {}", result.floor_hits)?;
    writeln!(out, "index,q,x_mmse,x_var")?;
    for j in 0..result.q.len() {
        writeln!(
            out,
            "{j},{},{},{}",
            result.q[j], result.x_mmse[j], result.x_var[j]
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Reads back a scalar-channel result written by `write_scalar_result`.
pub fn read_scalar_result(path: &Path) -> Result<ScalarChannelResult> {
    let file = File::open(path)?;
    let mut mu = None;
    let mut iterations_run = None;
    let mut mu_trajectory = Vec::new();
    let mut floor_hits = 0;
    let mut q = Vec::new();
    let mut x_mmse = Vec::new();
    let mut x_var = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line == "index,q,x_mmse,x_var" {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed header line {line:?}")))?;
            match k.trim() {
                "mu" => mu = Some(parse_f64(v)?),
                "iterations_run" => iterations_run = Some(parse_usize(v)?),
                "mu_trajectory" => mu_trajectory = parse_csv_row(v.trim())?,
                "floor_hits" => floor_hits = parse_usize(v)?,
                other => return Err(Error::Parse(format!("unknown header field {other:?}"))),
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("expected 4 columns, got {line:?}")));
        }
        q.push(parse_f64(fields[1])?);
        x_mmse.push(parse_f64(fields[2])?);
        x_var.push(parse_f64(fields[3])?);
    }
    Ok(ScalarChannelResult {
        q,
        mu: mu.ok_or_else(|| Error::Parse("missing mu header".into()))?,
        x_mmse,
        x_var,
        iterations_run: iterations_run
            .ok_or_else(|| Error::Parse("missing iterations_run header".into()))?,
        mu_trajectory,
        floor_hits,
    })
}

/// Estimate vector as (index, value) CSV rows.
pub fn write_estimate(path: &Path, estimate: &[f64]) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "index,estimate")?;
    for (j, v) in estimate.iter().enumerate() {
        writeln!(out, "{j},{v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads back an estimate written by `write_estimate`.
pub fn read_estimate(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path)?;
    let mut values = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line == "index,estimate" {
            continue;
        }
        let (_, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("expected 2 columns, got {line:?}")))?;
        values.push(parse_f64(v)?);
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OutputChannel, ProblemInstance, SignalPrior};

    #[test]
    fn instance_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("instance.txt");
        let prior = SignalPrior::sparse_gaussian(0.25, 1.0).unwrap();
        let channel = OutputChannel::Awgn {
            noise_variance: 3e-4,
        };
        let instance = ProblemInstance::generate(prior, channel, 12, 6, 99).unwrap();
        write_instance(&path, &instance).unwrap();
        let back = read_instance(&path).unwrap();
        assert_eq!(back.x, instance.x);
        assert_eq!(back.w, instance.w);
        assert_eq!(back.y, instance.y);
        assert_eq!(back.seed, instance.seed);
        assert_eq!(back.prior, instance.prior);
        assert_eq!(back.channel, instance.channel);
        for i in 0..6 {
            assert_eq!(back.matrix.row(i), instance.matrix.row(i));
        }
    }

    #[test]
    fn poisson_instance_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("instance.txt");
        let prior = SignalPrior::sparse_weibull(0.1, 1.0, 0.5).unwrap();
        let channel = OutputChannel::Poisson { scaling: 100.0 };
        let instance = ProblemInstance::generate(prior, channel, 10, 5, 7).unwrap();
        write_instance(&path, &instance).unwrap();
        let back = read_instance(&path).unwrap();
        assert_eq!(back.y, instance.y);
        assert_eq!(back.channel, instance.channel);
    }

    #[test]
    fn scalar_result_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scalar.csv");
        let result = ScalarChannelResult {
            q: vec![0.1, -2.5, 3.25],
            mu: 0.0123,
            x_mmse: vec![0.05, -2.4, 3.1],
            x_var: vec![0.01, 0.02, 0.03],
            iterations_run: 17,
            mu_trajectory: vec![1.0, 0.5, 0.0123],
            floor_hits: 2,
        };
        write_scalar_result(&path, &result).unwrap();
        let back = read_scalar_result(&path).unwrap();
        assert_eq!(back.q, result.q);
        assert_eq!(back.mu, result.mu);
        assert_eq!(back.x_mmse, result.x_mmse);
        assert_eq!(back.x_var, result.x_var);
        assert_eq!(back.iterations_run, result.iterations_run);
        assert_eq!(back.mu_trajectory, result.mu_trajectory);
        assert_eq!(back.floor_hits, result.floor_hits);
    }

    #[test]
    fn estimate_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("estimate.csv");
        let est = vec![0.0, -1.5, 2.25e-7];
        write_estimate(&path, &est).unwrap();
        assert_eq!(read_estimate(&path).unwrap(), est);
    }

    #[test]
    fn missing_header_field_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "format = instance-v1\nn = 4\n[x]\n1,2,3,4\n").unwrap();
        assert!(read_instance(&path).is_err());
    }
}
