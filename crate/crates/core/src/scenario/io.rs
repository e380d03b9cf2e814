//! Plain-text dataset files.
//!
//! A dataset file has a header line `M,N,A,B,sigma2,count,seed` followed by
//! one line per sample: the `M*N` effective gains (user-major) and then the
//! `M` one-based subchannel labels, all comma separated. Floats are written
//! in shortest round-trip form, so a write/read cycle is lossless.
//!
//! Normalisation statistics live in a sidecar with extension `.norm`: one
//! line of means and one of standard deviations. Sidecars always describe
//! canonically ordered features.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::surrogate::LabelVector;

use super::{Dataset, GenerationMeta, NormStats};

pub fn norm_path(path: &Path) -> PathBuf {
    path.with_extension("norm")
}

fn join<T: Real>(out: &mut String, values: &[T]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        write!(out, "{v:e}").unwrap();
    }
}

fn parse_num<V: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<V> {
    field.trim().parse().map_err(|_| Error::Parse(format!("line {line}: bad {what} {field:?}")))
}

pub fn format_dataset<T: Real>(d: &Dataset<T>) -> String {
    let Dims { users, subchannels, quota } = d.dims;
    let mut out = format!(
        "{users},{subchannels},{quota},{:e},{:e},{},{}\n",
        d.bandwidth,
        d.noise_density,
        d.len(),
        d.seed
    );
    for (f, t) in d.features.iter().zip(&d.targets) {
        join(&mut out, f);
        for l in t.as_slice() {
            write!(out, ",{l}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_dataset<T: Real>(text: &str) -> Result<Dataset<T>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let h: Vec<&str> = header.split(',').collect();
    if h.len() != 7 {
        return Err(Error::Parse(format!("header has {} fields, expected 7", h.len())));
    }
    let dims = Dims::new(parse_num(h[0], "M", 1)?, parse_num(h[1], "N", 1)?, parse_num(h[2], "A", 1)?)?;
    let bandwidth: T = parse_num(h[3], "bandwidth", 1)?;
    let noise_density: T = parse_num(h[4], "noise density", 1)?;
    let count: usize = parse_num(h[5], "count", 1)?;
    let seed: u64 = parse_num(h[6], "seed", 1)?;

    let width = dims.feature_len();
    let mut features = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for (idx, line) in lines {
        let no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width + dims.users {
            return Err(Error::Parse(format!(
                "line {no}: {} fields, expected {}",
                fields.len(),
                width + dims.users
            )));
        }
        let f = fields[..width].iter().map(|x| parse_num(x, "feature", no)).collect::<Result<Vec<T>>>()?;
        let l = fields[width..].iter().map(|x| parse_num(x, "label", no)).collect::<Result<Vec<usize>>>()?;
        features.push(f);
        targets.push(LabelVector::new(dims, l)?);
    }
    if features.len() != count {
        return Err(Error::Parse(format!("header announces {count} records, found {}", features.len())));
    }
    Ok(Dataset {
        dims,
        bandwidth,
        noise_density,
        seed,
        features,
        targets,
        normalization: None,
        meta: GenerationMeta::default(),
    })
}

pub fn format_norm<T: Real>(stats: &NormStats<T>) -> String {
    let mut out = String::new();
    join(&mut out, &stats.mean);
    out.push('\n');
    join(&mut out, &stats.std);
    out.push('\n');
    out
}

pub fn parse_norm<T: Real>(text: &str) -> Result<NormStats<T>> {
    let rows: Vec<Vec<T>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, l)| l.split(',').map(|x| parse_num(x, "statistic", k + 1)).collect())
        .collect::<Result<_>>()?;
    match <[Vec<T>; 2]>::try_from(rows) {
        Ok([mean, std]) if mean.len() == std.len() => {
            if std.iter().any(|&s| !(s > T::zero())) {
                return Err(Error::Parse("non-positive standard deviation".into()));
            }
            Ok(NormStats { mean, std, canonical: true })
        }
        _ => Err(Error::Parse("normalisation file needs two lines of equal length".into())),
    }
}

/// Writes the dataset and, if present, its `.norm` sidecar.
pub fn write_dataset<T: Real>(path: &Path, d: &Dataset<T>) -> Result<()> {
    fs::write(path, format_dataset(d))?;
    if let Some(stats) = &d.normalization {
        fs::write(norm_path(path), format_norm(stats))?;
    }
    Ok(())
}

/// Reads a dataset; the `.norm` sidecar is loaded when it exists.
pub fn read_dataset<T: Real>(path: &Path) -> Result<Dataset<T>> {
    let mut d = parse_dataset(&fs::read_to_string(path)?)?;
    let np = norm_path(path);
    if np.exists() {
        let stats = parse_norm(&fs::read_to_string(np)?)?;
        if stats.mean.len() != d.dims.feature_len() {
            return Err(Error::Dimension("normalisation width differs from feature width".into()));
        }
        d.normalization = Some(stats);
    }
    Ok(d)
}
