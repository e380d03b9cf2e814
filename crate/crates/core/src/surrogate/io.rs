//! Text formats for trained networks.
//!
//! A model file starts with `version,layer_sizes,activation` (layer sizes
//! joined by `-`, e.g. `1,16-10-10-10-4,tanh`), followed by two lines per
//! layer: its row-major weights and its biases.
//!
//! An ensemble file is a small `key,value` manifest naming the dims, the
//! noise power used by the feature transform, the normalisation sidecar and
//! the base/top model files, and whether users are canonically ordered.
//! Paths are relative to the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::scenario::io::{format_norm, parse_norm};
use crate::scenario::NormStats;

use super::ensemble::EnsembleModel;
use super::mlp::MlpModel;

pub const MODEL_VERSION: u32 = 1;
const ENSEMBLE_MAGIC: &str = "noma-ensemble,1";

fn join<T: Real>(values: &[T]) -> String {
    let mut s = String::new();
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        write!(s, "{v:e}").unwrap();
    }
    s
}

pub fn format_model<T: Real>(m: &MlpModel<T>) -> String {
    let sizes: Vec<String> = m.layer_sizes().iter().map(usize::to_string).collect();
    let mut out = format!("{MODEL_VERSION},{},tanh\n", sizes.join("-"));
    for l in 0..m.depth() {
        out.push_str(&join(m.weights(l)));
        out.push('\n');
        out.push_str(&join(m.bias(l)));
        out.push('\n');
    }
    out
}

pub fn parse_model<T: Real>(text: &str) -> Result<MlpModel<T>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty model file".into()))?;
    let h: Vec<&str> = header.split(',').collect();
    if h.len() != 3 {
        return Err(Error::Parse(format!("bad model header {header:?}")));
    }
    if h[0].trim() != MODEL_VERSION.to_string() {
        return Err(Error::Parse(format!("unsupported model version {}", h[0])));
    }
    if h[2].trim() != "tanh" {
        return Err(Error::Parse(format!("unsupported activation {}", h[2])));
    }
    let sizes = h[1]
        .split('-')
        .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad layer size {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut params = Vec::new();
    for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        for v in line.split(',') {
            params.push(v.trim().parse::<T>().map_err(|_| Error::Parse(format!("line {}: bad value {v:?}", k + 2)))?);
        }
    }
    MlpModel::from_params(&sizes, params).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_model<T: Real>(path: &Path, m: &MlpModel<T>) -> Result<()> {
    Ok(fs::write(path, format_model(m))?)
}

pub fn read_model<T: Real>(path: &Path) -> Result<MlpModel<T>> {
    parse_model(&fs::read_to_string(path)?)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("ensemble");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}

/// Writes the manifest at `path` and every referenced file next to it
/// (`<stem>.base<k>.model`, `<stem>.top.model`, `<stem>.norm`).
pub fn write_ensemble<T: Real>(path: &Path, e: &EnsembleModel<T>) -> Result<()> {
    let mut manifest = format!("{ENSEMBLE_MAGIC}\ndims,{}\nnoise_power,{:e}\n", e.dims, e.noise_power);
    let norm = sibling(path, "norm");
    fs::write(&norm, format_norm(&e.normalization))?;
    writeln!(manifest, "norm,{}", file_name(&norm)).unwrap();
    writeln!(manifest, "users,{}", if e.normalization.canonical { "canonical" } else { "fixed" }).unwrap();
    for (k, b) in e.base_models.iter().enumerate() {
        let p = sibling(path, &format!("base{}.model", k + 1));
        write_model(&p, b)?;
        writeln!(manifest, "base,{}", file_name(&p)).unwrap();
    }
    let top = sibling(path, "top.model");
    write_model(&top, &e.top_model)?;
    writeln!(manifest, "top,{}", file_name(&top)).unwrap();
    Ok(fs::write(path, manifest)?)
}

pub fn read_ensemble<T: Real>(path: &Path) -> Result<EnsembleModel<T>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(ENSEMBLE_MAGIC) {
        return Err(Error::Parse(format!("{} is not an ensemble manifest", path.display())));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let (mut dims, mut noise, mut norm, mut top) = (None, None, None, None);
    let mut canonical = true;
    let mut bases = Vec::new();
    for line in lines {
        let (key, value) =
            line.split_once(',').ok_or_else(|| Error::Parse(format!("bad manifest line {line:?}")))?;
        let value = value.trim();
        match key.trim() {
            "dims" => dims = Some(value.parse::<Dims>()?),
            "noise_power" => {
                noise = Some(value.parse::<T>().map_err(|_| Error::Parse(format!("bad noise power {value:?}")))?)
            }
            "norm" => norm = Some(parse_norm::<T>(&fs::read_to_string(dir.join(value))?)?),
            "users" => {
                canonical = match value {
                    "canonical" => true,
                    "fixed" => false,
                    _ => return Err(Error::Parse(format!("bad user order {value:?}"))),
                }
            }
            "base" => bases.push(read_model::<T>(&dir.join(value))?),
            "top" => top = Some(read_model::<T>(&dir.join(value))?),
            other => return Err(Error::Parse(format!("unknown manifest key {other:?}"))),
        }
    }
    let missing = |what: &str| Error::Parse(format!("manifest lacks {what}"));
    let e = EnsembleModel {
        dims: dims.ok_or_else(|| missing("dims"))?,
        noise_power: noise.ok_or_else(|| missing("noise_power"))?,
        normalization: NormStats { canonical, ..norm.ok_or_else(|| missing("norm"))? },
        top_model: top.ok_or_else(|| missing("top"))?,
        base_models: bases,
    };
    let m = e.dims.users;
    let shapes_ok = e.base_models.len() >= 2
        && e.base_models.iter().all(|b| b.input_len() == e.dims.feature_len() && b.output_len() == m)
        && e.top_model.input_len() == e.base_models.len() * m
        && e.top_model.output_len() == m
        && e.normalization.mean.len() == e.dims.feature_len();
    if !shapes_ok {
        return Err(Error::Dimension(format!("ensemble files are inconsistent with {}", e.dims)));
    }
    Ok(e)
}
