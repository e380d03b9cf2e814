use rayon::prelude::*;

use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::scenario::features::Scratch;
use crate::scenario::{CanonicalFeatures, Dataset, EffectiveGainMatrix, NormStats, SplitDataset};

use super::decode::{accuracy, decode_with, permutation_decode};
use super::mlp::MlpModel;
use super::train::{train, TrainConfig};
use super::LabelVector;

/// Hidden widths of the default base learners.
pub const DEFAULT_BASE_HIDDEN: [&[usize]; 3] = [&[10, 10, 10], &[10, 10, 10, 10], &[20, 20, 20]];
/// Hidden widths of the default top model.
pub const DEFAULT_TOP_HIDDEN: &[usize] = &[20];

/// Architecture and initialisation seed of one network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetSpec {
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl NetSpec {
    pub fn layer_sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend(&self.hidden);
        s.push(output);
        s
    }
}

/// The three default base learners, seeded `seed`, `seed + 1`, `seed + 2`.
pub fn default_base_specs(seed: u64) -> Vec<NetSpec> {
    DEFAULT_BASE_HIDDEN
        .iter()
        .enumerate()
        .map(|(k, h)| NetSpec { hidden: h.to_vec(), seed: seed.wrapping_add(k as u64) })
        .collect()
}

/// Regression targets: labels minus their mean over the training split.
/// Every label vector holds each of `1..=N` exactly `A` times, so that mean
/// is always `(N + 1) / 2`.
pub fn regression_targets<T: Real>(targets: &[LabelVector], offset: T) -> Vec<Vec<T>> {
    targets.iter().map(|t| t.as_slice().iter().map(|&l| T::from_count(l) - offset).collect()).collect()
}

pub fn label_mean<T: Real>(targets: &[LabelVector]) -> T {
    let total: usize = targets.iter().flat_map(|t| t.as_slice()).sum();
    let count: usize = targets.iter().map(|t| t.as_slice().len()).sum();
    T::from_count(total) / T::from_count(count.max(1))
}

/// Network inputs and regression targets for `d`, both in each sample's
/// canonical user order.
fn training_pairs<T: Real>(d: &Dataset<T>, stats: &NormStats<T>, offset: T) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
    let targets = regression_targets(&d.targets, offset);
    let mut xs = Vec::with_capacity(d.len());
    let mut ys = Vec::with_capacity(d.len());
    for (f, y) in d.features.iter().zip(&targets) {
        let c = stats.apply(f, d.dims, d.noise_power())?;
        ys.push(c.to_canonical(y));
        xs.push(c.values);
    }
    Ok((xs, ys))
}

fn split_stats<T: Real>(split: &SplitDataset<T>) -> Result<&NormStats<T>> {
    split.train.normalization.as_ref().ok_or_else(|| Error::Split("training split has no normalisation".into()))
}

#[derive(Debug, Clone)]
pub struct TrainedNet<T> {
    pub model: MlpModel<T>,
    pub history: Vec<f64>,
}

/// Trains each base learner on the training split only. Learners are
/// independent and run in parallel; each is deterministic in its seed.
pub fn train_bases<T: Real>(
    split: &SplitDataset<T>,
    specs: &[NetSpec],
    cfg: &TrainConfig<T>,
) -> Result<Vec<TrainedNet<T>>> {
    let stats = split_stats(split)?;
    let dims = split.train.dims;
    let (xs, ys) = training_pairs(&split.train, stats, label_mean(&split.train.targets))?;
    specs
        .par_iter()
        .map(|spec| {
            let init = MlpModel::init(&spec.layer_sizes(dims.feature_len(), dims.users), spec.seed)?;
            let cfg = TrainConfig { seed: spec.seed, ..cfg.clone() };
            let out = train(&init, &xs, &ys, &cfg)?;
            Ok(TrainedNet { model: out.model, history: out.history })
        })
        .collect()
}

/// Samples per block in [`EnsembleModel::predict_batch`].
const PREDICT_BLOCK: usize = 256;

/// Bases plus a top model trained on their stacked validation predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel<T> {
    pub dims: Dims,
    pub noise_power: T,
    pub base_models: Vec<MlpModel<T>>,
    pub top_model: MlpModel<T>,
    pub normalization: NormStats<T>,
}

/// Fits the top model on base-model outputs for the validation split.
/// Bases are used as given and never refit; test data is never touched.
pub fn stack_train<T: Real>(
    bases: Vec<MlpModel<T>>,
    split: &SplitDataset<T>,
    top: &NetSpec,
    top_cfg: &TrainConfig<T>,
) -> Result<(EnsembleModel<T>, Vec<f64>)> {
    if bases.len() < 2 {
        return Err(Error::Parameter(format!("stacking needs at least 2 base models, got {}", bases.len())));
    }
    if split.validation.is_empty() {
        return Err(Error::Split("empty validation split".into()));
    }
    let dims = split.train.dims;
    let stats = split_stats(split)?.clone();
    if bases.iter().any(|b| b.input_len() != dims.feature_len() || b.output_len() != dims.users) {
        return Err(Error::Shape(format!("base model shape does not fit {dims}")));
    }
    let top_init = MlpModel::init(&top.layer_sizes(bases.len() * dims.users, dims.users), top.seed)?;
    let mut ensemble = EnsembleModel {
        dims,
        noise_power: split.train.noise_power(),
        base_models: bases,
        top_model: top_init,
        normalization: stats,
    };
    let (xs, ys) = training_pairs(&split.validation, &ensemble.normalization, label_mean(&split.train.targets))?;
    let stacked: Vec<Vec<T>> = xs.iter().map(|x| ensemble.stack(x, &mut Default::default())).collect::<Result<_>>()?;
    let out = train(&ensemble.top_model, &stacked, &ys, &TrainConfig { seed: top.seed, ..top_cfg.clone() })?;
    ensemble.top_model = out.model;
    Ok((ensemble, out.history))
}

/// Per-model accuracies on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub samples: usize,
    pub base: Vec<f64>,
    pub top: f64,
}

impl<T: Real> EnsembleModel<T> {
    pub fn num_bases(&self) -> usize {
        self.base_models.len()
    }

    fn check(&self) -> Result<()> {
        let m = self.dims.users;
        if self.top_model.input_len() != self.num_bases() * m || self.top_model.output_len() != m {
            return Err(Error::Shape("top model width differs from num_bases * M".into()));
        }
        Ok(())
    }

    fn normalise(&self, raw: &[T]) -> Result<CanonicalFeatures<T>> {
        if raw.len() != self.dims.feature_len() {
            return Err(Error::Dimension(format!("{} features for a {} model", raw.len(), self.dims)));
        }
        self.normalization.apply(raw, self.dims, self.noise_power)
    }

    /// Concatenated base outputs (canonical order) for a prepared input.
    fn stack(&self, x: &[T], buf: &mut (Vec<T>, Vec<T>)) -> Result<Vec<T>> {
        let mut z = Vec::with_capacity(self.num_bases() * self.dims.users);
        for b in &self.base_models {
            if b.input_len() != x.len() || b.output_len() != self.dims.users {
                return Err(Error::Shape(format!("base model shape does not fit {}", self.dims)));
            }
            z.extend_from_slice(b.forward_buffered(x, buf));
        }
        Ok(z)
    }

    /// Decoded predictions of every base model and of the top model
    /// (last entry) for one raw feature row.
    pub fn predict_all(&self, raw: &[T]) -> Result<Vec<LabelVector>> {
        self.check()?;
        let c = self.normalise(raw)?;
        let mut buf = Default::default();
        let z = self.stack(&c.values, &mut buf)?;
        let m = self.dims.users;
        let mut out: Vec<LabelVector> =
            z.chunks(m).map(|o| permutation_decode(&c.from_canonical(o), self.dims)).collect::<Result<_>>()?;
        out.push(permutation_decode(&c.from_canonical(self.top_model.forward_buffered(&z, &mut buf)), self.dims)?);
        Ok(out)
    }

    pub fn predict_features(&self, raw: &[T]) -> Result<LabelVector> {
        self.check()?;
        let c = self.normalise(raw)?;
        let mut buf = Default::default();
        let z = self.stack(&c.values, &mut buf)?;
        permutation_decode(&c.from_canonical(self.top_model.forward_buffered(&z, &mut buf)), self.dims)
    }

    pub fn predict(&self, r: &EffectiveGainMatrix<T>) -> Result<LabelVector> {
        if r.dims() != self.dims {
            return Err(Error::Dimension(format!("{} gains for a {} model", r.dims(), self.dims)));
        }
        self.predict_features(r.flatten())
    }

    /// Top-model predictions for many raw feature rows; same results as
    /// [`Self::predict_features`] row by row. Rows are processed in blocks
    /// through all networks at once.
    pub fn predict_batch(&self, rows: &[Vec<T>]) -> Result<Vec<LabelVector>> {
        self.check()?;
        let blocks: Vec<Vec<LabelVector>> =
            rows.par_chunks(PREDICT_BLOCK).map(|block| self.predict_block(block)).collect::<Result<_>>()?;
        Ok(blocks.into_iter().flatten().collect())
    }

    fn predict_block(&self, rows: &[Vec<T>]) -> Result<Vec<LabelVector>> {
        let (m, width, batch) = (self.dims.users, self.dims.feature_len(), rows.len());
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Dimension(format!("{} features for a {} model", r.len(), self.dims)));
        }
        if self.normalization.mean.len() != width {
            return Err(Error::Dimension(format!("normalisation for {} features, model takes {width}", self.normalization.mean.len())));
        }
        let mut scratch = Scratch::default();
        let mut orders = vec![0; m * batch];
        let mut xs = vec![T::zero(); width * batch];
        for (s, (row, order)) in rows.iter().zip(orders.chunks_exact_mut(m)).enumerate() {
            self.normalization.apply_strided(row, self.dims, self.noise_power, &mut scratch, order, &mut xs[s..], batch);
        }
        let mut buf = Default::default();
        let mut z = Vec::with_capacity(self.num_bases() * m * batch);
        for b in &self.base_models {
            if b.input_len() != width || b.output_len() != m {
                return Err(Error::Shape(format!("base model shape does not fit {}", self.dims)));
            }
            z.extend_from_slice(b.forward_batch(&xs, batch, &mut buf));
        }
        let out = self.top_model.forward_batch(&z, batch, &mut buf);
        let (mut user_out, mut sort) = (vec![T::zero(); m], Vec::new());
        Ok(orders
            .chunks_exact(m)
            .enumerate()
            .map(|(s, order)| {
                for (k, &i) in order.iter().enumerate() {
                    user_out[i] = out[k * batch + s];
                }
                decode_with(&user_out, self.dims, &mut sort)
            })
            .collect())
    }

    /// Accuracy of each base and of the top model on `d`.
    pub fn evaluate(&self, d: &Dataset<T>) -> Result<AccuracyReport> {
        if d.dims != self.dims {
            return Err(Error::Dimension(format!("{} dataset for a {} model", d.dims, self.dims)));
        }
        let preds: Vec<Vec<LabelVector>> = d.features.par_iter().map(|r| self.predict_all(r)).collect::<Result<_>>()?;
        let per_model = |k: usize| -> Result<f64> {
            let p: Vec<LabelVector> = preds.iter().map(|row| row[k].clone()).collect();
            accuracy(&p, &d.targets)
        };
        Ok(AccuracyReport {
            samples: d.len(),
            base: (0..self.num_bases()).map(per_model).collect::<Result<_>>()?,
            top: per_model(self.num_bases())?,
        })
    }
}
