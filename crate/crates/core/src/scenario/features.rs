//! Feature preparation shared by training and inference.
//!
//! Raw effective gains span many orders of magnitude, so each is first
//! mapped to the link spectral efficiency `log2(1 + r / sigma^2 B)`. Each
//! subchannel column then has its mean removed: at high SNR, scaling a
//! subchannel's gains adds a constant to its rate whatever users it carries,
//! so the column offset says nothing about the optimum. With one user per
//! subchannel (A = 1) the same holds exactly for per-user offsets, and rows
//! are centred as well.
//!
//! Users are interchangeable, so their order in the input is arbitrary. The
//! rows are put into a canonical order before they reach a network: users
//! are sorted by the subchannel a greedy assignment on the centred values
//! gives them (largest value first, respecting the quota), then by that
//! value, descending. Networks see and predict users in this order; outputs
//! are mapped back to the original order before decoding.

use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::num::Real;

/// Transformed feature row with the canonical user order it was built in.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFeatures<T> {
    /// `M x N`, row-major, row `k` belonging to user `order[k]`.
    pub values: Vec<T>,
    pub order: Vec<usize>,
}

impl<T: Copy> CanonicalFeatures<T> {
    /// Reorders per-user values (e.g. targets) into canonical order.
    pub fn to_canonical<V: Copy>(&self, per_user: &[V]) -> Vec<V> {
        self.order.iter().map(|&i| per_user[i]).collect()
    }

    /// Inverse of [`Self::to_canonical`].
    pub fn from_canonical<V: Copy + Default>(&self, canonical: &[V]) -> Vec<V> {
        let mut out = vec![V::default(); canonical.len()];
        for (k, &i) in self.order.iter().enumerate() {
            out[i] = canonical[k];
        }
        out
    }
}

/// Centred log-rate matrix of one sample, in the original user order.
pub fn centred_rates<T: Real>(raw: &[T], dims: Dims, noise_power: T) -> Vec<T> {
    let mut v = Vec::new();
    centred_rates_into(raw, dims, noise_power, &mut v);
    v
}

fn centred_rates_into<T: Real>(raw: &[T], dims: Dims, noise_power: T, v: &mut Vec<T>) {
    let (m, n) = (dims.users, dims.subchannels);
    v.clear();
    v.extend(raw.iter().map(|&r| (r / noise_power).ln_1p() / T::LN_2()));
    if dims.quota == 1 {
        for row in v.chunks_mut(n) {
            let mean = row.iter().copied().sum::<T>() / T::from_count(n);
            row.iter_mut().for_each(|x| *x = *x - mean);
        }
    }
    for j in 0..n {
        let mean = (0..m).map(|i| v[i * n + j]).sum::<T>() / T::from_count(m);
        (0..m).for_each(|i| v[i * n + j] = v[i * n + j] - mean);
    }
}

/// Subchannel of each user under greedy largest-value-first assignment with
/// quota `A` (ties to the lower flat index).
pub fn greedy_channels<T: Real>(values: &[T], dims: Dims) -> Vec<usize> {
    let mut s = Scratch::default();
    greedy_into(values, dims, &mut s);
    s.channel
}

fn greedy_into<T: Real>(values: &[T], dims: Dims, s: &mut Scratch<T>) {
    let n = dims.subchannels;
    s.cells.clear();
    s.cells.extend(0..values.len());
    s.cells.sort_by(|&a, &b| values[b].as_f64().total_cmp(&values[a].as_f64()));
    s.channel.clear();
    s.channel.resize(dims.users, usize::MAX);
    s.load.clear();
    s.load.resize(n, 0);
    for &c in &s.cells {
        let (i, j) = (c / n, c % n);
        if s.channel[i] == usize::MAX && s.load[j] < dims.quota {
            s.channel[i] = j;
            s.load[j] += 1;
        }
    }
}

/// Reusable buffers for preparing many samples.
#[derive(Debug, Default)]
pub(crate) struct Scratch<T> {
    v: Vec<T>,
    cells: Vec<usize>,
    channel: Vec<usize>,
    load: Vec<usize>,
}

/// Centred rates of one sample and the canonical user order, written to
/// `s.v` and `order`.
fn prepare<T: Real>(raw: &[T], dims: Dims, noise_power: T, canonical: bool, s: &mut Scratch<T>, order: &mut [usize]) {
    let n = dims.subchannels;
    let mut v = std::mem::take(&mut s.v);
    centred_rates_into(raw, dims, noise_power, &mut v);
    order.iter_mut().enumerate().for_each(|(k, o)| *o = k);
    if canonical {
        greedy_into(&v, dims, s);
        let greedy = &s.channel;
        order.sort_by(|&a, &b| {
            greedy[a]
                .cmp(&greedy[b])
                .then_with(|| v[b * n + greedy[b]].as_f64().total_cmp(&v[a * n + greedy[a]].as_f64()))
        });
    }
    s.v = v;
}

/// Centred rates in canonical user order (identity order when `canonical`
/// is false).
pub fn canonical_features<T: Real>(raw: &[T], dims: Dims, noise_power: T, canonical: bool) -> CanonicalFeatures<T> {
    let n = dims.subchannels;
    let mut s = Scratch::default();
    let mut order = vec![0; dims.users];
    prepare(raw, dims, noise_power, canonical, &mut s, &mut order);
    let values = order.iter().flat_map(|&i| s.v[i * n..(i + 1) * n].iter().copied()).collect();
    CanonicalFeatures { values, order }
}

/// Per-feature z-score statistics of [`canonical_features`], fitted on a
/// training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    /// Whether users are put into canonical order. Turning this off keeps
    /// the input order, for targets that are not tied to the gains (a
    /// canonically ordered model is blind to user identity).
    pub canonical: bool,
}

impl<T: Real> NormStats<T> {
    /// Fits mean and (population) standard deviation of every canonical
    /// feature. Constant features get unit deviation.
    pub fn fit(features: &[Vec<T>], dims: Dims, noise_power: T) -> Result<Self> {
        Self::fit_with(features, dims, noise_power, true)
    }

    pub fn fit_with(features: &[Vec<T>], dims: Dims, noise_power: T, canonical: bool) -> Result<Self> {
        let width = features.first().map(Vec::len).ok_or_else(|| Error::Split("no samples to fit".into()))?;
        let k = T::from_count(features.len());
        let mut mean = vec![T::zero(); width];
        let mut sq = vec![T::zero(); width];
        for row in features {
            for (f, v) in canonical_features(row, dims, noise_power, canonical).values.into_iter().enumerate() {
                mean[f] = mean[f] + v;
                sq[f] = sq[f] + v * v;
            }
        }
        let mean: Vec<T> = mean.into_iter().map(|s| s / k).collect();
        let std = sq
            .into_iter()
            .zip(&mean)
            .map(|(s, &m)| {
                let var = (s / k - m * m).max(T::zero());
                if var > T::zero() {
                    var.sqrt()
                } else {
                    T::one()
                }
            })
            .collect();
        Ok(Self { mean, std, canonical })
    }

    /// Writes the standardised canonical features of one sample to
    /// `out[f * stride]` and its user order to `order`; shapes are the
    /// caller's responsibility.
    pub(crate) fn apply_strided(
        &self,
        raw: &[T],
        dims: Dims,
        noise_power: T,
        s: &mut Scratch<T>,
        order: &mut [usize],
        out: &mut [T],
        stride: usize,
    ) {
        let n = dims.subchannels;
        prepare(raw, dims, noise_power, self.canonical, s, order);
        for (k, &i) in order.iter().enumerate() {
            for j in 0..n {
                let f = k * n + j;
                out[f * stride] = (s.v[i * n + j] - self.mean[f]) / self.std[f];
            }
        }
    }

    /// Canonical, standardised features of one raw sample.
    pub fn apply(&self, raw: &[T], dims: Dims, noise_power: T) -> Result<CanonicalFeatures<T>> {
        if raw.len() != self.mean.len() || raw.len() != dims.feature_len() {
            return Err(Error::Dimension(format!("{} features, stats for {}", raw.len(), self.mean.len())));
        }
        let mut c = canonical_features(raw, dims, noise_power, self.canonical);
        for ((v, &m), &s) in c.values.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
        Ok(c)
    }
}
