use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::num::Real;

use super::LabelVector;

/// Turns a real-valued network output into a feasible label vector: the
/// user with the `rho`-th smallest value (1-based, ties to the lower index)
/// gets subchannel `ceil(rho / A)`.
pub fn permutation_decode<T: Real>(raw: &[T], dims: Dims) -> Result<LabelVector> {
    dims.validate()?;
    if raw.len() != dims.users {
        return Err(Error::Dimension(format!("{} outputs for {dims}", raw.len())));
    }
    Ok(decode_with(raw, dims, &mut Vec::new()))
}

/// [`permutation_decode`] for already validated shapes, sorting in a
/// caller-owned buffer.
pub(crate) fn decode_with<T: Real>(raw: &[T], dims: Dims, order: &mut Vec<usize>) -> LabelVector {
    order.clear();
    order.extend(0..raw.len());
    // Stable sort keeps equal values in index order; total_cmp gives NaN a
    // fixed place so every input still decodes to something feasible.
    order.sort_by(|&a, &b| raw[a].as_f64().total_cmp(&raw[b].as_f64()));
    let mut labels = vec![0; dims.users];
    for (rank0, &user) in order.iter().enumerate() {
        labels[user] = rank0 / dims.quota + 1;
    }
    // Ranks fill every subchannel exactly `A` times.
    LabelVector::from_ranked(dims, labels)
}

/// Fraction of label positions predicted correctly over all samples.
pub fn accuracy(preds: &[LabelVector], targets: &[LabelVector]) -> Result<f64> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::Shape(format!("{} predictions, {} targets", preds.len(), targets.len())));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for (p, t) in preds.iter().zip(targets) {
        if p.dims() != t.dims() {
            return Err(Error::Shape(format!("prediction for {} vs target for {}", p.dims(), t.dims())));
        }
        hits += p.as_slice().iter().zip(t.as_slice()).filter(|(a, b)| a == b).count();
        total += t.as_slice().len();
    }
    Ok(hits as f64 / total as f64)
}
