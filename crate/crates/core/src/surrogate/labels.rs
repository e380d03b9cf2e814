use std::fmt;

use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::solver::Assignment;

/// Per-user subchannel indices `x̄_i ∈ {1..N}` (1-based), each index
/// appearing exactly `A` times.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVector {
    dims: Dims,
    labels: Vec<usize>,
}

impl LabelVector {
    pub fn new(dims: Dims, labels: Vec<usize>) -> Result<Self> {
        dims.validate()?;
        if labels.len() != dims.users {
            return Err(Error::Decoding(format!("{} labels for {dims}", labels.len())));
        }
        let mut load = vec![0usize; dims.subchannels];
        for &l in &labels {
            if l == 0 || l > dims.subchannels {
                return Err(Error::Decoding(format!("label {l} outside 1..={}", dims.subchannels)));
            }
            load[l - 1] += 1;
        }
        if let Some(j) = load.iter().position(|&c| c != dims.quota) {
            return Err(Error::Decoding(format!(
                "subchannel {} appears {} times, quota is {}",
                j + 1,
                load[j],
                dims.quota
            )));
        }
        Ok(Self { dims, labels })
    }

    /// Skips validation for labels built by ranking, which are feasible by
    /// construction.
    pub(crate) fn from_ranked(dims: Dims, labels: Vec<usize>) -> Self {
        debug_assert!(Self::new(dims, labels.clone()).is_ok());
        Self { dims, labels }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }
}

impl fmt::Display for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.labels.iter().map(usize::to_string).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// `x̄_i` = the subchannel user `i` occupies.
pub fn encode_labels(a: &Assignment) -> LabelVector {
    LabelVector { dims: a.dims(), labels: a.channels().iter().map(|&j| j + 1).collect() }
}

/// Encodes a raw 0/1 matrix, rejecting anything that is not a valid assignment.
pub fn encode_matrix(dims: Dims, x: &Matrix<u8>) -> Result<LabelVector> {
    Assignment::from_matrix(dims, x).map(|a| encode_labels(&a))
}

/// Inverse of [`encode_labels`]: `x_{i, x̄_i} = 1`.
pub fn decode_labels(labels: &LabelVector, dims: Dims) -> Result<Assignment> {
    if labels.dims != dims {
        return Err(Error::Decoding(format!("labels for {} decoded as {dims}", labels.dims)));
    }
    Assignment::from_channels(dims, labels.labels.iter().map(|&l| l - 1).collect())
}
