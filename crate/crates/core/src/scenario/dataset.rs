use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::oracle::{brute_force_solve, MAX_ORACLE_USERS};
use crate::solver::{solve, SolverConfig};
use crate::surrogate::{encode_labels, LabelVector};

use super::{generate_scenario, sample_seed, ChannelParams, NormStats};

/// How a sample's target was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    /// The dual solver converged without repair.
    Solver,
    /// The solver did not converge or needed repair; the oracle re-solved it.
    OracleFallback,
    /// As above but too large for the oracle; the solver's best repaired
    /// assignment is kept.
    Unverified,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationMeta {
    /// One entry per sample, in sample order. Empty for datasets read from disk.
    pub sources: Vec<SampleSource>,
}

impl GenerationMeta {
    pub fn count(&self, source: SampleSource) -> usize {
        self.sources.iter().filter(|&&s| s == source).count()
    }
}

/// Effective-gain features with optimal-assignment targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub dims: Dims,
    pub bandwidth: T,
    pub noise_density: T,
    pub seed: u64,
    /// Row-major, user-major flattened `r_ij`, one row per sample.
    pub features: Vec<Vec<T>>,
    pub targets: Vec<LabelVector>,
    pub normalization: Option<NormStats<T>>,
    pub meta: GenerationMeta,
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn noise_power(&self) -> T {
        self.noise_density * self.bandwidth
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.features.len() != self.targets.len() {
            return Err(Error::Shape(format!("{} feature rows, {} targets", self.features.len(), self.targets.len())));
        }
        let width = self.dims.feature_len();
        if let Some(r) = self.features.iter().position(|f| f.len() != width) {
            return Err(Error::Shape(format!("feature row {r} has the wrong width")));
        }
        if self.targets.iter().any(|t| t.dims() != self.dims) {
            return Err(Error::Dimension("target dims differ from dataset dims".into()));
        }
        Ok(())
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let pick_meta = !self.meta.sources.is_empty();
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
            meta: GenerationMeta {
                sources: if pick_meta { indices.iter().map(|&i| self.meta.sources[i]).collect() } else { Vec::new() },
            },
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> Self {
        Self {
            dims: self.dims,
            bandwidth: self.bandwidth,
            noise_density: self.noise_density,
            seed: self.seed,
            features: Vec::new(),
            targets: Vec::new(),
            normalization: self.normalization.clone(),
            meta: GenerationMeta::default(),
        }
    }
}

/// Generates `count` samples: draws a scenario per sample (seeded from
/// `(seed, index)`), solves it, and records its effective gains and optimal
/// labels. Samples are produced in parallel and merged in index order.
pub fn generate_dataset<T: Real>(
    seed: u64,
    count: usize,
    dims: Dims,
    params: &ChannelParams,
    solver_cfg: &SolverConfig<T>,
) -> Result<Dataset<T>> {
    if count == 0 {
        return Err(Error::Parameter("dataset needs at least one sample".into()));
    }
    dims.validate()?;
    params.validate()?;
    solver_cfg.validate()?;

    let samples: Vec<(Vec<T>, LabelVector, SampleSource)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let scenario = generate_scenario::<T>(sample_seed(seed, i as u64), dims, params)?;
            let inst = scenario.instance();
            let solved = match solve(&inst, solver_cfg) {
                Ok(res) if res.converged && !res.repair_used => Some(res.assignment),
                Ok(res) if dims.users > MAX_ORACLE_USERS => {
                    let labels = encode_labels(&res.assignment);
                    return Ok((scenario.effective_gains().flatten().to_vec(), labels, SampleSource::Unverified));
                }
                Ok(_) | Err(Error::NonConvergence { .. }) => None,
                Err(e) => return Err(e),
            };
            let (assignment, source) = match solved {
                Some(a) => (a, SampleSource::Solver),
                None => (brute_force_solve(&inst)?.0, SampleSource::OracleFallback),
            };
            Ok((scenario.effective_gains().flatten().to_vec(), encode_labels(&assignment), source))
        })
        .collect::<Result<_>>()?;

    let mut features = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    let mut sources = Vec::with_capacity(count);
    for (f, t, s) in samples {
        features.push(f);
        targets.push(t);
        sources.push(s);
    }
    Ok(Dataset {
        dims,
        bandwidth: T::lit(params.bandwidth_hz),
        noise_density: T::lit(params.noise_density_w_per_hz),
        seed,
        features,
        targets,
        normalization: None,
        meta: GenerationMeta { sources },
    })
}

/// Train / validation / test partition sharing the training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset<T> {
    pub train: Dataset<T>,
    pub validation: Dataset<T>,
    pub test: Dataset<T>,
}

/// Shuffles with `seed` and cuts 70 / 20 / 10. Validation and test sizes are
/// rounded down; the remainder goes to training.
pub fn split_dataset<T: Real>(d: &Dataset<T>, seed: u64) -> Result<SplitDataset<T>> {
    d.validate()?;
    let k = d.len();
    if k < 10 {
        return Err(Error::Split(format!("{k} samples; need at least 10 to split")));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = k * 2 / 10;
    let n_test = k / 10;
    let n_train = k - n_val - n_test;

    let mut train = d.subset(&order[..n_train]);
    let mut validation = d.subset(&order[n_train..n_train + n_val]);
    let mut test = d.subset(&order[n_train + n_val..]);
    let stats = NormStats::fit(&train.features, d.dims, d.noise_power())?;
    for part in [&mut train, &mut validation, &mut test] {
        part.normalization = Some(stats.clone());
    }
    Ok(SplitDataset { train, validation, test })
}
