//! Random uplink problem instances and labelled datasets built from them.
//!
//! Users are dropped uniformly in a square cell with the base station at its
//! centre. The channel gain of user `i` on subchannel `j` is the distance
//! path loss `128.1 + 37.6 log10(d_km)` dB times an independent unit-mean
//! exponential (Rayleigh power) fade.

mod dataset;
pub mod features;
pub mod io;

pub use dataset::{generate_dataset, split_dataset, Dataset, GenerationMeta, SampleSource, SplitDataset};
pub use features::{CanonicalFeatures, NormStats};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::num::Real;
use crate::solver::Instance;

/// Parameters of the channel model. All values are SI (m, W, Hz, W/Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub cell_side_m: f64,
    pub min_distance_m: f64,
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db: f64,
    pub tx_power_w: f64,
    pub bandwidth_hz: f64,
    pub noise_density_w_per_hz: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            cell_side_m: 500.0,
            min_distance_m: 1.0,
            pathloss_intercept_db: 128.1,
            pathloss_slope_db: 37.6,
            tx_power_w: 0.1,
            bandwidth_hz: 1.0e6,
            // -174 dBm/Hz
            noise_density_w_per_hz: 10f64.powf(-20.4),
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cell_side_m", self.cell_side_m),
            ("min_distance_m", self.min_distance_m),
            ("pathloss_slope_db", self.pathloss_slope_db),
            ("tx_power_w", self.tx_power_w),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_density_w_per_hz", self.noise_density_w_per_hz),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !self.pathloss_intercept_db.is_finite() {
            return Err(Error::Parameter("pathloss_intercept_db must be finite".into()));
        }
        if self.min_distance_m >= self.max_distance_m() {
            return Err(Error::Parameter(format!(
                "min_distance_m {} leaves no room in a {} m cell",
                self.min_distance_m, self.cell_side_m
            )));
        }
        Ok(())
    }

    /// Corner distance of the square cell from its centre.
    pub fn max_distance_m(&self) -> f64 {
        self.cell_side_m / 2.0 * std::f64::consts::SQRT_2
    }

    /// Linear path gain at distance `d_m` metres.
    pub fn path_gain(&self, d_m: f64) -> f64 {
        let loss_db = self.pathloss_intercept_db + self.pathloss_slope_db * (d_m / 1000.0).log10();
        10f64.powf(-loss_db / 10.0)
    }
}

/// One physical problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    dims: Dims,
    bandwidth: T,
    noise_density: T,
    tx_power: Vec<T>,
    gains: Matrix<T>,
    distances: Vec<T>,
}

impl<T: Real> Scenario<T> {
    /// Builds a scenario from explicit values. `distances` is informational
    /// and may be empty.
    pub fn new(
        dims: Dims,
        bandwidth: T,
        noise_density: T,
        tx_power: Vec<T>,
        gains: Matrix<T>,
    ) -> Result<Self> {
        dims.validate()?;
        if tx_power.len() != dims.users || gains.rows() != dims.users || gains.cols() != dims.subchannels {
            return Err(Error::Dimension(format!(
                "powers/gains shaped {}/{}x{} do not match {dims}",
                tx_power.len(),
                gains.rows(),
                gains.cols()
            )));
        }
        let ok = |v: T| v.is_finite() && v > T::zero();
        if !ok(bandwidth) || !ok(noise_density) {
            return Err(Error::Parameter("bandwidth and noise density must be positive".into()));
        }
        if !tx_power.iter().all(|&p| ok(p)) || !gains.iter().all(|&h| ok(h)) {
            return Err(Error::Parameter("powers and gains must be positive and finite".into()));
        }
        Ok(Self { dims, bandwidth, noise_density, tx_power, gains, distances: Vec::new() })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn noise_density(&self) -> T {
        self.noise_density
    }

    /// Noise power over one subchannel, `sigma^2 * B`.
    pub fn noise_power(&self) -> T {
        self.noise_density * self.bandwidth
    }

    pub fn tx_power(&self) -> &[T] {
        &self.tx_power
    }

    pub fn gains(&self) -> &Matrix<T> {
        &self.gains
    }

    /// User-to-base-station distances in metres (empty for hand-built scenarios).
    pub fn distances(&self) -> &[T] {
        &self.distances
    }

    /// `r_ij = p_i * h_ij`.
    pub fn effective_gains(&self) -> EffectiveGainMatrix<T> {
        let mut r = self.gains.clone();
        for (i, &p) in self.tx_power.iter().enumerate() {
            for v in r.row_mut(i) {
                *v = p * *v;
            }
        }
        EffectiveGainMatrix { dims: self.dims, values: r }
    }

    /// The solver's view of this scenario.
    pub fn instance(&self) -> Instance<T> {
        Instance::new(
            self.effective_gains().into_matrix(),
            self.dims.quota,
            self.bandwidth,
            self.noise_power(),
        )
        .expect("validated scenario yields a valid instance")
    }
}

/// `r_ij = p_i h_ij`, the only input the solver and the surrogate see.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGainMatrix<T> {
    dims: Dims,
    values: Matrix<T>,
}

impl<T: Real> EffectiveGainMatrix<T> {
    pub fn new(dims: Dims, values: Matrix<T>) -> Result<Self> {
        dims.validate()?;
        if values.rows() != dims.users || values.cols() != dims.subchannels {
            return Err(Error::Dimension(format!("{}x{} gains for {dims}", values.rows(), values.cols())));
        }
        if !values.iter().all(|&v| v.is_finite() && v > T::zero()) {
            return Err(Error::Parameter("effective gains must be positive and finite".into()));
        }
        Ok(Self { dims, values })
    }

    /// Rebuilds a matrix from a flattened row-major (user-major) feature row.
    pub fn from_features(dims: Dims, features: &[T]) -> Result<Self> {
        Self::new(dims, Matrix::new(dims.users, dims.subchannels, features.to_vec())?)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.values
    }

    /// Row-major, user-major flattening used as the feature layout.
    pub fn flatten(&self) -> &[T] {
        self.values.as_slice()
    }
}

/// Derives the seed for sample `index` of a run seeded with `master`
/// (SplitMix64 finaliser over the pair). Samples can be generated in any
/// order or in parallel and still reproduce.
pub fn sample_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws a scenario. Identical `(seed, dims, params)` give identical output.
pub fn generate_scenario<T: Real>(seed: u64, dims: Dims, params: &ChannelParams) -> Result<Scenario<T>> {
    dims.validate()?;
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = params.cell_side_m / 2.0;

    let mut distances = Vec::with_capacity(dims.users);
    while distances.len() < dims.users {
        let x: f64 = rng.random_range(-half..half);
        let y: f64 = rng.random_range(-half..half);
        let d = x.hypot(y);
        if d > params.min_distance_m {
            distances.push(d);
        }
    }

    let mut gains = Vec::with_capacity(dims.feature_len());
    for &d in &distances {
        let path = params.path_gain(d);
        for _ in 0..dims.subchannels {
            let fade: f64 = rng.sample(Exp1);
            gains.push(T::lit(path * fade));
        }
    }

    let mut s = Scenario::new(
        dims,
        T::lit(params.bandwidth_hz),
        T::lit(params.noise_density_w_per_hz),
        vec![T::lit(params.tx_power_w); dims.users],
        Matrix::new(dims.users, dims.subchannels, gains)?,
    )?;
    s.distances = distances.into_iter().map(T::lit).collect();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(m: usize, n: usize, a: usize) -> Dims {
        Dims::new(m, n, a).unwrap()
    }

    #[test]
    fn same_seed_same_scenario() {
        let p = ChannelParams::default();
        let a: Scenario<f64> = generate_scenario(7, dims(2, 2, 1), &p).unwrap();
        let b: Scenario<f64> = generate_scenario(7, dims(2, 2, 1), &p).unwrap();
        let bits = |s: &Scenario<f64>| s.gains().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let p = ChannelParams::default();
        let a: Scenario<f64> = generate_scenario(7, dims(2, 2, 1), &p).unwrap();
        let b: Scenario<f64> = generate_scenario(8, dims(2, 2, 1), &p).unwrap();
        assert_ne!(a.gains(), b.gains());
    }

    #[test]
    fn distances_stay_inside_cell() {
        let p = ChannelParams::default();
        for seed in 0..200 {
            let s: Scenario<f64> = generate_scenario(seed, dims(8, 4, 2), &p).unwrap();
            for &d in s.distances() {
                assert!(d > p.min_distance_m && d <= 250.0 * 2f64.sqrt(), "{d}");
            }
            assert!(s.gains().iter().all(|&h| h > 0.0 && h.is_finite()));
        }
    }

    #[test]
    fn rejects_bad_dims_and_params() {
        let p = ChannelParams::default();
        assert!(matches!(generate_scenario::<f64>(1, Dims { users: 3, subchannels: 2, quota: 2 }, &p), Err(Error::Dimension(_))));
        let bad = ChannelParams { tx_power_w: 0.0, ..p.clone() };
        assert!(matches!(generate_scenario::<f64>(1, dims(2, 2, 1), &bad), Err(Error::Parameter(_))));
        let bad = ChannelParams { noise_density_w_per_hz: -1.0, ..p };
        assert!(matches!(generate_scenario::<f64>(1, dims(2, 2, 1), &bad), Err(Error::Parameter(_))));
    }

    #[test]
    fn effective_gains_scale_rows_by_power() {
        let h = Matrix::from_rows(&[vec![1.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let s = Scenario::new(dims(2, 2, 1), 1.0, 1.0, vec![2.0, 3.0], h.clone()).unwrap();
        assert_eq!(s.effective_gains().flatten(), &[2.0, 8.0, 15.0, 18.0]);

        let unit = Scenario::new(dims(2, 2, 1), 1.0, 1.0, vec![1.0, 1.0], h.clone()).unwrap();
        assert_eq!(unit.effective_gains().matrix(), &h);

        let doubled = Scenario::new(dims(2, 2, 1), 1.0, 1.0, vec![4.0, 6.0], h).unwrap();
        let r1 = s.effective_gains();
        let r2 = doubled.effective_gains();
        for (a, b) in r1.flatten().iter().zip(r2.flatten()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn fading_has_unit_mean() {
        // Fades are recovered by dividing out the deterministic path gain.
        let p = ChannelParams::default();
        let d = dims(10, 10, 1);
        let (mut sum, mut n) = (0.0, 0usize);
        for seed in 0..1000 {
            let s: Scenario<f64> = generate_scenario(seed, d, &p).unwrap();
            for i in 0..d.users {
                let path = p.path_gain(s.distances()[i]);
                for j in 0..d.subchannels {
                    sum += s.gains()[(i, j)] / path;
                    n += 1;
                }
            }
        }
        assert_eq!(n, 100_000);
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "empirical fade mean {mean}");
    }

    #[test]
    fn sample_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| sample_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(sample_seed(1, 0), sample_seed(2, 0));
    }

    #[test]
    fn works_in_single_precision() {
        let s: Scenario<f32> = generate_scenario(3, dims(4, 2, 2), &ChannelParams::default()).unwrap();
        assert!(s.effective_gains().flatten().iter().all(|v| *v > 0.0));
    }
}
