use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::num::Real;

use super::mlp::{MlpModel, Scratch};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    SgdMomentum,
    /// Adam for epochs `0..switch_epoch`, then SGD with momentum from a
    /// fresh optimizer state.
    CustomizeSwitch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub epochs: usize,
    pub batch_size: usize,
    /// Adam step size.
    pub learning_rate: T,
    /// SGD step size (used by `SgdMomentum` and after the switch).
    pub sgd_learning_rate: T,
    pub optimizer: OptimizerKind,
    pub switch_epoch: usize,
    pub momentum: T,
    pub beta1: T,
    pub beta2: T,
    pub adam_eps: T,
    pub seed: u64,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 200,
            learning_rate: T::lit(1e-3),
            sgd_learning_rate: T::lit(1e-2),
            optimizer: OptimizerKind::CustomizeSwitch,
            switch_epoch: 30,
            momentum: T::lit(0.9),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            adam_eps: T::lit(1e-8),
            seed: 0,
        }
    }
}

impl<T: Real> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Parameter("epochs and batch size must be positive".into()));
        }
        let rates = [self.learning_rate, self.sgd_learning_rate, self.adam_eps];
        if rates.iter().any(|r| !(*r > T::zero() && r.is_finite())) {
            return Err(Error::Parameter("learning rates and epsilon must be positive".into()));
        }
        let unit = [self.momentum, self.beta1, self.beta2];
        if unit.iter().any(|b| !(*b >= T::zero() && *b < T::one())) {
            return Err(Error::Parameter("momentum and betas must lie in [0, 1)".into()));
        }
        if self.optimizer == OptimizerKind::CustomizeSwitch && !(1..=self.epochs).contains(&self.switch_epoch) {
            return Err(Error::Parameter(format!("switch epoch {} outside 1..={}", self.switch_epoch, self.epochs)));
        }
        Ok(())
    }
}

enum State<T> {
    Adam { m: Vec<T>, v: Vec<T>, t: i32 },
    Sgd { velocity: Vec<T> },
}

impl<T: Real> State<T> {
    fn new(kind: OptimizerKind, n: usize) -> Self {
        match kind {
            OptimizerKind::SgdMomentum => State::Sgd { velocity: vec![T::zero(); n] },
            _ => State::Adam { m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 },
        }
    }

    fn step(&mut self, params: &mut [T], grad: &[T], cfg: &TrainConfig<T>) {
        match self {
            State::Adam { m, v, t } => {
                *t += 1;
                let c1 = T::one() - cfg.beta1.powi(*t);
                let c2 = T::one() - cfg.beta2.powi(*t);
                for k in 0..params.len() {
                    let g = grad[k];
                    m[k] = cfg.beta1 * m[k] + (T::one() - cfg.beta1) * g;
                    v[k] = cfg.beta2 * v[k] + (T::one() - cfg.beta2) * g * g;
                    let mh = m[k] / c1;
                    let vh = v[k] / c2;
                    params[k] = params[k] - cfg.learning_rate * mh / (vh.sqrt() + cfg.adam_eps);
                }
            }
            State::Sgd { velocity } => {
                for k in 0..params.len() {
                    velocity[k] = cfg.momentum * velocity[k] + grad[k];
                    params[k] = params[k] - cfg.sgd_learning_rate * velocity[k];
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: MlpModel<T>,
    /// Mean mini-batch loss of each epoch.
    pub history: Vec<f64>,
}

/// Mini-batch training on MSE. Sample order is reshuffled every epoch from
/// `cfg.seed`, so a run is fully determined by its inputs.
pub fn train<T: Real>(
    model: &MlpModel<T>,
    xs: &[Vec<T>],
    ys: &[Vec<T>],
    cfg: &TrainConfig<T>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if xs.is_empty() {
        return Err(Error::Parameter("empty training set".into()));
    }
    if xs.len() != ys.len()
        || xs.iter().any(|x| x.len() != model.input_len())
        || ys.iter().any(|y| y.len() != model.output_len())
    {
        return Err(Error::Shape("training data does not match network shape".into()));
    }

    let mut model = model.clone();
    let n = model.params().len();
    let mut grad = vec![T::zero(); n];
    let mut scratch = Scratch::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut state = State::new(cfg.optimizer, n);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if cfg.optimizer == OptimizerKind::CustomizeSwitch && epoch == cfg.switch_epoch {
            state = State::new(OptimizerKind::SgdMomentum, n);
        }
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = chunk.iter().map(|&k| (xs[k].as_slice(), ys[k].as_slice()));
            let loss = model.batch_gradient(batch, &mut grad, &mut scratch).as_f64();
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, history });
            }
            state.step(model.params_mut(), &grad, cfg);
            total += loss;
            batches += 1;
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { epoch, history });
        }
        history.push(total / batches as f64);
    }
    Ok(TrainOutcome { model, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::mlp::mse_loss;

    fn toy() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let xs: Vec<Vec<f64>> = (0..200).map(|k| vec![k as f64 / 100.0 - 1.0]).collect();
        let ys = xs.iter().map(|x| vec![0.7 * x[0] - 0.2]).collect();
        (xs, ys)
    }

    #[test]
    fn linear_regression_loss_decreases_under_adam() {
        let (xs, ys) = toy();
        let m = MlpModel::init(&[1, 1], 1).unwrap();
        let cfg = TrainConfig { epochs: 40, batch_size: 200, optimizer: OptimizerKind::Adam, learning_rate: 0.01, ..Default::default() };
        let out = train(&m, &xs, &ys, &cfg).unwrap();
        assert!(out.history[5..].windows(2).all(|w| w[1] < w[0]), "{:?}", out.history);
    }

    #[test]
    fn sgd_fits_the_toy_line() {
        let (xs, ys) = toy();
        let m = MlpModel::init(&[1, 1], 2).unwrap();
        let cfg = TrainConfig { epochs: 200, batch_size: 20, optimizer: OptimizerKind::SgdMomentum, ..Default::default() };
        let out = train(&m, &xs, &ys, &cfg).unwrap();
        assert!(mse_loss(&out.model, &xs, &ys).unwrap() < 1e-8);
        assert!((out.model.weights(0)[0] - 0.7).abs() < 1e-4);
    }

    #[test]
    fn same_seed_gives_identical_weights() {
        let (xs, ys) = toy();
        let m = MlpModel::init(&[1, 4, 1], 5).unwrap();
        let cfg = TrainConfig { epochs: 6, batch_size: 16, switch_epoch: 3, seed: 11, ..Default::default() };
        let a = train(&m, &xs, &ys, &cfg).unwrap();
        let b = train(&m, &xs, &ys, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
        let c = train(&m, &xs, &ys, &TrainConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn divergence_is_reported_with_history() {
        let (xs, ys) = toy();
        let ys: Vec<Vec<f64>> = ys.iter().map(|y| vec![y[0] * 1e3]).collect();
        let m = MlpModel::init(&[1, 1], 1).unwrap();
        let cfg = TrainConfig { epochs: 500, batch_size: 200, optimizer: OptimizerKind::SgdMomentum, sgd_learning_rate: 50.0, ..Default::default() };
        match train(&m, &xs, &ys, &cfg) {
            Err(Error::Divergence { epoch, history }) => assert_eq!(history.len(), epoch),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_is_validated() {
        let ok = TrainConfig::<f64>::default();
        ok.validate().unwrap();
        for bad in [
            TrainConfig { epochs: 0, ..ok.clone() },
            TrainConfig { batch_size: 0, ..ok.clone() },
            TrainConfig { learning_rate: 0.0, ..ok.clone() },
            TrainConfig { switch_epoch: 0, ..ok.clone() },
            TrainConfig { switch_epoch: 61, ..ok.clone() },
            TrainConfig { momentum: 1.0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Parameter(_))));
        }
        let m = MlpModel::<f64>::zeros(&[1, 1]).unwrap();
        assert!(train(&m, &[], &[], &ok).is_err());
        assert!(matches!(train(&m, &[vec![1.0, 2.0]], &[vec![1.0]], &ok), Err(Error::Shape(_))));
    }
}
