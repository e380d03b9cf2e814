use crate::error::{Error, Result};
use crate::num::Real;

use super::{Assignment, Instance, Selection};

/// `B log2(1 + S / (sigma^2 B))` for a subchannel carrying received power `S`.
pub fn subchannel_rate<T: Real>(selected_power: T, bandwidth: T, noise_power: T) -> T {
    bandwidth * (selected_power / noise_power).ln_1p() / T::LN_2()
}

/// Sum rate of an assignment in bit/s.
pub fn sum_rate<T: Real>(a: &Assignment, inst: &Instance<T>) -> Result<T> {
    if a.dims() != inst.dims() {
        return Err(Error::Dimension(format!("assignment {} vs instance {}", a.dims(), inst.dims())));
    }
    let mut power = vec![T::zero(); inst.dims().subchannels];
    for i in 0..inst.dims().users {
        let j = a.channel_of(i);
        power[j] = power[j] + inst.gain(i, j);
    }
    Ok(power
        .into_iter()
        .map(|s| subchannel_rate(s, inst.bandwidth(), inst.noise_power()))
        .sum())
}

/// Objective value of arbitrary per-subchannel selections, feasible or not.
pub fn selections_rate<T: Real>(selections: &[Selection], inst: &Instance<T>) -> T {
    selections
        .iter()
        .enumerate()
        .map(|(j, sel)| {
            let s = sel.iter().map(|&i| inst.gain(i, j)).sum();
            subchannel_rate(s, inst.bandwidth(), inst.noise_power())
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dims::Dims;
    use crate::matrix::Matrix;

    fn inst(rows: &[Vec<f64>]) -> Instance<f64> {
        Instance::new(Matrix::from_rows(rows).unwrap(), 1, 1.0, 1.0).unwrap()
    }

    #[test]
    fn identity_and_anti_identity() {
        let d = Dims::new(2, 2, 1).unwrap();
        let r = inst(&[vec![3.0, 1.0], vec![1.0, 3.0]]);
        let id = Assignment::from_channels(d, vec![0, 1]).unwrap();
        let anti = Assignment::from_channels(d, vec![1, 0]).unwrap();
        // log2(4) + log2(4) and log2(2) + log2(2)
        assert!((sum_rate(&id, &r).unwrap() - 4.0).abs() < 1e-12);
        assert!((sum_rate(&anti, &r).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gains_give_zero_rate() {
        let d = Dims::new(2, 2, 1).unwrap();
        let r = inst(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let id = Assignment::from_channels(d, vec![0, 1]).unwrap();
        assert_eq!(sum_rate(&id, &r).unwrap(), 0.0);
    }

    #[test]
    fn bandwidth_and_noise_enter_as_in_shannon_formula() {
        let r = Instance::<f64>::new(Matrix::from_rows(&[vec![6.0], vec![8.0]]).unwrap(), 2, 2.0, 2.0).unwrap();
        let a = Assignment::from_channels(Dims::new(2, 1, 2).unwrap(), vec![0, 0]).unwrap();
        // 2 * log2(1 + 14 / 2) = 6
        assert!((sum_rate(&a, &r).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let r = inst(&[vec![3.0, 1.0], vec![1.0, 3.0]]);
        let a = Assignment::from_channels(Dims::new(4, 2, 2).unwrap(), vec![0, 0, 1, 1]).unwrap();
        assert!(matches!(sum_rate(&a, &r), Err(Error::Dimension(_))));
    }
}
