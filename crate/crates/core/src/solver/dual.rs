use crate::error::{Error, Result};
use crate::num::Real;

use super::rate::subchannel_rate;
use super::subproblem::{column_value, solve_kappa, subchannel_score};
use super::{occupancy, Instance, Selection};

/// Dual multipliers, one per user, in bit/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector<T>(pub Vec<T>);

impl<T: Real> DualVector<T> {
    pub fn zeros(users: usize) -> Self {
        Self(vec![T::zero(); users])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// One subgradient step on the dual: `lambda_i -= eta * (sum_j x_ij - 1)`.
pub fn dual_update<T: Real>(lambda: &DualVector<T>, selections: &[Selection], eta: T) -> Result<DualVector<T>> {
    if !(eta > T::zero()) {
        return Err(Error::Parameter("step size must be positive".into()));
    }
    let users = lambda.0.len();
    if selections.iter().flatten().any(|&i| i >= users) {
        return Err(Error::Dimension("selection refers to a user without a multiplier".into()));
    }
    let counts = occupancy(users, selections);
    Ok(DualVector(
        lambda
            .0
            .iter()
            .zip(counts)
            .map(|(&l, c)| l - eta * (T::from_count(c) - T::one()))
            .collect(),
    ))
}

/// Upper envelope of subchannel `j`'s relaxed Lagrangian at `kappa`, per Hz:
/// `(top-A sum of (r_ij + kappa lambda_i) + sigma^2 B) / kappa + (ln(kappa / (ln2 sigma^2 B)) - 1) / ln2`.
///
/// Minimising over `kappa` gives the relaxed column maximum exactly, so any
/// `kappa` yields an upper bound; at the fixed point it equals
/// `log2(1 + S / sigma^2 B) + sum_i lambda_i x_ij`.
pub fn column_bound<T: Real>(column: &[T], lambda: &[T], quota: usize, noise_power: T, kappa: T) -> T {
    let mut scores: Vec<T> = column.iter().zip(lambda).map(|(&r, &l)| subchannel_score(r, kappa, l)).collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let top: T = scores[..quota].iter().copied().sum();
    let ln2 = T::LN_2();
    (top + noise_power) / kappa + ((kappa / (ln2 * noise_power)).ln() - T::one()) / ln2
}

/// Most `quota`-subsets per subchannel that [`column_max`] enumerates.
pub const EXACT_COLUMN_LIMIT: u128 = 4096;

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Per-Hz maximum of subchannel `j`'s Lagrangian term
/// `log2(1 + S / sigma^2 B) + sum_{i in sel} lambda_i` over binary columns
/// with exactly `quota` ones.
///
/// Found by enumeration when there are at most [`EXACT_COLUMN_LIMIT`]
/// columns; otherwise the relaxed envelope [`column_bound`] at `kappa` is
/// returned, which is never smaller. Either way the result bounds every
/// binary column from above.
pub fn column_max<T: Real>(column: &[T], lambda: &[T], quota: usize, noise_power: T, kappa: T) -> T {
    let m = column.len();
    if binomial(m, quota) > EXACT_COLUMN_LIMIT {
        return column_bound(column, lambda, quota, noise_power, kappa);
    }
    let mut idx: Vec<usize> = (0..quota).collect();
    let mut best = T::neg_infinity();
    loop {
        best = best.max(column_value(column, &idx, lambda, noise_power));
        // Advance to the next combination in lexicographic order.
        let Some(p) = (0..quota).rev().find(|&p| idx[p] < m - quota + p) else { break };
        idx[p] += 1;
        for q in p + 1..quota {
            idx[q] = idx[q - 1] + 1;
        }
    }
    best
}

/// Dual function value in bit/s:
/// `B * (sum_j max_{x_j} [log2(1 + S_j / sigma^2 B) + sum_i lambda_i x_ij] - sum_i lambda_i)`.
///
/// Never below the optimal sum rate, for any `lambda`.
pub fn dual_objective<T: Real>(lambda: &DualVector<T>, inst: &Instance<T>, eps: T) -> Result<T> {
    let d = inst.dims();
    if lambda.0.len() != d.users {
        return Err(Error::Dimension(format!("{} multipliers for {d}", lambda.0.len())));
    }
    let mut total = T::zero();
    for j in 0..d.subchannels {
        let col = inst.column(j);
        let k = solve_kappa(&col, &lambda.0, d.quota, inst.noise_power(), eps)?;
        total = total + column_max(&col, &lambda.0, d.quota, inst.noise_power(), k.kappa);
    }
    Ok(inst.bandwidth() * (total - lambda.0.iter().copied().sum::<T>()))
}

/// Lagrangian `L(x, lambda)` in bit/s for arbitrary per-subchannel selections.
pub fn lagrangian<T: Real>(lambda: &DualVector<T>, selections: &[Selection], inst: &Instance<T>) -> T {
    let b = inst.bandwidth();
    let mut total = T::zero();
    for (j, sel) in selections.iter().enumerate() {
        let s: T = sel.iter().map(|&i| inst.gain(i, j)).sum();
        total = total + subchannel_rate(s, b, inst.noise_power());
        total = total + b * sel.iter().map(|&i| lambda.0[i]).sum::<T>();
    }
    total - b * lambda.0.iter().copied().sum::<T>()
}
