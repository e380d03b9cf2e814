//! Exhaustive enumeration of feasible assignments, the ground truth for the
//! solver and the surrogate on small instances.

use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::solver::{subchannel_rate, Assignment, Instance};

/// Largest user count the oracle will enumerate.
pub const MAX_ORACLE_USERS: usize = 12;

/// Iterates all feasible assignments in lexicographic order of their
/// label vectors (per-user subchannel indices).
#[derive(Debug, Clone)]
pub struct AssignmentIterator {
    dims: Dims,
    next: Option<Vec<usize>>,
}

impl Iterator for AssignmentIterator {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_multiset_permutation(&mut succ) {
            self.next = Some(succ);
        }
        Some(Assignment::from_channels(self.dims, current).expect("enumerated labels satisfy the quotas"))
    }
}

/// Advances to the lexicographically next arrangement; `false` once the
/// sequence is non-increasing (the last one).
fn next_multiset_permutation(v: &mut [usize]) -> bool {
    let Some(pivot) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]).map(|i| i - 1) else {
        return false;
    };
    let swap = (pivot + 1..v.len()).rev().find(|&k| v[k] > v[pivot]).expect("successor exists");
    v.swap(pivot, swap);
    v[pivot + 1..].reverse();
    true
}

fn guard(dims: Dims) -> Result<()> {
    dims.validate()?;
    if dims.users > MAX_ORACLE_USERS {
        return Err(Error::SizeGuard(format!(
            "{dims}: enumeration limited to M <= {MAX_ORACLE_USERS}"
        )));
    }
    Ok(())
}

pub fn enumerate_assignments(dims: Dims) -> Result<AssignmentIterator> {
    guard(dims)?;
    let first: Vec<usize> = (0..dims.subchannels).flat_map(|j| std::iter::repeat_n(j, dims.quota)).collect();
    Ok(AssignmentIterator { dims, next: Some(first) })
}

/// Highest-rate assignment and its sum rate. Ties keep the first assignment
/// in enumeration order, i.e. the lexicographically smallest label vector.
pub fn brute_force_solve<T: Real>(inst: &Instance<T>) -> Result<(Assignment, T)> {
    let d = inst.dims();
    guard(d)?;
    let (b, n) = (inst.bandwidth(), inst.noise_power());
    let mut labels: Vec<usize> = (0..d.subchannels).flat_map(|j| std::iter::repeat_n(j, d.quota)).collect();
    let mut power = vec![T::zero(); d.subchannels];
    let mut best: Option<(Vec<usize>, T)> = None;
    loop {
        power.iter_mut().for_each(|p| *p = T::zero());
        for (i, &j) in labels.iter().enumerate() {
            power[j] = power[j] + inst.gain(i, j);
        }
        let rate: T = power.iter().map(|&s| subchannel_rate(s, b, n)).sum();
        if best.as_ref().is_none_or(|(_, r)| rate > *r) {
            best = Some((labels.clone(), rate));
        }
        if !next_multiset_permutation(&mut labels) {
            break;
        }
    }
    let (labels, rate) = best.expect("at least one assignment");
    Ok((Assignment::from_channels(d, labels)?, rate))
}
