//! Per-subchannel subproblem of the dual decomposition.
//!
//! For fixed multipliers the Lagrangian separates over subchannels. In
//! subchannel `j` the relaxed maximiser puts its `A` units of mass on the
//! users with the largest scores `r_ij + kappa * lambda_i`, where `kappa` is
//! the fixed point of `kappa = ln2 * (selected power + sigma^2 B)`. The
//! selected power is non-increasing in `kappa`, so the fixed point is found
//! by bisection on `ln2 * (S(kappa) + sigma^2 B) - kappa`.
//!
//! Multipliers are expressed per unit bandwidth (bit/s/Hz), which makes the
//! score independent of `B`.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::num::Real;

use super::Selection;

pub fn subchannel_score<T: Real>(gain: T, kappa: T, lambda: T) -> T {
    gain + kappa * lambda
}

/// Fills `order` with user indices sorted by descending score, ties by
/// ascending index.
fn rank_users<T: Real>(column: &[T], kappa: T, lambda: &[T], order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..column.len());
    order.sort_by(|&a, &b| {
        let sa = subchannel_score(column[a], kappa, lambda[a]);
        let sb = subchannel_score(column[b], kappa, lambda[b]);
        sb.partial_cmp(&sa).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
}

fn check_shapes<T>(column: &[T], lambda: &[T], quota: usize) -> Result<()> {
    if column.len() != lambda.len() {
        return Err(Error::Dimension(format!("{} gains vs {} multipliers", column.len(), lambda.len())));
    }
    if quota == 0 || quota > column.len() {
        return Err(Error::Dimension(format!("quota {quota} with {} users", column.len())));
    }
    Ok(())
}

/// The `quota` users with the largest scores at `kappa`, ascending.
pub fn select_top_a<T: Real>(column: &[T], kappa: T, lambda: &[T], quota: usize) -> Result<Selection> {
    check_shapes(column, lambda, quota)?;
    let mut order = Vec::with_capacity(column.len());
    Ok(top_a(column, kappa, lambda, quota, &mut order))
}

fn top_a<T: Real>(column: &[T], kappa: T, lambda: &[T], quota: usize, order: &mut Vec<usize>) -> Selection {
    rank_users(column, kappa, lambda, order);
    let mut sel = order[..quota].to_vec();
    sel.sort_unstable();
    sel
}

fn power_of<T: Real>(column: &[T], sel: &[usize]) -> T {
    sel.iter().map(|&i| column[i]).sum()
}

/// Result of the `kappa` bisection for one subchannel.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaSolution<T> {
    pub kappa: T,
    /// Final bracket; the crossing of the fixed-point map lies inside it.
    pub lower: T,
    pub upper: T,
    /// Top-A selections at the two bracket ends. They coincide unless the
    /// crossing sits on a jump of the selection.
    pub below: Selection,
    pub above: Selection,
    /// `true` when `kappa = ln2 * (S(kappa) + sigma^2 B)` holds exactly for
    /// a binary selection; `false` when the crossing is a jump.
    pub fixed_point: bool,
    pub steps: usize,
}

/// Starting bracket `[ln2 * sigma^2 B, ln2 * (top-A column sum + sigma^2 B)]`.
pub fn kappa_bracket<T: Real>(column: &[T], quota: usize, noise_power: T) -> (T, T) {
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let top: T = sorted[..quota].iter().copied().sum();
    (T::LN_2() * noise_power, T::LN_2() * (top + noise_power))
}

/// Upper bound on bisection steps for relative tolerance `eps`:
/// `ceil(log2((hi - lo) / (eps * lo)))`.
pub fn max_bisection_steps<T: Real>(column: &[T], quota: usize, noise_power: T, eps: T) -> usize {
    let (lo, hi) = kappa_bracket(column, quota, noise_power);
    let ratio = ((hi - lo) / (eps * lo)).as_f64();
    if ratio <= 1.0 {
        0
    } else {
        ratio.log2().ceil() as usize
    }
}

/// Solves the fixed point `kappa = ln2 * (sum_i x*_ij(kappa) r_ij + sigma^2 B)`
/// to relative accuracy `eps`.
pub fn solve_kappa<T: Real>(
    column: &[T],
    lambda: &[T],
    quota: usize,
    noise_power: T,
    eps: T,
) -> Result<KappaSolution<T>> {
    check_shapes(column, lambda, quota)?;
    if !(eps > T::zero()) || !(noise_power > T::zero()) {
        return Err(Error::Parameter("bisection tolerance and noise power must be positive".into()));
    }
    let ln2 = T::LN_2();
    let map = |s: T| ln2 * (s + noise_power);
    let mut order = Vec::with_capacity(column.len());

    let (mut lo, mut hi) = kappa_bracket(column, quota, noise_power);
    let mut below = top_a(column, lo, lambda, quota, &mut order);
    let mut above = top_a(column, hi, lambda, quota, &mut order);
    // Summation order differs between the bracket and the selection, so
    // allow a few ulps.
    let slack = T::epsilon() * T::lit(16.0);
    assert!(
        map(power_of(column, &below)) >= lo * (T::one() - slack) && map(power_of(column, &above)) <= hi * (T::one() + slack),
        "kappa bracket does not straddle the fixed point"
    );

    let mut steps = 0;
    // Equal end selections mean the map is constant on the bracket and its
    // value is the fixed point.
    while below != above && hi - lo > eps * lo {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if !(mid > lo && mid < hi) {
            break;
        }
        steps += 1;
        let sel = top_a(column, mid, lambda, quota, &mut order);
        if map(power_of(column, &sel)) >= mid {
            lo = mid;
            below = sel;
        } else {
            hi = mid;
            above = sel;
        }
    }

    let f_lo = map(power_of(column, &below));
    let f_hi = map(power_of(column, &above));
    let (kappa, fixed_point) = if below == above {
        (f_lo, true)
    } else {
        // Any kappa in [max(lo, F(hi)), min(hi, F(lo))] is reached by a convex
        // mix of the two selections.
        let a = lo.max(f_hi);
        let b = hi.min(f_lo);
        (a + (b - a) / T::lit(2.0), false)
    };
    Ok(KappaSolution { kappa, lower: lo, upper: hi, below, above, fixed_point, steps })
}

/// Per-Hz column objective `log2(1 + S / sigma^2 B) + sum_{i in sel} lambda_i`.
pub fn column_value<T: Real>(column: &[T], sel: &[usize], lambda: &[T], noise_power: T) -> T {
    let s = power_of(column, sel);
    (s / noise_power).ln_1p() / T::LN_2() + sel.iter().map(|&i| lambda[i]).sum::<T>()
}

/// Binary column chosen for one subchannel.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSolution<T> {
    pub selection: Selection,
    /// Per-Hz column objective of `selection`.
    pub value: T,
    pub kappa: KappaSolution<T>,
}

/// Solves subchannel `j`'s subproblem for multipliers `lambda`.
///
/// The top-A selection at the bisected `kappa` is taken from whichever side of
/// the bracket scores higher on the binary column objective. With `refine`,
/// single-user exchanges that raise the objective are then applied until none
/// remains; this matters when the relaxed optimum sits on a jump, where
/// neither side need be the best binary column.
pub fn solve_subproblem<T: Real>(
    column: &[T],
    lambda: &[T],
    quota: usize,
    noise_power: T,
    eps: T,
    refine: bool,
) -> Result<ColumnSolution<T>> {
    let kappa = solve_kappa(column, lambda, quota, noise_power, eps)?;
    let v_below = column_value(column, &kappa.below, lambda, noise_power);
    let v_above = column_value(column, &kappa.above, lambda, noise_power);
    let (mut selection, mut value) = if v_above > v_below {
        (kappa.above.clone(), v_above)
    } else {
        (kappa.below.clone(), v_below)
    };
    if refine {
        exchange_ascent(column, lambda, noise_power, &mut selection, &mut value);
    }
    Ok(ColumnSolution { selection, value, kappa })
}

fn exchange_ascent<T: Real>(column: &[T], lambda: &[T], noise_power: T, sel: &mut Selection, value: &mut T) {
    let threshold = T::lit(1e-12);
    let m = column.len();
    let mut in_sel = vec![false; m];
    for &i in sel.iter() {
        in_sel[i] = true;
    }
    loop {
        let mut best: Option<(usize, usize, T)> = None;
        for slot in 0..sel.len() {
            for cand in (0..m).filter(|&k| !in_sel[k]) {
                let mut trial = sel.clone();
                trial[slot] = cand;
                let v = column_value(column, &trial, lambda, noise_power);
                let bar = best.map_or(*value, |b| b.2);
                if v - bar > threshold * bar.abs().max(T::one()) {
                    best = Some((slot, cand, v));
                }
            }
        }
        let Some((slot, cand, v)) = best else { break };
        in_sel[sel[slot]] = false;
        in_sel[cand] = true;
        sel[slot] = cand;
        sel.sort_unstable();
        *value = v;
    }
}
