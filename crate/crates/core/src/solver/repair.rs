use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::num::Real;

use super::rate::subchannel_rate;
use super::{Assignment, Instance, Selection};

/// Turns per-subchannel selections (each of size `A`) into a feasible
/// assignment.
///
/// A user selected on several subchannels stays where removing it would cost
/// the most rate. The vacated slots are then filled greedily: the
/// (unassigned user, open subchannel) pair with the largest rate gain goes
/// first. Feasible input is returned unchanged.
pub fn repair_feasibility<T: Real>(selections: &[Selection], inst: &Instance<T>) -> Result<Assignment> {
    let d = inst.dims();
    if selections.len() != d.subchannels || selections.iter().any(|s| s.len() != d.quota) {
        return Err(Error::Dimension(format!("repair needs {} selections of {} users", d.subchannels, d.quota)));
    }
    if let Ok(a) = Assignment::from_selections(d, selections) {
        return Ok(a);
    }
    let (b, n) = (inst.bandwidth(), inst.noise_power());
    let rate = |s: T| subchannel_rate(s, b, n);

    let mut cols: Vec<Selection> = selections.to_vec();
    let mut power: Vec<T> = cols
        .iter()
        .enumerate()
        .map(|(j, sel)| sel.iter().map(|&i| inst.gain(i, j)).sum())
        .collect();

    for i in 0..d.users {
        let hosts: Vec<usize> = (0..d.subchannels).filter(|&j| cols[j].contains(&i)).collect();
        if hosts.len() < 2 {
            continue;
        }
        let loss = |j: usize| rate(power[j]) - rate(power[j] - inst.gain(i, j));
        let keep = hosts
            .iter()
            .copied()
            .reduce(|best, j| if loss(j) > loss(best) { j } else { best })
            .expect("at least two hosts");
        for &j in hosts.iter().filter(|&&j| j != keep) {
            cols[j].retain(|&u| u != i);
            power[j] = power[j] - inst.gain(i, j);
        }
    }

    let mut placed = vec![false; d.users];
    for &i in cols.iter().flatten() {
        placed[i] = true;
    }
    let mut waiting: Vec<usize> = (0..d.users).filter(|&i| !placed[i]).collect();
    while !waiting.is_empty() {
        let mut best: Option<(T, usize, usize)> = None;
        for (w, &i) in waiting.iter().enumerate() {
            for j in (0..d.subchannels).filter(|&j| cols[j].len() < d.quota) {
                let gain = rate(power[j] + inst.gain(i, j)) - rate(power[j]);
                let better = match best {
                    None => true,
                    Some((g, _, _)) => gain.partial_cmp(&g) == Some(Ordering::Greater),
                };
                if better {
                    best = Some((gain, w, j));
                }
            }
        }
        let (_, w, j) = best.expect("open slots remain while users wait");
        let i = waiting.remove(w);
        cols[j].push(i);
        cols[j].sort_unstable();
        power[j] = power[j] + inst.gain(i, j);
    }

    Assignment::from_selections(d, &cols)
}
