//! Dual-decomposition solver for the sum-rate channel assignment problem.
//!
//! Each iteration solves every subchannel's subproblem in closed form for the
//! current multipliers, then takes a subgradient step on the multipliers.
//! Infeasible iterates are repaired into assignments; the best feasible
//! assignment seen is returned.

mod assignment;
mod dual;
mod rate;
mod repair;
mod subproblem;

pub use assignment::{occupancy, Assignment, Selection};
pub use dual::{column_bound, column_max, dual_objective, dual_update, lagrangian, DualVector};
pub use rate::{selections_rate, subchannel_rate, sum_rate};
pub use repair::repair_feasibility;
pub use subproblem::{
    column_value, kappa_bracket, max_bisection_steps, select_top_a, solve_kappa, solve_subproblem,
    subchannel_score, ColumnSolution, KappaSolution,
};

use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::num::{rel_diff, Real};

/// What the solver sees of a scenario: effective gains `r_ij = p_i h_ij`,
/// quota `A`, subchannel bandwidth and noise power `sigma^2 B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    gains: Matrix<T>,
    dims: Dims,
    bandwidth: T,
    noise_power: T,
}

impl<T: Real> Instance<T> {
    /// Gains may be zero (degenerate test matrices) but not negative.
    pub fn new(gains: Matrix<T>, quota: usize, bandwidth: T, noise_power: T) -> Result<Self> {
        let dims = Dims::new(gains.rows(), gains.cols(), quota)?;
        if !gains.iter().all(|&v| v.is_finite() && v >= T::zero()) {
            return Err(Error::Parameter("effective gains must be finite and non-negative".into()));
        }
        if !(bandwidth.is_finite() && bandwidth > T::zero() && noise_power.is_finite() && noise_power > T::zero()) {
            return Err(Error::Parameter("bandwidth and noise power must be positive".into()));
        }
        Ok(Self { gains, dims, bandwidth, noise_power })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn gains(&self) -> &Matrix<T> {
        &self.gains
    }

    pub fn gain(&self, i: usize, j: usize) -> T {
        self.gains[(i, j)]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.gains.column(j)
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn noise_power(&self) -> T {
        self.noise_power
    }

    /// Same instance with users reordered: user `i` of the result is user
    /// `perm[i]` of `self`.
    pub fn permute_users(&self, perm: &[usize]) -> Self {
        Self { gains: self.gains.permute_rows(perm), ..self.clone() }
    }
}

/// Diminishing step schedule for the multiplier update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepDecay {
    /// `eta_t = eta_0 / sqrt(t)`
    InvSqrt,
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    /// Relative accuracy of the `kappa` bisection.
    pub bisection_tol: T,
    pub max_iters: usize,
    /// `None` picks `eta_0 = max_ij r_ij / (ln2 (S_j + sigma^2 B))` with
    /// `S_j` the top-A gain sum of subchannel `j`: the largest marginal
    /// per-Hz rate at the greedy start.
    pub initial_step: Option<T>,
    pub step_decay: StepDecay,
    /// Relative change of the sum rate between consecutive feasible iterates
    /// that counts as converged.
    pub convergence_tol: T,
    pub repair_enabled: bool,
    /// Apply single-user exchange ascent to each subchannel's column.
    pub refine_columns: bool,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            bisection_tol: T::lit(1e-9),
            max_iters: 5000,
            initial_step: None,
            step_decay: StepDecay::InvSqrt,
            convergence_tol: T::lit(1e-8),
            repair_enabled: true,
            refine_columns: true,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v.is_finite() && v > T::zero();
        if !pos(self.bisection_tol) || !pos(self.convergence_tol) {
            return Err(Error::Parameter("solver tolerances must be positive".into()));
        }
        if self.initial_step.is_some_and(|s| !pos(s)) {
            return Err(Error::Parameter("initial step must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub assignment: Assignment,
    /// Sum rate of `assignment`, bit/s.
    pub sum_rate: T,
    pub iterations: usize,
    /// A feasible iterate repeated its objective, or the duality gap closed.
    pub converged: bool,
    /// `assignment` came out of [`repair_feasibility`].
    pub repair_used: bool,
    /// Dual function value at each iterate's multipliers, bit/s.
    pub dual_trace: Vec<T>,
    /// Final multipliers.
    pub lambda: DualVector<T>,
    pub bisection_calls: usize,
    /// Largest number of bisection steps in any single `kappa` solve.
    pub max_bisection_steps: usize,
}

/// Runs the dual method to convergence or `cfg.max_iters`.
pub fn solve<T: Real>(inst: &Instance<T>, cfg: &SolverConfig<T>) -> Result<SolveResult<T>> {
    cfg.validate()?;
    let d = inst.dims();
    let n = inst.noise_power();
    let columns: Vec<Vec<T>> = (0..d.subchannels).map(|j| inst.column(j)).collect();

    let eta0 = cfg.initial_step.unwrap_or_else(|| auto_step(&columns, d.quota, n));
    let mut lambda = DualVector::zeros(d.users);
    let mut dual_trace = Vec::new();
    let mut best: Option<(Assignment, T, bool)> = None;
    let mut best_dual = T::infinity();
    let mut prev_objective: Option<T> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut bisection_calls = 0;
    let mut max_steps = 0;

    for t in 1..=cfg.max_iters {
        iterations = t;
        let mut selections = Vec::with_capacity(d.subchannels);
        let mut bound = T::zero();
        for col in &columns {
            let sol = solve_subproblem(col, lambda.as_slice(), d.quota, n, cfg.bisection_tol, cfg.refine_columns)?;
            bisection_calls += 1;
            max_steps = max_steps.max(sol.kappa.steps);
            bound = bound + column_max(col, lambda.as_slice(), d.quota, n, sol.kappa.kappa);
            selections.push(sol.selection);
        }
        let dual = inst.bandwidth() * (bound - lambda.as_slice().iter().copied().sum::<T>());
        dual_trace.push(dual);
        best_dual = best_dual.min(dual);

        let objective = selections_rate(&selections, inst);
        let feasible = occupancy(d.users, &selections).iter().all(|&c| c == 1);
        let candidate = if feasible {
            Some((Assignment::from_selections(d, &selections)?, false))
        } else if cfg.repair_enabled {
            Some((repair_feasibility(&selections, inst)?, true))
        } else {
            None
        };
        if let Some((a, repaired)) = candidate {
            let rate = sum_rate(&a, inst)?;
            let improves = match &best {
                None => true,
                Some((_, r, was_repaired)) => rate > *r || (rate == *r && *was_repaired && !repaired),
            };
            if improves {
                best = Some((a, rate, repaired));
            }
        }

        if feasible && prev_objective.is_some_and(|p| rel_diff(objective, p) < cfg.convergence_tol) {
            converged = true;
            break;
        }
        if let Some((_, r, _)) = &best {
            if rel_diff(best_dual, *r) < cfg.convergence_tol {
                converged = true;
                break;
            }
        }
        prev_objective = Some(objective);

        let eta = match cfg.step_decay {
            StepDecay::InvSqrt => eta0 / T::from_count(t).sqrt(),
            StepDecay::Constant => eta0,
        };
        lambda = dual_update(&lambda, &selections, eta)?;
    }

    match best {
        Some((assignment, sum_rate, repair_used)) if converged || cfg.repair_enabled => Ok(SolveResult {
            assignment,
            sum_rate,
            iterations,
            converged,
            repair_used,
            dual_trace,
            lambda,
            bisection_calls,
            max_bisection_steps: max_steps,
        }),
        best => Err(Error::NonConvergence { iterations, best: best.map(|(a, r, _)| (a, r.as_f64())) }),
    }
}

fn auto_step<T: Real>(columns: &[Vec<T>], quota: usize, noise_power: T) -> T {
    let mut eta = T::zero();
    for col in columns {
        let (_, hi) = kappa_bracket(col, quota, noise_power);
        for &r in col {
            eta = eta.max(r / hi);
        }
    }
    if eta > T::zero() {
        eta
    } else {
        T::one()
    }
}
