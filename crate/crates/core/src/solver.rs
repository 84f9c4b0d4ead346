//! Exact solvers for the rate-allocation problem.
//!
//! Substituting `y_j = h(r_j * tau)` turns the weighted-pairs objective into
//! the linear form `sum(c_j * y_j)` with `c_j = w_j * P_s1_j`, one budget
//! constraint `sum(y_j) = C` and box bounds `h(rate_min*tau) <= y_j <=
//! h(rate_max*tau)`. That is a fractional knapsack: a greedy fill in
//! decreasing coefficient order is exactly optimal, no iterative solver
//! needed. [`solve_dual`] reaches the same optimum through a Lagrangian
//! bisection and exists purely as an independent cross-check.
//!
//! The integer mode keeps the floor constraint `sum(floor(y_j)) = C`. The
//! supremum under a fixed cell vector `m` is not attained (`y -> m_j + 1`),
//! so each `y_j` is pinned to `m_j`, or to the user's lower bound when the
//! cell count alone would push the rate below `rate_min`. Because that pin
//! lets a user at its floor keep a fractional yield surplus, maximizing the
//! pinned objective is a small dynamic program rather than a plain greedy.
//!
//! All solvers are pure and deterministic: identical inputs produce
//! bit-identical outputs.

use serde::{Deserialize, Serialize};

use crate::model::{
    self, channel_success_prob, pair_yield, pair_yield_inverse, AttenuationMode, ConstraintMode,
    InfeasibleReason, ModelError, RateAllocation, Scenario, SolveStatus, UserProfile,
};

/// Whether the memory constraint keeps its floor or is relaxed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    #[default]
    Continuous,
    Integer,
}

/// Resolution among users with equal objective coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Equalize the yields of tied users above their minima (max-min).
    #[default]
    Waterfill,
    /// Fill tied users in scenario order.
    Lexicographic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub relaxation: Relaxation,
    /// Constraint/duality residual bound.
    pub tolerance: f64,
    pub tie_break: TieBreak,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            relaxation: Relaxation::Continuous,
            tolerance: 1e-9,
            tie_break: TieBreak::Waterfill,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.tolerance > 0.0) {
            return Err(ModelError::Invariant {
                field: "options.tolerance".into(),
                message: "must be > 0".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    /// Even maximum rates cannot fill the memory (equality mode only).
    InfeasibleLow,
    /// Minimum rates alone already exceed the memory.
    InfeasibleHigh,
}

/// Objective coefficient of user's yield: `w * P_s1`.
pub fn coefficient(user: &UserProfile, mode: AttenuationMode) -> f64 {
    user.weight * channel_success_prob(user, mode)
}

/// Per-user yield bounds `[h(rate_min*tau), h(rate_max*tau)]`.
pub fn yield_bounds(scenario: &Scenario) -> (Vec<f64>, Vec<f64>) {
    let tau = scenario.node.tau();
    let lower = scenario
        .users
        .iter()
        .map(|u| pair_yield(u.rate_min * tau))
        .collect();
    let upper = scenario
        .users
        .iter()
        .map(|u| pair_yield(u.rate_max * tau))
        .collect();
    (lower, upper)
}

/// Objective coefficients of all users, in scenario order.
pub fn coefficients(scenario: &Scenario) -> Vec<f64> {
    let mode = scenario.node.attenuation_mode;
    scenario
        .users
        .iter()
        .map(|u| coefficient(u, mode))
        .collect()
}

/// Classifies a scenario against the memory window
/// `sum h(rate_min*tau) <= C <= sum h(rate_max*tau)`.
pub fn check_feasibility(scenario: &Scenario) -> Feasibility {
    let (lower, upper) = yield_bounds(scenario);
    let capacity = scenario.node.memory_capacity as f64;
    if lower.iter().sum::<f64>() > capacity {
        return Feasibility::InfeasibleHigh;
    }
    if scenario.node.constraint_mode == ConstraintMode::Equality
        && upper.iter().sum::<f64>() < capacity
    {
        return Feasibility::InfeasibleLow;
    }
    Feasibility::Feasible
}

fn infeasible_reason(feasibility: Feasibility) -> InfeasibleReason {
    match feasibility {
        Feasibility::InfeasibleHigh => InfeasibleReason::MinYieldsExceedCapacity,
        Feasibility::InfeasibleLow => InfeasibleReason::MaxYieldsBelowCapacity,
        Feasibility::Feasible => unreachable!("feasible scenarios have no infeasibility reason"),
    }
}

/// Total yield the solvers must hit: `C`, or `min(C, sum(upper))` when the
/// constraint is an upper bound (filling never hurts, every coefficient is
/// positive).
fn yield_target(scenario: &Scenario, upper: &[f64]) -> f64 {
    let capacity = scenario.node.memory_capacity as f64;
    match scenario.node.constraint_mode {
        ConstraintMode::Equality => capacity,
        ConstraintMode::AtMost => capacity.min(upper.iter().sum()),
    }
}

/// Groups user indices by exact coefficient equality, decreasing coefficient.
fn coefficient_groups(coeffs: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    order.sort_by(|&a, &b| coeffs[b].partial_cmp(&coeffs[a]).unwrap().then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match groups.last_mut() {
            Some(group) if coeffs[group[0]] == coeffs[idx] => group.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    groups
}

/// Distributes `budget` extra yield within one tied-coefficient group.
///
/// `members` are scenario indices in scenario order. In waterfill mode the
/// common level is solved exactly on the sorted breakpoint segments of
/// `sum(clamp(level, l_j, u_j))`.
fn distribute_within_group(
    members: &[usize],
    lower: &[f64],
    upper: &[f64],
    budget: f64,
    tie_break: TieBreak,
    y: &mut [f64],
) {
    if budget <= 0.0 {
        return;
    }
    match tie_break {
        TieBreak::Lexicographic => {
            let mut left = budget;
            for &j in members {
                let add = (upper[j] - lower[j]).min(left);
                y[j] = lower[j] + add;
                left -= add;
                if left <= 0.0 {
                    break;
                }
            }
        }
        TieBreak::Waterfill => {
            let target: f64 = members.iter().map(|&j| lower[j]).sum::<f64>() + budget;
            let fill = |level: f64| -> f64 {
                members
                    .iter()
                    .map(|&j| lower[j].max(upper[j].min(level)))
                    .sum()
            };
            let mut breakpoints: Vec<f64> =
                members.iter().flat_map(|&j| [lower[j], upper[j]]).collect();
            breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breakpoints.dedup();
            // first breakpoint whose fill reaches the target
            let mut level = *breakpoints.last().unwrap();
            let mut prev = breakpoints[0];
            for &bp in &breakpoints {
                let filled = fill(bp);
                if filled >= target {
                    // solve on the open segment (prev, bp]: members whose
                    // bounds do not cut the segment sit exactly at `level`
                    let mut fixed = 0.0;
                    let mut active = 0usize;
                    for &j in members {
                        if upper[j] <= prev {
                            fixed += upper[j];
                        } else if lower[j] >= bp {
                            fixed += lower[j];
                        } else {
                            active += 1;
                        }
                    }
                    level = if active == 0 {
                        bp
                    } else {
                        ((target - fixed) / active as f64).clamp(prev, bp)
                    };
                    break;
                }
                prev = bp;
            }
            for &j in members {
                y[j] = lower[j].max(upper[j].min(level));
            }
        }
    }
}

/// Maps a yield vector back to rates and re-evaluates the reported fields.
fn allocation_from_yields(scenario: &Scenario, yields: Vec<f64>) -> RateAllocation {
    let tau = scenario.node.tau();
    let rates: Vec<f64> = scenario
        .users
        .iter()
        .zip(&yields)
        .map(|(user, &y)| (pair_yield_inverse(y) / tau).clamp(user.rate_min, user.rate_max))
        .collect();
    let memory_cells = yields.iter().map(|y| y.floor() as u64).collect();
    let objective = model::objective(scenario, &rates).expect("rates match users");
    RateAllocation {
        rates,
        yields,
        memory_cells,
        objective,
        status: SolveStatus::Optimal,
    }
}

/// Exact greedy solution of the continuous relaxation.
///
/// Every yield starts at its lower bound; the remaining budget is handed to
/// users in strictly decreasing coefficient order, saturating upper bounds.
/// At most one user ends strictly interior when all coefficients are
/// distinct; tied groups are split per [`TieBreak`].
pub fn solve_continuous(
    scenario: &Scenario,
    options: &SolverOptions,
) -> Result<RateAllocation, ModelError> {
    scenario.validate()?;
    options.validate()?;
    let feasibility = check_feasibility(scenario);
    if feasibility != Feasibility::Feasible {
        return Ok(RateAllocation::infeasible(infeasible_reason(feasibility)));
    }

    let (lower, upper) = yield_bounds(scenario);
    let coeffs = coefficients(scenario);
    let target = yield_target(scenario, &upper);

    let mut y = lower.clone();
    let mut remaining = target - lower.iter().sum::<f64>();
    for group in coefficient_groups(&coeffs) {
        if remaining <= 0.0 {
            break;
        }
        let capacity: f64 = group.iter().map(|&j| upper[j] - lower[j]).sum();
        let give = remaining.min(capacity);
        distribute_within_group(&group, &lower, &upper, give, options.tie_break, &mut y);
        remaining -= give;
    }
    Ok(allocation_from_yields(scenario, y))
}

/// Independent cross-check of [`solve_continuous`] via the Lagrangian dual.
///
/// For a fixed multiplier each user independently sits at its upper bound
/// (`c_j > lambda`) or lower bound (`c_j < lambda`); the multiplier is
/// bisected until the bracket is narrower than a quarter of the smallest gap
/// between distinct coefficients, which pins the marginal group. That group
/// then absorbs the residual budget to meet the constraint exactly.
pub fn solve_dual(
    scenario: &Scenario,
    options: &SolverOptions,
) -> Result<RateAllocation, ModelError> {
    scenario.validate()?;
    options.validate()?;
    let feasibility = check_feasibility(scenario);
    if feasibility != Feasibility::Feasible {
        return Ok(RateAllocation::infeasible(infeasible_reason(feasibility)));
    }

    let (lower, upper) = yield_bounds(scenario);
    let coeffs = coefficients(scenario);
    let target = yield_target(scenario, &upper);

    let mut distinct: Vec<f64> = coeffs.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();

    let marginal_coeff = if distinct.len() == 1 {
        Some(distinct[0])
    } else {
        let min_gap = distinct
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        // total yield demanded at multiplier `lambda`, ties held at lower
        let demand = |lambda: f64| -> f64 {
            coeffs
                .iter()
                .zip(lower.iter().zip(&upper))
                .map(|(&c, (&l, &u))| if c > lambda { u } else { l })
                .sum()
        };
        let mut lo = distinct[0] - 1.0;
        let mut hi = distinct[distinct.len() - 1] + 1.0;
        while hi - lo > min_gap / 4.0 {
            let mid = 0.5 * (lo + hi);
            if demand(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        distinct.iter().copied().find(|&c| lo <= c && c <= hi)
    };

    let mut y = vec![0.0; coeffs.len()];
    let mut marginal_members = Vec::new();
    match marginal_coeff {
        Some(pivot) => {
            let mut decided = 0.0;
            for (j, &c) in coeffs.iter().enumerate() {
                if c == pivot {
                    marginal_members.push(j);
                } else if c > pivot {
                    y[j] = upper[j];
                    decided += upper[j];
                } else {
                    y[j] = lower[j];
                    decided += lower[j];
                }
            }
            let group_lower: f64 = marginal_members.iter().map(|&j| lower[j]).sum();
            let budget = target - decided - group_lower;
            for &j in &marginal_members {
                y[j] = lower[j];
            }
            distribute_within_group(
                &marginal_members,
                &lower,
                &upper,
                budget,
                options.tie_break,
                &mut y,
            );
        }
        None => {
            // bracket converged inside a flat segment: no user is marginal
            // and the bound pattern at any multiplier in the bracket already
            // meets the target
            let lambda = {
                let mut lo = distinct[0] - 1.0;
                let mut hi = distinct[distinct.len() - 1] + 1.0;
                let demand = |lambda: f64| -> f64 {
                    coeffs
                        .iter()
                        .zip(lower.iter().zip(&upper))
                        .map(|(&c, (&l, &u))| if c > lambda { u } else { l })
                        .sum()
                };
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if demand(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            };
            for (j, &c) in coeffs.iter().enumerate() {
                y[j] = if c > lambda { upper[j] } else { lower[j] };
            }
            debug_assert!((y.iter().sum::<f64>() - target).abs() <= options.tolerance);
        }
    }
    Ok(allocation_from_yields(scenario, y))
}

/// Integer cell bounds implied by the rate box: `floor(h(rate_min*tau))`
/// achievable via the lower-bound pin, `floor(h(rate_max*tau))` at most.
pub fn cell_bounds(scenario: &Scenario) -> (Vec<u64>, Vec<u64>) {
    let (lower, upper) = yield_bounds(scenario);
    (
        lower.iter().map(|l| l.floor() as u64).collect(),
        upper.iter().map(|u| u.floor() as u64).collect(),
    )
}

/// Pins the yield for a chosen cell count: `m` exactly, unless that would
/// force the rate below `rate_min`, in which case the lower bound keeps
/// `floor(y) == m`.
pub(crate) fn pin_yield(m: u64, lower: f64) -> f64 {
    (m as f64).max(lower)
}

struct IntegerFill {
    cells: Vec<u64>,
}

/// Exact maximization of the pinned objective over integer cell vectors with
/// `sum(m_j) = target`, by dynamic programming over (user, remaining units).
///
/// Values are compared as (objective gain, smallest maximum cell count,
/// largest earlier-user share) under waterfill tie-breaking, or (gain,
/// largest earlier-user share) lexicographically; the secondary keys only
/// decide between exactly tied optima.
fn integer_fill(
    coeffs: &[f64],
    lower: &[f64],
    lo: &[u64],
    hi: &[u64],
    budget: u64,
    tie_break: TieBreak,
) -> Option<IntegerFill> {
    let n = coeffs.len();
    let b = budget as usize;
    // gain of giving user j `k` units above its floor
    let gain = |j: usize, k: usize| -> f64 {
        if k == 0 {
            0.0
        } else {
            coeffs[j] * ((lo[j] + k as u64) as f64 - lower[j])
        }
    };

    const NEG: f64 = f64::NEG_INFINITY;
    // dp[j][u]: best (value, max cell count) over users j.. with u units left
    let mut value = vec![vec![NEG; b + 1]; n + 1];
    let mut max_cell = vec![vec![u64::MAX; b + 1]; n + 1];
    value[n][0] = 0.0;
    max_cell[n][0] = 0;
    for j in (0..n).rev() {
        let cap = ((hi[j] - lo[j]) as usize).min(b);
        for units in 0..=b {
            let mut best = (NEG, u64::MAX, 0usize);
            for k in 0..=cap.min(units) {
                let next_v = value[j + 1][units - k];
                if next_v == NEG {
                    continue;
                }
                let v = gain(j, k) + next_v;
                let mc = (lo[j] + k as u64).max(max_cell[j + 1][units - k]);
                let better = v > best.0
                    || (v == best.0
                        && match tie_break {
                            TieBreak::Waterfill => mc < best.1 || (mc == best.1 && k > best.2),
                            TieBreak::Lexicographic => k > best.2,
                        });
                if better {
                    best = (v, mc, k);
                }
            }
            value[j][units] = best.0;
            max_cell[j][units] = best.1;
        }
    }
    if value[0][b] == NEG {
        return None;
    }

    // walk the table again, replaying the same preference
    let mut cells = Vec::with_capacity(n);
    let mut units = b;
    for j in 0..n {
        let cap = ((hi[j] - lo[j]) as usize).min(b);
        let mut chosen = None;
        let mut best = (NEG, u64::MAX, 0usize);
        for k in 0..=cap.min(units) {
            let next_v = value[j + 1][units - k];
            if next_v == NEG {
                continue;
            }
            let v = gain(j, k) + next_v;
            let mc = (lo[j] + k as u64).max(max_cell[j + 1][units - k]);
            let better = v > best.0
                || (v == best.0
                    && match tie_break {
                        TieBreak::Waterfill => mc < best.1 || (mc == best.1 && k > best.2),
                        TieBreak::Lexicographic => k > best.2,
                    });
            if better {
                best = (v, mc, k);
                chosen = Some(k);
            }
        }
        let k = chosen.expect("reachable state");
        cells.push(lo[j] + k as u64);
        units -= k;
    }
    debug_assert_eq!(units, 0);
    Some(IntegerFill { cells })
}

/// Solves with the floor constraint enforced: cell counts are integers
/// summing exactly to the capacity (or at most, in `at_most` mode, in which
/// case the fill is still maximal).
pub fn solve_integer(
    scenario: &Scenario,
    options: &SolverOptions,
) -> Result<RateAllocation, ModelError> {
    scenario.validate()?;
    options.validate()?;
    let feasibility = check_feasibility(scenario);
    if feasibility != Feasibility::Feasible {
        return Ok(RateAllocation::infeasible(infeasible_reason(feasibility)));
    }

    let (lower, _) = yield_bounds(scenario);
    let coeffs = coefficients(scenario);
    let (lo, hi) = cell_bounds(scenario);
    let capacity = scenario.node.memory_capacity;
    let sum_lo: u64 = lo.iter().sum();
    let sum_hi: u64 = hi.iter().sum();

    if sum_lo > capacity {
        return Ok(RateAllocation::infeasible(
            InfeasibleReason::MinYieldsExceedCapacity,
        ));
    }
    let target = match scenario.node.constraint_mode {
        ConstraintMode::Equality => {
            if sum_hi < capacity {
                return Ok(RateAllocation::infeasible(
                    InfeasibleReason::IntegerCellsBelowCapacity,
                ));
            }
            capacity
        }
        ConstraintMode::AtMost => capacity.min(sum_hi),
    };

    let fill = integer_fill(
        &coeffs,
        &lower,
        &lo,
        &hi,
        target - sum_lo,
        options.tie_break,
    )
    .expect("bounds admit the target");
    let yields: Vec<f64> = fill
        .cells
        .iter()
        .zip(&lower)
        .map(|(&m, &l)| pin_yield(m, l))
        .collect();
    let mut allocation = allocation_from_yields(scenario, yields);
    allocation.memory_cells = fill.cells;
    Ok(allocation)
}

/// Dispatches on `options.relaxation`.
pub fn solve(scenario: &Scenario, options: &SolverOptions) -> Result<RateAllocation, ModelError> {
    match options.relaxation {
        Relaxation::Continuous => solve_continuous(scenario, options),
        Relaxation::Integer => solve_integer(scenario, options),
    }
}
