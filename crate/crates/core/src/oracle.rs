//! Independent ground truth for the solvers.
//!
//! Nothing here shares search logic with the solver module: the continuous
//! optimum is rediscovered by exhaustive grid search over rate vectors, the
//! integer optimum by enumerating every cell vector, and the success-pair
//! expectation by seeded Monte-Carlo simulation of the generative story
//! (one Bernoulli draw per photon for the channel, one for decoherence).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{
    self, channel_success_prob, decoherence_success_prob, pair_yield, pair_yield_inverse,
    ConstraintMode, InfeasibleReason, ModelError, NodeConfig, RateAllocation, Scenario,
    SolveStatus, UserProfile,
};
use crate::solver::{self, Feasibility, TieBreak};

/// Users the exhaustive searches are willing to handle.
pub const MAX_ORACLE_USERS: usize = 3;
/// Largest capacity `enumerate_integer_best` is willing to scan.
pub const MAX_ORACLE_CAPACITY: u64 = 60;
/// Hard cap on grid combinations before the search refuses to start.
pub const MAX_GRID_COMBINATIONS: u128 = 200_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("exhaustive search supports at most {MAX_ORACLE_USERS} users, got {0}")]
    TooManyUsers(usize),
    #[error("integer enumeration supports capacities up to {MAX_ORACLE_CAPACITY}, got {0}")]
    CapacityTooLarge(u64),
    #[error("rate grid has {0} combinations; raise the step")]
    GridTooLarge(u128),
    #[error("no grid point lands within the constraint slack; refine the step or widen the slack")]
    GridTooCoarse,
}

/// Rate grid for [`brute_force_best`].
///
/// A vector is kept when its total yield falls in `[C - slack, C]`
/// (equality mode) or at most `C` (at-most mode); the one-sided window makes
/// the grid objective converge to the true optimum from below as the step
/// shrinks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Per-user rate spacing, ebit/s.
    pub step: f64,
    /// Allowed shortfall of the total yield below the capacity.
    pub slack: f64,
}

impl GridSpec {
    /// Grid with the default slack `1.5 * tau * step`, which always covers
    /// the yield change of one rate step (`h' <= 1.136`).
    pub fn for_scenario(scenario: &Scenario, step: f64) -> Self {
        GridSpec {
            step,
            slack: 1.5 * scenario.node.tau() * step,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.step > 0.0) {
            return Err(ModelError::Invariant {
                field: "grid.step".into(),
                message: "must be > 0".into(),
            });
        }
        if !(self.slack > 0.0) {
            return Err(ModelError::Invariant {
                field: "grid.slack".into(),
                message: "must be > 0".into(),
            });
        }
        Ok(())
    }
}

struct GridPoint {
    rate: f64,
    yield_: f64,
    term: f64,
}

/// Exhaustively evaluates the objective on the rate grid, keeping the best
/// vector whose continuous memory usage qualifies under the slack window.
///
/// Distinguishes a grid too coarse to land in the window from true
/// infeasibility.
pub fn brute_force_best(
    scenario: &Scenario,
    grid: &GridSpec,
) -> Result<RateAllocation, OracleError> {
    scenario.validate()?;
    grid.validate()?;
    if scenario.users.len() > MAX_ORACLE_USERS {
        return Err(OracleError::TooManyUsers(scenario.users.len()));
    }

    let tau = scenario.node.tau();
    let mode = scenario.node.attenuation_mode;
    let capacity = scenario.node.memory_capacity as f64;
    let floor = match scenario.node.constraint_mode {
        ConstraintMode::Equality => capacity - grid.slack,
        ConstraintMode::AtMost => f64::NEG_INFINITY,
    };

    let mut grids: Vec<Vec<GridPoint>> = Vec::with_capacity(scenario.users.len());
    let mut combinations: u128 = 1;
    for user in &scenario.users {
        let coeff = user.weight * channel_success_prob(user, mode);
        let mut points = Vec::new();
        let mut k = 0u64;
        loop {
            let rate = user.rate_min + k as f64 * grid.step;
            if rate >= user.rate_max {
                break;
            }
            let y = pair_yield(rate * tau);
            points.push(GridPoint {
                rate,
                yield_: y,
                term: coeff * y,
            });
            k += 1;
        }
        let y_max = pair_yield(user.rate_max * tau);
        points.push(GridPoint {
            rate: user.rate_max,
            yield_: y_max,
            term: coeff * y_max,
        });
        combinations = combinations.saturating_mul(points.len() as u128);
        grids.push(points);
    }
    if combinations > MAX_GRID_COMBINATIONS {
        return Err(OracleError::GridTooLarge(combinations));
    }

    // smallest possible yield of users j.. lets the search cut ascending loops
    let n = grids.len();
    let mut min_rest = vec![0.0; n + 1];
    for j in (0..n).rev() {
        min_rest[j] = min_rest[j + 1] + grids[j][0].yield_;
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut indices = vec![0usize; n];
    search_grid(
        &grids,
        &min_rest,
        capacity,
        floor,
        0,
        0.0,
        0.0,
        &mut indices,
        &mut best,
    );

    match best {
        Some((_, picks)) => {
            let rates: Vec<f64> = picks.iter().zip(&grids).map(|(&k, g)| g[k].rate).collect();
            let yields: Vec<f64> = picks
                .iter()
                .zip(&grids)
                .map(|(&k, g)| g[k].yield_)
                .collect();
            let memory_cells = yields.iter().map(|y| y.floor() as u64).collect();
            let objective = model::objective(scenario, &rates)?;
            Ok(RateAllocation {
                rates,
                yields,
                memory_cells,
                objective,
                status: SolveStatus::Optimal,
            })
        }
        None => match solver::check_feasibility(scenario) {
            Feasibility::InfeasibleHigh => Ok(RateAllocation::infeasible(
                InfeasibleReason::MinYieldsExceedCapacity,
            )),
            Feasibility::InfeasibleLow => Ok(RateAllocation::infeasible(
                InfeasibleReason::MaxYieldsBelowCapacity,
            )),
            Feasibility::Feasible => Err(OracleError::GridTooCoarse),
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn search_grid(
    grids: &[Vec<GridPoint>],
    min_rest: &[f64],
    capacity: f64,
    floor: f64,
    user: usize,
    total_yield: f64,
    total_obj: f64,
    indices: &mut Vec<usize>,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    if user == grids.len() {
        if total_yield >= floor {
            match best {
                Some((obj, _)) if *obj >= total_obj => {}
                _ => *best = Some((total_obj, indices.clone())),
            }
        }
        return;
    }
    for (k, point) in grids[user].iter().enumerate() {
        // yields grow with k; once over capacity every later point is too
        if total_yield + point.yield_ + min_rest[user + 1] > capacity {
            break;
        }
        indices[user] = k;
        search_grid(
            grids,
            min_rest,
            capacity,
            floor,
            user + 1,
            total_yield + point.yield_,
            total_obj + point.term,
            indices,
            best,
        );
    }
}

/// Exhaustive optimum over integer cell vectors, applying the same yield pin
/// as the integer solver. Must agree with `solve_integer` exactly.
pub fn enumerate_integer_best(
    scenario: &Scenario,
    tie_break: TieBreak,
) -> Result<RateAllocation, OracleError> {
    scenario.validate()?;
    if scenario.users.len() > MAX_ORACLE_USERS {
        return Err(OracleError::TooManyUsers(scenario.users.len()));
    }
    let capacity = scenario.node.memory_capacity;
    if capacity > MAX_ORACLE_CAPACITY {
        return Err(OracleError::CapacityTooLarge(capacity));
    }

    match solver::check_feasibility(scenario) {
        Feasibility::InfeasibleHigh => {
            return Ok(RateAllocation::infeasible(
                InfeasibleReason::MinYieldsExceedCapacity,
            ))
        }
        Feasibility::InfeasibleLow => {
            return Ok(RateAllocation::infeasible(
                InfeasibleReason::MaxYieldsBelowCapacity,
            ))
        }
        Feasibility::Feasible => {}
    }

    let (lower, _) = solver::yield_bounds(scenario);
    let coeffs = solver::coefficients(scenario);
    let (lo, hi) = solver::cell_bounds(scenario);
    let sum_lo: u64 = lo.iter().sum();
    let sum_hi: u64 = hi.iter().sum();
    if sum_lo > capacity {
        return Ok(RateAllocation::infeasible(
            InfeasibleReason::MinYieldsExceedCapacity,
        ));
    }
    let exact = match scenario.node.constraint_mode {
        ConstraintMode::Equality => {
            if sum_hi < capacity {
                return Ok(RateAllocation::infeasible(
                    InfeasibleReason::IntegerCellsBelowCapacity,
                ));
            }
            true
        }
        ConstraintMode::AtMost => false,
    };

    struct Candidate {
        value: f64,
        max_cell: u64,
        cells: Vec<u64>,
    }
    let mut best: Option<Candidate> = None;
    let mut cells = vec![0u64; lo.len()];
    enumerate_cells(
        &lo,
        &hi,
        capacity,
        exact,
        0,
        0,
        &mut cells,
        &mut |cells: &[u64]| {
            let value: f64 = cells
                .iter()
                .zip(&lower)
                .zip(&coeffs)
                .map(|((&m, &l), &c)| c * (m as f64).max(l))
                .sum();
            let max_cell = *cells.iter().max().unwrap();
            let better = match &best {
                None => true,
                Some(b) => {
                    value > b.value
                        || (value == b.value
                            && match tie_break {
                                TieBreak::Waterfill => {
                                    max_cell < b.max_cell
                                        || (max_cell == b.max_cell
                                            && cells.iter().gt(b.cells.iter()))
                                }
                                TieBreak::Lexicographic => cells.iter().gt(b.cells.iter()),
                            })
                }
            };
            if better {
                best = Some(Candidate {
                    value,
                    max_cell,
                    cells: cells.to_vec(),
                });
            }
        },
    );

    match best {
        Some(candidate) => {
            let yields: Vec<f64> = candidate
                .cells
                .iter()
                .zip(&lower)
                .map(|(&m, &l)| (m as f64).max(l))
                .collect();
            let tau = scenario.node.tau();
            let rates: Vec<f64> = scenario
                .users
                .iter()
                .zip(&yields)
                .map(|(user, &y)| (pair_yield_inverse(y) / tau).clamp(user.rate_min, user.rate_max))
                .collect();
            let objective = model::objective(scenario, &rates)?;
            Ok(RateAllocation {
                rates,
                yields,
                memory_cells: candidate.cells,
                objective,
                status: SolveStatus::Optimal,
            })
        }
        None => Ok(RateAllocation::infeasible(
            InfeasibleReason::IntegerCellsBelowCapacity,
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate_cells(
    lo: &[u64],
    hi: &[u64],
    capacity: u64,
    exact: bool,
    user: usize,
    used: u64,
    cells: &mut Vec<u64>,
    visit: &mut impl FnMut(&[u64]),
) {
    if user == lo.len() {
        if !exact || used == capacity {
            visit(cells);
        }
        return;
    }
    let rest_min: u64 = lo[user + 1..].iter().sum();
    for m in lo[user]..=hi[user] {
        if used + m + rest_min > capacity {
            break;
        }
        cells[user] = m;
        enumerate_cells(lo, hi, capacity, exact, user + 1, used + m, cells, visit);
    }
}

/// Seeded Monte-Carlo estimate of successful pairs per window.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub trials: u64,
    /// Pairs generated per window, `round(rate * tau)`.
    pub pairs_per_window: u64,
    /// Mean jointly surviving pairs across trials.
    pub empirical_mean: f64,
    /// Standard error of the mean (0 for a single trial).
    pub std_error: f64,
    /// Fluid-model expectation `rate*tau * P_s1 * P_s2`.
    pub analytic_continuous: f64,
    /// Expectation of the simulated count, `round(rate*tau) * P_s1 * P_s2`;
    /// differs from the fluid value by the pair-count discretization bias.
    pub analytic_discrete: f64,
}

/// Simulates `trials` generation windows for one user.
///
/// Each of the `round(rate*tau)` pairs survives the channel with probability
/// `P_s1` and decoherence with probability `P_s2`, one Bernoulli draw each.
/// Trial `t` draws from stream `t` of a ChaCha8 generator seeded with `seed`,
/// so reports are bit-identical for a fixed seed regardless of how trials
/// would be scheduled.
pub fn monte_carlo_window(
    user: &UserProfile,
    rate: f64,
    node: &NodeConfig,
    trials: u64,
    seed: u64,
) -> McReport {
    assert!(trials >= 1, "at least one trial is required");
    let tau = node.tau();
    let pairs = (rate * tau).round() as u64;
    let p_channel = channel_success_prob(user, node.attenuation_mode);
    let p_memory = decoherence_success_prob(rate, tau);

    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let mut survived = 0u64;
        for _ in 0..pairs {
            let channel_ok = rng.random::<f64>() < p_channel;
            let memory_ok = rng.random::<f64>() < p_memory;
            if channel_ok && memory_ok {
                survived += 1;
            }
        }
        let count = survived as f64;
        sum += count;
        sum_sq += count * count;
    }
    let n = trials as f64;
    let mean = sum / n;
    let std_error = if trials > 1 {
        let variance = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (variance / n).sqrt()
    } else {
        0.0
    };
    McReport {
        trials,
        pairs_per_window: pairs,
        empirical_mean: mean,
        std_error,
        analytic_continuous: rate * tau * p_channel * p_memory,
        analytic_discrete: pairs as f64 * p_channel * p_memory,
    }
}
