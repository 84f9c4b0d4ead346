//! Stateless evaluation of the entanglement-generation model.
//!
//! A node generates Bell pairs for each user during a window of length
//! `tau = alpha / decoherence_rate`. One photon of each pair travels a lossy
//! fiber (survival probability `P_s1`), the other sits in the shared quantum
//! memory and must survive decoherence (`P_s2 = 1 - exp(-r*tau)`). The
//! expected number of surviving stored pairs per user,
//! `y = r*tau * P_s2(r)`, is what consumes memory cells.
//!
//! Everything here is a pure function of its inputs; solver modules work in
//! the dimensionless variables `x = r*tau` and `y = h(x)` and convert back to
//! rates only at the boundary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How the attenuation coefficient enters the channel survival probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttenuationMode {
    /// `exp(-beta * d)`, the loss law taken at face value.
    #[default]
    Natural,
    /// `10^(-beta * d / 10)`, reading `beta` as dB/km.
    Decibel,
}

/// Whether the memory constraint is an exact fill or an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Occupied cells must equal the capacity.
    #[default]
    Equality,
    /// Occupied cells must not exceed the capacity.
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// An input violates a documented invariant; `field` addresses the value.
    #[error("{field}: {message}")]
    Invariant { field: String, message: String },
    #[error("rates vector has length {got}, scenario has {expected} users")]
    DimensionMismatch { expected: usize, got: usize },
}

fn invariant(field: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Invariant {
        field: field.into(),
        message: message.into(),
    }
}

/// One user's channel and service parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    /// Distance from the node, km.
    pub distance: f64,
    /// Fiber loss coefficient per km; interpreted per [`AttenuationMode`].
    pub attenuation: f64,
    /// Importance weight in the objective.
    pub weight: f64,
    /// Minimum admissible generation rate, ebit/s.
    pub rate_min: f64,
    /// Maximum generation rate the hardware supports, ebit/s.
    pub rate_max: f64,
}

impl UserProfile {
    /// Checks the per-user invariants, addressing errors as `user[idx].*`.
    pub fn validate(&self, idx: usize) -> Result<(), ModelError> {
        let field = |name: &str| format!("user[{idx}].{name}");
        if !(self.distance >= 0.0) {
            return Err(invariant(field("distance"), "must be >= 0"));
        }
        if !(self.attenuation >= 0.0) {
            return Err(invariant(field("attenuation"), "must be >= 0"));
        }
        if !(self.weight > 0.0) {
            return Err(invariant(field("weight"), "must be > 0"));
        }
        if !(self.rate_min > 0.0) {
            return Err(invariant(field("rate_min"), "must be > 0"));
        }
        if !(self.rate_max >= self.rate_min) {
            return Err(invariant(field("rate_max"), "must be >= rate_min"));
        }
        Ok(())
    }
}

/// Node-wide parameters shared by every user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    /// Number of qubits the quantum memory holds simultaneously.
    pub memory_capacity: u64,
    /// Decoherence rate of stored pairs, ebit/s.
    pub decoherence_rate: f64,
    /// Window-length multiplier; `tau = alpha / decoherence_rate`.
    /// Must exceed 2 so every admissible rate lies in the concave region.
    pub alpha: f64,
    pub attenuation_mode: AttenuationMode,
    pub constraint_mode: ConstraintMode,
}

impl NodeConfig {
    /// Generation window length in seconds. Never stored independently.
    pub fn tau(&self) -> f64 {
        self.alpha / self.decoherence_rate
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.memory_capacity < 1 {
            return Err(invariant("node.memory_capacity", "must be >= 1"));
        }
        if !(self.decoherence_rate > 0.0) {
            return Err(invariant("node.decoherence_rate", "must be > 0"));
        }
        if !(self.alpha > 2.0) {
            return Err(invariant(
                "node.alpha",
                "must be > 2 (keeps all admissible rates in the concave region)",
            ));
        }
        Ok(())
    }
}

/// A node plus the ordered users it serves; the solver's input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub node: NodeConfig,
    pub users: Vec<UserProfile>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.node.validate()?;
        if self.users.is_empty() {
            return Err(invariant("user", "at least one user is required"));
        }
        for (idx, user) in self.users.iter().enumerate() {
            user.validate(idx)?;
            if !(user.rate_min > self.node.decoherence_rate) {
                return Err(invariant(
                    format!("user[{idx}].rate_min"),
                    "must exceed node.decoherence_rate",
                ));
            }
        }
        Ok(())
    }
}

/// Why a scenario admits no allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibleReason {
    /// Even the minimum rates overflow the memory.
    MinYieldsExceedCapacity,
    /// Even the maximum rates cannot fill the memory (equality mode only).
    MaxYieldsBelowCapacity,
    /// No integer cell assignment sums to the capacity within the rate bounds.
    IntegerCellsBelowCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible(InfeasibleReason),
}

impl SolveStatus {
    pub fn is_optimal(&self) -> bool {
        matches!(self, SolveStatus::Optimal)
    }
}

/// Solver output: rates plus the memory bookkeeping derived from them.
///
/// `objective` always equals the re-evaluation of the weighted-pairs sum on
/// `rates`. When `status` is infeasible the vectors are empty and the
/// objective is NaN.
#[derive(Debug, Clone, Serialize)]
pub struct RateAllocation {
    /// Per-user generation rates, ebit/s.
    pub rates: Vec<f64>,
    /// Per-user continuous memory occupancy `y = h(r*tau)`.
    pub yields: Vec<f64>,
    /// Per-user occupied cells, `floor(y)`.
    pub memory_cells: Vec<u64>,
    /// Weighted expected successful pairs across users.
    pub objective: f64,
    pub status: SolveStatus,
}

impl RateAllocation {
    pub fn infeasible(reason: InfeasibleReason) -> Self {
        RateAllocation {
            rates: Vec::new(),
            yields: Vec::new(),
            memory_cells: Vec::new(),
            objective: f64::NAN,
            status: SolveStatus::Infeasible(reason),
        }
    }
}

/// Probability that a photon sent to `user` survives the fiber.
pub fn channel_success_prob(user: &UserProfile, mode: AttenuationMode) -> f64 {
    let loss = user.attenuation * user.distance;
    match mode {
        AttenuationMode::Natural => (-loss).exp(),
        AttenuationMode::Decibel => 10f64.powf(-loss / 10.0),
    }
}

/// Probability that a stored pair survives decoherence over one window.
///
/// Formulated via `expm1` so small `rate * tau` keeps full precision.
pub fn decoherence_success_prob(rate: f64, tau: f64) -> f64 {
    -(-rate * tau).exp_m1()
}

/// Expected photons that reach the user out of the `rate * tau` generated.
pub fn expected_transmitted(rate: f64, tau: f64, user: &UserProfile, mode: AttenuationMode) -> f64 {
    rate * tau * channel_success_prob(user, mode)
}

/// `h(x) = x * (1 - exp(-x))`: expected surviving stored pairs for `x = r*tau`.
///
/// Strictly increasing for `x > 0` with `h(0) = 0`; this is the quantity that
/// occupies memory cells.
pub fn pair_yield(x: f64) -> f64 {
    x * -(-x).exp_m1()
}

/// Derivative of [`pair_yield`].
pub fn pair_yield_derivative(x: f64) -> f64 {
    -(-x).exp_m1() + x * (-x).exp()
}

/// Inverse of [`pair_yield`] on `x >= 0`, to absolute tolerance 1e-12.
///
/// `h(x) <= x` and `h(y + 1) > y` for every `y >= 0` (because
/// `t * exp(-t) < 1`), so `[y, y + 1]` always brackets the root. A Newton
/// step is taken whenever it stays inside the bracket, bisection otherwise.
pub fn pair_yield_inverse(y: f64) -> f64 {
    assert!(y >= 0.0, "pair_yield_inverse requires y >= 0, got {y}");
    if y == 0.0 {
        return 0.0;
    }
    let mut lo = y;
    let mut hi = y + 1.0;
    if pair_yield(lo) >= y {
        return lo; // h(y) == y only in the large-x regime where 1 ulp matters
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = pair_yield(x) - y;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 1e-12 {
            break;
        }
        let slope = pair_yield_derivative(x);
        let newton = x - f / slope;
        x = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    0.5 * (lo + hi)
}

/// Expected pairs that survive both the channel and decoherence (per window).
pub fn expected_success_pairs(
    rate: f64,
    tau: f64,
    user: &UserProfile,
    mode: AttenuationMode,
) -> f64 {
    channel_success_prob(user, mode) * pair_yield(rate * tau)
}

/// Weighted sum of expected successful pairs across all users.
pub fn objective(scenario: &Scenario, rates: &[f64]) -> Result<f64, ModelError> {
    if rates.len() != scenario.users.len() {
        return Err(ModelError::DimensionMismatch {
            expected: scenario.users.len(),
            got: rates.len(),
        });
    }
    let tau = scenario.node.tau();
    let mode = scenario.node.attenuation_mode;
    Ok(scenario
        .users
        .iter()
        .zip(rates)
        .map(|(user, &rate)| user.weight * expected_success_pairs(rate, tau, user, mode))
        .sum())
}

/// Memory consumed by a rate vector: continuous total and the integer total.
///
/// The integer total floors each user's yield before summing; it is
/// `sum(floor(y_j))`, never `floor(sum(y_j))`.
pub fn memory_usage(scenario: &Scenario, rates: &[f64]) -> Result<(f64, u64), ModelError> {
    if rates.len() != scenario.users.len() {
        return Err(ModelError::DimensionMismatch {
            expected: scenario.users.len(),
            got: rates.len(),
        });
    }
    let tau = scenario.node.tau();
    let mut continuous = 0.0;
    let mut cells = 0u64;
    for &rate in rates {
        let y = pair_yield(rate * tau);
        continuous += y;
        cells += y.floor() as u64;
    }
    Ok((continuous, cells))
}

/// Diagonal of the objective's Hessian with respect to the rates.
///
/// Entry `j` is `w_j * P_s1_j * tau^2 * (2 - r_j*tau) * exp(-r_j*tau)`:
/// negative exactly when `r_j * tau > 2`, which `alpha > 2` guarantees for
/// every admissible rate.
pub fn objective_hessian_diag(scenario: &Scenario, rates: &[f64]) -> Result<Vec<f64>, ModelError> {
    if rates.len() != scenario.users.len() {
        return Err(ModelError::DimensionMismatch {
            expected: scenario.users.len(),
            got: rates.len(),
        });
    }
    let tau = scenario.node.tau();
    let mode = scenario.node.attenuation_mode;
    Ok(scenario
        .users
        .iter()
        .zip(rates)
        .map(|(user, &rate)| {
            let x = rate * tau;
            user.weight * channel_success_prob(user, mode) * tau * tau * (2.0 - x) * (-x).exp()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn user(distance: f64) -> UserProfile {
        UserProfile {
            distance,
            attenuation: 0.2,
            weight: 1.0,
            rate_min: 1.2e9,
            rate_max: 10e9,
        }
    }

    fn node(capacity: u64, alpha: f64) -> NodeConfig {
        NodeConfig {
            memory_capacity: capacity,
            decoherence_rate: 1e9,
            alpha,
            attenuation_mode: AttenuationMode::Natural,
            constraint_mode: ConstraintMode::Equality,
        }
    }

    /// Dumb 200-step bisection; the independent check for `pair_yield_inverse`.
    fn bisect_pair_yield_inverse(y: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, y + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if pair_yield(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn channel_success_matches_direct_evaluation() {
        let zero = user(0.0);
        assert_eq!(channel_success_prob(&zero, AttenuationMode::Natural), 1.0);
        let two_km = user(2.0);
        // exp(-0.4) and the dB-to-transmittance identity, frozen to 15 digits.
        assert_relative_eq!(
            channel_success_prob(&two_km, AttenuationMode::Natural),
            0.670320046035639,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            channel_success_prob(&two_km, AttenuationMode::Decibel),
            0.912010839355910,
            max_relative = 1e-12
        );
    }

    #[test]
    fn decoherence_success_examples() {
        // limit for rate -> 0+: the expm1 form keeps precision
        assert_abs_diff_eq!(decoherence_success_prob(1.0, 1e-18), 1e-18, epsilon = 1e-33);
        assert_relative_eq!(
            decoherence_success_prob(1.2e9, 3e-9),
            0.972676277552707,
            max_relative = 1e-12
        );
        let near_one = decoherence_success_prob(5.8333e9, 3e-9);
        assert!(near_one < 1.0 && 1.0 - near_one < 2.6e-8);
    }

    #[test]
    fn expected_transmitted_examples() {
        let lossless = user(0.0);
        assert_relative_eq!(
            expected_transmitted(1.2e9, 3e-9, &lossless, AttenuationMode::Natural),
            3.6,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            expected_transmitted(1.2e9, 3e-9, &user(2.0), AttenuationMode::Natural),
            2.413152165728301,
            max_relative = 1e-12
        );
        assert_eq!(
            expected_transmitted(0.0, 3e-9, &user(2.0), AttenuationMode::Natural),
            0.0
        );
    }

    #[test]
    fn pair_yield_examples() {
        assert_eq!(pair_yield(0.0), 0.0);
        assert_relative_eq!(pair_yield(3.6), 3.501634599189747, max_relative = 1e-12);
        assert_relative_eq!(pair_yield(17.5), 17.499999560575148, max_relative = 1e-12);
    }

    #[test]
    fn pair_yield_inverse_matches_bisection_oracle() {
        assert_eq!(pair_yield_inverse(0.0), 0.0);
        for y in [1e-6, 0.37, 3.501634599189747, 5.0, 17.5, 35.0, 49.0] {
            let expected = bisect_pair_yield_inverse(y);
            assert_abs_diff_eq!(pair_yield_inverse(y), expected, epsilon = 1e-11);
        }
        // frozen spot values from the oracle
        assert_abs_diff_eq!(pair_yield_inverse(3.501634599189747), 3.6, epsilon = 1e-11);
        assert_abs_diff_eq!(pair_yield_inverse(17.5), 17.50000043942467, epsilon = 1e-11);
    }

    #[test]
    fn expected_success_pairs_examples() {
        assert_relative_eq!(
            expected_success_pairs(1.2e9, 3e-9, &user(2.0), AttenuationMode::Natural),
            2.347215865728858,
            max_relative = 1e-12
        );
        // d = 0 reduces to the bare yield
        assert_eq!(
            expected_success_pairs(1.2e9, 3e-9, &user(0.0), AttenuationMode::Natural),
            pair_yield(3.6)
        );
        assert_eq!(
            expected_success_pairs(0.0, 3e-9, &user(2.0), AttenuationMode::Natural),
            0.0
        );
    }

    #[test]
    fn objective_reduces_and_scales() {
        let single = Scenario {
            node: node(35, 3.0),
            users: vec![user(0.0)],
        };
        assert_relative_eq!(
            objective(&single, &[1.2e9]).unwrap(),
            pair_yield(3.6),
            max_relative = 1e-12
        );

        let pair = Scenario {
            node: node(35, 3.0),
            users: vec![user(2.0), user(2.0)],
        };
        let two = objective(&pair, &[1.2e9, 1.2e9]).unwrap();
        assert_relative_eq!(
            two,
            2.0 * pair_yield(3.6) * channel_success_prob(&user(2.0), AttenuationMode::Natural),
            max_relative = 1e-12
        );

        let mut scaled = pair.clone();
        for u in &mut scaled.users {
            u.weight *= 3.0;
        }
        assert_relative_eq!(
            objective(&scaled, &[1.2e9, 1.2e9]).unwrap(),
            3.0 * two,
            max_relative = 1e-12
        );

        assert_eq!(
            objective(&pair, &[1.2e9]),
            Err(ModelError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn memory_usage_floors_per_user() {
        let pair = Scenario {
            node: node(35, 3.0),
            users: vec![user(2.0), user(2.0)],
        };
        let r17_5 = 17.5 / 3e-9;
        let (cont, cells) = memory_usage(&pair, &[r17_5, r17_5]).unwrap();
        assert_relative_eq!(cont, 2.0 * 17.499999560575148, max_relative = 1e-12);
        assert_eq!(cells, 34); // floor eats the sub-unit remainder of each user

        let (cont0, cells0) = memory_usage(&pair, &[0.0, 0.0]).unwrap();
        assert_eq!((cont0, cells0), (0.0, 0));

        // 2 * h(3.6) = 7.0033 continuous, but per-user flooring gives 3 + 3
        let (cont36, cells36) = memory_usage(&pair, &[1.2e9, 1.2e9]).unwrap();
        assert_relative_eq!(cont36, 7.003269198379493, max_relative = 1e-12);
        assert_eq!(cells36, 6);
    }

    #[test]
    fn hessian_diag_examples() {
        let scenario = Scenario {
            node: node(35, 3.0),
            users: vec![user(0.0)],
        };
        let tau = scenario.node.tau();

        // sign-change point: r*tau = 2 exactly (tau = 4/2 is representable)
        let exact = Scenario {
            node: NodeConfig {
                decoherence_rate: 2.0,
                alpha: 4.0,
                ..node(35, 4.0)
            },
            users: vec![user(0.0)],
        };
        let at_two = objective_hessian_diag(&exact, &[1.0]).unwrap();
        assert_eq!(at_two[0], 0.0);

        let at_36 = objective_hessian_diag(&scenario, &[3.6 / tau]).unwrap();
        assert_relative_eq!(at_36[0], -3.934616032410129e-19, max_relative = 1e-12);

        let at_one = objective_hessian_diag(&scenario, &[1.0 / tau]).unwrap();
        assert!(at_one[0] > 0.0);
        assert_relative_eq!(at_one[0], tau * tau * (-1.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn validation_names_the_broken_field() {
        let mut scenario = Scenario {
            node: node(35, 3.0),
            users: vec![user(2.0)],
        };
        scenario.node.alpha = 2.0;
        let err = scenario.validate().unwrap_err();
        assert!(matches!(err, ModelError::Invariant { ref field, .. } if field == "node.alpha"));
        assert!(err.to_string().contains("> 2"));

        scenario.node.alpha = 3.0;
        scenario.users[0].rate_min = 0.9e9; // not above the decoherence rate
        let err = scenario.validate().unwrap_err();
        assert!(
            matches!(err, ModelError::Invariant { ref field, .. } if field == "user[0].rate_min")
        );

        scenario.users[0].rate_min = 1.2e9;
        assert!(scenario.validate().is_ok());
    }
}
