//! Browser bindings for the rate-allocation solver.
//!
//! Three operations back the static demo page: solve a scenario, sweep one
//! parameter into an SVG chart plus CSV, and probe the feasibility limits.
//! Everything takes and returns strings (scenario TOML in, JSON out) so the
//! page needs no framework and the functions test natively.

// validation deliberately writes `!(x > 0.0)` so NaN fails the checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use wasm_bindgen::prelude::wasm_bindgen;

use entrate::model::{pair_yield_inverse, Scenario};
use entrate::solver::{self, Feasibility, Relaxation, SolverOptions};
use entrate::sweep::{self, SweepAxis, SweepSpec};

fn error_json(message: impl AsRef<str>) -> String {
    serde_json::json!({ "error": message.as_ref() }).to_string()
}

/// Solves a scenario file; returns the allocation (or an `error`) as JSON.
#[wasm_bindgen]
pub fn solve_scenario(scenario_toml: &str, integer: bool) -> String {
    let scenario = match sweep::parse_scenario(scenario_toml) {
        Ok(s) => s,
        Err(e) => return error_json(e.to_string()),
    };
    let options = SolverOptions {
        relaxation: if integer {
            Relaxation::Integer
        } else {
            Relaxation::Continuous
        },
        ..SolverOptions::default()
    };
    match solver::solve(&scenario, &options) {
        Ok(allocation) => serde_json::json!({
            "tau_s": scenario.node.tau(),
            "allocation": allocation,
        })
        .to_string(),
        Err(e) => error_json(e.to_string()),
    }
}

fn parse_axis(axis: &str) -> Option<SweepAxis> {
    Some(match axis {
        "eps_min_of_user" => SweepAxis::EpsMinOfUser,
        "tau" => SweepAxis::Tau,
        "num_users" => SweepAxis::NumUsers,
        "distance_of_user" => SweepAxis::DistanceOfUser,
        "memory_capacity" => SweepAxis::MemoryCapacity,
        _ => return None,
    })
}

/// Sweeps one axis of the scenario and returns `{svg, csv}` JSON.
///
/// Extra users for `num_users` sweeps clone the last user of the scenario.
#[wasm_bindgen]
pub fn sweep_chart(
    scenario_toml: &str,
    axis: &str,
    user_index: usize,
    start: f64,
    stop: f64,
    step: f64,
) -> String {
    let scenario = match sweep::parse_scenario(scenario_toml) {
        Ok(s) => s,
        Err(e) => return error_json(e.to_string()),
    };
    let Some(axis) = parse_axis(axis) else {
        return error_json(format!("unknown axis `{axis}`"));
    };
    if matches!(axis, SweepAxis::EpsMinOfUser | SweepAxis::DistanceOfUser)
        && user_index >= scenario.users.len()
    {
        return error_json(format!(
            "user index {user_index} out of range for {} users",
            scenario.users.len()
        ));
    }
    if !(step > 0.0) || !(start <= stop) {
        return error_json("need step > 0 and start <= stop");
    }
    let extra_user = scenario.users.last().cloned();
    let spec = SweepSpec {
        base: scenario,
        axis,
        user_index: Some(user_index),
        start,
        stop,
        step,
        seed: 0,
        randomized: None,
        extra_user,
        solver: SolverOptions::default(),
    };
    let result = sweep::run_sweep(&spec);
    let csv = sweep::csv_string(&result);
    match sweep::svg_string(&result) {
        Ok(svg) => serde_json::json!({ "svg": svg, "csv": csv }).to_string(),
        Err(e) => error_json(e.to_string()),
    }
}

fn bisect(mut lo: f64, mut hi: f64, feasible_at: impl Fn(f64) -> bool) -> Option<f64> {
    if !feasible_at(lo) || feasible_at(hi) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible_at(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Feasibility limits of a scenario: the largest common minimum rate and the
/// largest generation window before the memory overflows. JSON out.
#[wasm_bindgen]
pub fn feasibility_limits(scenario_toml: &str) -> String {
    let scenario = match sweep::parse_scenario(scenario_toml) {
        Ok(s) => s,
        Err(e) => return error_json(e.to_string()),
    };
    let tau = scenario.node.tau();
    let capacity = scenario.node.memory_capacity as f64;

    let with_common_min = |scenario: &Scenario, m: f64| {
        let mut changed = scenario.clone();
        for user in &mut changed.users {
            user.rate_min = m;
            user.rate_max = user.rate_max.max(m);
        }
        solver::check_feasibility(&changed) == Feasibility::Feasible
    };
    let rate_hi = 2.0 * pair_yield_inverse(capacity) / tau;
    let max_common_rate_min = bisect(scenario.node.decoherence_rate * 1.000001, rate_hi, |m| {
        with_common_min(&scenario, m)
    });

    let with_window = |scenario: &Scenario, tau: f64| {
        let mut changed = scenario.clone();
        changed.node.alpha = tau * changed.node.decoherence_rate;
        solver::check_feasibility(&changed) == Feasibility::Feasible
    };
    let min_rate_total: f64 = scenario.users.iter().map(|u| u.rate_min).sum();
    let tau_hi = 2.0 * capacity / min_rate_total + tau;
    let max_window_s = bisect(tau, tau_hi, |t| with_window(&scenario, t));

    serde_json::json!({
        "feasible_now": solver::check_feasibility(&scenario) == Feasibility::Feasible,
        "tau_s": tau,
        "max_common_rate_min_ebit_s": max_common_rate_min,
        "max_window_s": max_window_s,
    })
    .to_string()
}
