//! Scenario files, parameter sweeps, CSV output and chart rendering.
//!
//! Scenario and sweep descriptions are TOML with unit-carrying field names
//! (`rate_min_ebit_s`, `distance_km`) so unit mistakes fail loudly at parse
//! time. Sweeps run one solver invocation per axis value — averaged over
//! seeded randomized runs when requested — and record infeasible or failing
//! points as data rows instead of dropping them. Output is deterministic:
//! the same spec and seed produce byte-identical CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{Chart, Series};
use crate::model::{
    AttenuationMode, ConstraintMode, InfeasibleReason, ModelError, NodeConfig, Scenario,
    SolveStatus, UserProfile,
};
use crate::solver::{self, SolverOptions};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("sweep.{field}: {message}")]
    Spec { field: String, message: String },
    #[error(
        "chart needs at least 2 feasible points (got {feasible}); write the CSV output instead"
    )]
    NotEnoughFeasiblePoints { feasible: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn spec_error(field: &str, message: impl Into<String>) -> SweepError {
    SweepError::Spec {
        field: field.into(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// scenario files

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    memory_capacity: u64,
    decoherence_rate_ebit_s: f64,
    alpha: f64,
    #[serde(default)]
    attenuation_mode: AttenuationMode,
    #[serde(default)]
    constraint_mode: ConstraintMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserFile {
    distance_km: f64,
    attenuation_per_km: f64,
    weight: f64,
    rate_min_ebit_s: f64,
    rate_max_ebit_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    node: NodeFile,
    #[serde(rename = "user")]
    users: Vec<UserFile>,
}

impl From<&UserFile> for UserProfile {
    fn from(u: &UserFile) -> Self {
        UserProfile {
            distance: u.distance_km,
            attenuation: u.attenuation_per_km,
            weight: u.weight,
            rate_min: u.rate_min_ebit_s,
            rate_max: u.rate_max_ebit_s,
        }
    }
}

impl From<&UserProfile> for UserFile {
    fn from(u: &UserProfile) -> Self {
        UserFile {
            distance_km: u.distance,
            attenuation_per_km: u.attenuation,
            weight: u.weight,
            rate_min_ebit_s: u.rate_min,
            rate_max_ebit_s: u.rate_max,
        }
    }
}

impl From<ScenarioFile> for Scenario {
    fn from(file: ScenarioFile) -> Self {
        Scenario {
            node: NodeConfig {
                memory_capacity: file.node.memory_capacity,
                decoherence_rate: file.node.decoherence_rate_ebit_s,
                alpha: file.node.alpha,
                attenuation_mode: file.node.attenuation_mode,
                constraint_mode: file.node.constraint_mode,
            },
            users: file.users.iter().map(UserProfile::from).collect(),
        }
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(scenario: &Scenario) -> Self {
        ScenarioFile {
            node: NodeFile {
                memory_capacity: scenario.node.memory_capacity,
                decoherence_rate_ebit_s: scenario.node.decoherence_rate,
                alpha: scenario.node.alpha,
                attenuation_mode: scenario.node.attenuation_mode,
                constraint_mode: scenario.node.constraint_mode,
            },
            users: scenario.users.iter().map(UserFile::from).collect(),
        }
    }
}

/// Parses and fully validates a scenario file. Unknown keys are rejected.
pub fn parse_scenario(text: &str) -> Result<Scenario, SweepError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| SweepError::Parse(e.to_string()))?;
    let scenario = Scenario::from(file);
    scenario.validate()?;
    Ok(scenario)
}

/// Serializes a scenario in the file schema; `parse_scenario` round-trips it.
pub fn serialize_scenario(scenario: &Scenario) -> String {
    toml::to_string(&ScenarioFile::from(scenario)).expect("scenario serializes")
}

// ---------------------------------------------------------------------------
// sweep specs

/// The scenario parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    EpsMinOfUser,
    Tau,
    NumUsers,
    DistanceOfUser,
    MemoryCapacity,
}

impl SweepAxis {
    fn needs_user_index(self) -> bool {
        matches!(self, SweepAxis::EpsMinOfUser | SweepAxis::DistanceOfUser)
    }

    fn label(self, user_index: Option<usize>) -> String {
        match self {
            SweepAxis::EpsMinOfUser => format!("rate_min[{}] (ebit/s)", user_index.unwrap_or(0)),
            SweepAxis::Tau => "tau (s)".to_string(),
            SweepAxis::NumUsers => "users".to_string(),
            SweepAxis::DistanceOfUser => format!("distance[{}] (km)", user_index.unwrap_or(0)),
            SweepAxis::MemoryCapacity => "memory capacity (qubits)".to_string(),
        }
    }
}

/// Randomized-run settings: distances are redrawn uniformly per run and the
/// results averaged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Randomized {
    pub runs: u32,
    pub distance_min_km: f64,
    pub distance_max_km: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepTable {
    axis: SweepAxis,
    user_index: Option<usize>,
    start: f64,
    stop: f64,
    step: f64,
    #[serde(default)]
    seed: u64,
    randomized: Option<Randomized>,
    extra_user: Option<UserFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverTable {
    #[serde(default)]
    relaxation: solver::Relaxation,
    tolerance: Option<f64>,
    #[serde(default)]
    tie_break: solver::TieBreak,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    sweep: SweepTable,
    solver: Option<SolverTable>,
    node: NodeFile,
    #[serde(rename = "user")]
    users: Vec<UserFile>,
}

/// A parsed, validated sweep description.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axis: SweepAxis,
    pub user_index: Option<usize>,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub seed: u64,
    pub randomized: Option<Randomized>,
    /// Template for users beyond the base list in `num_users` sweeps.
    pub extra_user: Option<UserProfile>,
    pub solver: SolverOptions,
}

/// Parses and validates a sweep spec file (scenario included inline).
pub fn parse_sweep_spec(text: &str) -> Result<SweepSpec, SweepError> {
    let file: SweepFile = toml::from_str(text).map_err(|e| SweepError::Parse(e.to_string()))?;
    let base = Scenario::from(ScenarioFile {
        node: file.node,
        users: file.users,
    });
    base.validate()?;

    let t = file.sweep;
    if !(t.step > 0.0) {
        return Err(spec_error("step", "must be > 0"));
    }
    if !(t.start <= t.stop) {
        return Err(spec_error("start", "must be <= stop"));
    }
    if t.axis.needs_user_index() {
        match t.user_index {
            None => return Err(spec_error("user_index", "required for this axis")),
            Some(i) if i >= base.users.len() => {
                return Err(spec_error(
                    "user_index",
                    format!("{} is out of range for {} users", i, base.users.len()),
                ))
            }
            _ => {}
        }
    }
    if let Some(r) = &t.randomized {
        if r.runs < 1 {
            return Err(spec_error("randomized.runs", "must be >= 1"));
        }
        if !(r.distance_min_km >= 0.0 && r.distance_min_km <= r.distance_max_km) {
            return Err(spec_error(
                "randomized.distance_min_km",
                "need 0 <= min <= max",
            ));
        }
    }
    if t.axis == SweepAxis::NumUsers
        && t.stop.round() as usize > base.users.len()
        && t.extra_user.is_none()
    {
        return Err(spec_error(
            "extra_user",
            "required when num_users sweeps past the base user list",
        ));
    }

    let solver = match file.solver {
        Some(s) => SolverOptions {
            relaxation: s.relaxation,
            tolerance: s.tolerance.unwrap_or(1e-9),
            tie_break: s.tie_break,
        },
        None => SolverOptions::default(),
    };
    solver.validate()?;

    Ok(SweepSpec {
        base,
        axis: t.axis,
        user_index: t.user_index,
        start: t.start,
        stop: t.stop,
        step: t.step,
        seed: t.seed,
        randomized: t.randomized,
        extra_user: t.extra_user.as_ref().map(UserProfile::from),
        solver,
    })
}

// ---------------------------------------------------------------------------
// sweep execution

/// Per-user numbers of one solved point.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPoint {
    pub rate: f64,
    pub pair_yield: f64,
    pub memory_cells: Option<u64>,
}

/// Outcome of one axis point.
#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    Optimal,
    Infeasible(InfeasibleReason),
    /// Randomized point where only some runs were feasible.
    Partial {
        feasible: u32,
        total: u32,
    },
    /// The scenario at this point failed validation or solving.
    Error(String),
}

impl PointStatus {
    fn csv_token(&self) -> &'static str {
        match self {
            PointStatus::Optimal => "optimal",
            PointStatus::Infeasible(_) => "infeasible",
            PointStatus::Partial { .. } => "partial",
            PointStatus::Error(_) => "error",
        }
    }
}

/// One axis value of a sweep. For randomized sweeps the per-user numbers are
/// means over the feasible runs and `memory_cells` is left empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub status: PointStatus,
    pub objective: Option<f64>,
    pub user_count: usize,
    pub users: Vec<UserPoint>,
}

/// One run of a randomized point, kept for `--raw` output.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRun {
    pub axis_value: f64,
    pub run: u32,
    pub status: PointStatus,
    pub objective: Option<f64>,
    pub user_count: usize,
    pub users: Vec<UserPoint>,
}

/// Sweep output: rows in axis order plus metadata echoing the resolved input.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub user_index: Option<usize>,
    pub randomized: bool,
    pub points: Vec<SweepPoint>,
    pub raw_runs: Vec<RawRun>,
    /// The base scenario, serialized back out in the file schema.
    pub scenario_echo: String,
    pub tool_version: &'static str,
}

fn axis_values(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=count).map(|k| start + k as f64 * step).collect()
}

fn scenario_at(spec: &SweepSpec, axis_value: f64) -> Result<Scenario, String> {
    let mut scenario = spec.base.clone();
    match spec.axis {
        SweepAxis::EpsMinOfUser => {
            scenario.users[spec.user_index.unwrap()].rate_min = axis_value;
        }
        SweepAxis::Tau => {
            // tau is derived, so sweeping it adjusts alpha at fixed decoherence
            scenario.node.alpha = axis_value * scenario.node.decoherence_rate;
        }
        SweepAxis::NumUsers => {
            let n = axis_value.round() as usize;
            if n <= scenario.users.len() {
                scenario.users.truncate(n);
            } else {
                let template = spec.extra_user.clone().expect("validated at parse");
                while scenario.users.len() < n {
                    scenario.users.push(template.clone());
                }
            }
        }
        SweepAxis::DistanceOfUser => {
            scenario.users[spec.user_index.unwrap()].distance = axis_value;
        }
        SweepAxis::MemoryCapacity => {
            scenario.node.memory_capacity = axis_value.round() as u64;
        }
    }
    scenario.validate().map_err(|e| e.to_string())?;
    Ok(scenario)
}

fn solve_point(
    scenario: &Scenario,
    options: &SolverOptions,
) -> (PointStatus, Option<f64>, Vec<UserPoint>) {
    match solver::solve(scenario, options) {
        Ok(allocation) => match allocation.status {
            SolveStatus::Optimal => {
                let users = allocation
                    .rates
                    .iter()
                    .zip(&allocation.yields)
                    .zip(&allocation.memory_cells)
                    .map(|((&rate, &pair_yield), &cells)| UserPoint {
                        rate,
                        pair_yield,
                        memory_cells: Some(cells),
                    })
                    .collect();
                (PointStatus::Optimal, Some(allocation.objective), users)
            }
            SolveStatus::Infeasible(reason) => (PointStatus::Infeasible(reason), None, Vec::new()),
        },
        Err(error) => (PointStatus::Error(error.to_string()), None, Vec::new()),
    }
}

/// Runs the sweep: one solve per axis value, averaged over seeded randomized
/// runs when configured. Infeasible and failing points are recorded, never
/// dropped, and identical inputs give identical results.
pub fn run_sweep(spec: &SweepSpec) -> SweepResult {
    let values = axis_values(spec.start, spec.stop, spec.step);
    let mut points = Vec::with_capacity(values.len());
    let mut raw_runs = Vec::new();

    for (point_index, &axis_value) in values.iter().enumerate() {
        let scenario = match scenario_at(spec, axis_value) {
            Ok(s) => s,
            Err(message) => {
                points.push(SweepPoint {
                    axis_value,
                    status: PointStatus::Error(message),
                    objective: None,
                    user_count: spec.base.users.len(),
                    users: Vec::new(),
                });
                continue;
            }
        };

        match &spec.randomized {
            None => {
                let (status, objective, users) = solve_point(&scenario, &spec.solver);
                points.push(SweepPoint {
                    axis_value,
                    status,
                    objective,
                    user_count: scenario.users.len(),
                    users,
                });
            }
            Some(randomized) => {
                let n = scenario.users.len();
                let mut feasible = 0u32;
                let mut objective_sum = 0.0;
                let mut rate_sum = vec![0.0; n];
                let mut yield_sum = vec![0.0; n];
                for run in 0..randomized.runs {
                    let mut drawn = scenario.clone();
                    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                    rng.set_stream(((point_index as u64) << 32) | run as u64);
                    for user in &mut drawn.users {
                        user.distance = rng
                            .random_range(randomized.distance_min_km..=randomized.distance_max_km);
                    }
                    let (status, objective, users) = solve_point(&drawn, &spec.solver);
                    if let (PointStatus::Optimal, Some(obj)) = (&status, objective) {
                        feasible += 1;
                        objective_sum += obj;
                        for (j, u) in users.iter().enumerate() {
                            rate_sum[j] += u.rate;
                            yield_sum[j] += u.pair_yield;
                        }
                    }
                    raw_runs.push(RawRun {
                        axis_value,
                        run,
                        status,
                        objective,
                        user_count: n,
                        users,
                    });
                }
                let status = if feasible == randomized.runs {
                    PointStatus::Optimal
                } else if feasible == 0 {
                    PointStatus::Infeasible(InfeasibleReason::MinYieldsExceedCapacity)
                } else {
                    PointStatus::Partial {
                        feasible,
                        total: randomized.runs,
                    }
                };
                let (objective, users) = if feasible > 0 {
                    let k = feasible as f64;
                    (
                        Some(objective_sum / k),
                        (0..n)
                            .map(|j| UserPoint {
                                rate: rate_sum[j] / k,
                                pair_yield: yield_sum[j] / k,
                                memory_cells: None,
                            })
                            .collect(),
                    )
                } else {
                    (None, Vec::new())
                };
                points.push(SweepPoint {
                    axis_value,
                    status,
                    objective,
                    user_count: n,
                    users,
                });
            }
        }
    }

    SweepResult {
        axis: spec.axis,
        user_index: spec.user_index,
        randomized: spec.randomized.is_some(),
        points,
        raw_runs,
        scenario_echo: serialize_scenario(&spec.base),
        tool_version: env!("CARGO_PKG_VERSION"),
    }
}

// ---------------------------------------------------------------------------
// CSV output

/// 9 significant digits, scientific; byte-stable across runs.
fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

fn push_row(
    out: &mut String,
    axis_value: f64,
    run: Option<u32>,
    user_index: usize,
    user: Option<&UserPoint>,
    objective: Option<f64>,
    status: &PointStatus,
) {
    out.push_str(&sig9(axis_value));
    if let Some(run) = run {
        let _ = write!(out, ",{run}");
    }
    let _ = write!(out, ",{user_index}");
    match user {
        Some(u) => {
            let _ = write!(out, ",{},{}", sig9(u.rate), sig9(u.pair_yield));
            match u.memory_cells {
                Some(c) => {
                    let _ = write!(out, ",{c}");
                }
                None => out.push(','),
            }
        }
        None => out.push_str(",,,"),
    }
    match objective {
        Some(o) => {
            let _ = write!(out, ",{}", sig9(o));
        }
        None => out.push(','),
    }
    out.push(',');
    out.push_str(status.csv_token());
    out.push('\n');
}

/// The aggregated CSV table: one row per axis value and user.
pub fn csv_string(result: &SweepResult) -> String {
    let mut out = String::from("axis,user_index,rate_ebit_s,yield,memory_cells,objective,status\n");
    for point in &result.points {
        for j in 0..point.user_count {
            push_row(
                &mut out,
                point.axis_value,
                None,
                j,
                point.users.get(j),
                point.objective,
                &point.status,
            );
        }
    }
    out
}

/// Per-run CSV table for randomized sweeps (the `--raw` view).
pub fn raw_csv_string(result: &SweepResult) -> String {
    let mut out =
        String::from("axis,run,user_index,rate_ebit_s,yield,memory_cells,objective,status\n");
    for run in &result.raw_runs {
        for j in 0..run.user_count {
            push_row(
                &mut out,
                run.axis_value,
                Some(run.run),
                j,
                run.users.get(j),
                run.objective,
                &run.status,
            );
        }
    }
    out
}

/// Writes the aggregated table (or the raw per-run table) to `destination`.
pub fn write_csv(result: &SweepResult, destination: &Path, raw: bool) -> Result<(), SweepError> {
    let contents = if raw {
        raw_csv_string(result)
    } else {
        csv_string(result)
    };
    fs::write(destination, contents)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// SVG output

/// Renders the sweep as a standalone SVG line chart.
///
/// Per-user rate polylines for per-user axes; a single objective polyline for
/// `num_users` / `memory_capacity` axes and randomized sweeps. Axis ranges
/// with no feasible solution are shaded.
pub fn svg_string(result: &SweepResult) -> Result<String, SweepError> {
    let feasible = result
        .points
        .iter()
        .filter(|p| p.objective.is_some())
        .count();
    if feasible < 2 {
        return Err(SweepError::NotEnoughFeasiblePoints { feasible });
    }

    let objective_only =
        result.randomized || matches!(result.axis, SweepAxis::NumUsers | SweepAxis::MemoryCapacity);

    let series = if objective_only {
        vec![Series {
            label: "objective".to_string(),
            points: result
                .points
                .iter()
                .map(|p| (p.axis_value, p.objective))
                .collect(),
        }]
    } else {
        let n = result
            .points
            .iter()
            .map(|p| p.user_count)
            .max()
            .unwrap_or(0);
        (0..n)
            .map(|j| Series {
                label: format!("user {j}"),
                points: result
                    .points
                    .iter()
                    .map(|p| (p.axis_value, p.users.get(j).map(|u| u.rate)))
                    .collect(),
            })
            .collect()
    };

    // contiguous runs of infeasible points become shaded bands
    let mut shaded = Vec::new();
    let mut band: Option<(f64, f64)> = None;
    for point in &result.points {
        if point.objective.is_none() {
            band = match band {
                None => Some((point.axis_value, point.axis_value)),
                Some((a, _)) => Some((a, point.axis_value)),
            };
        } else if let Some(b) = band.take() {
            shaded.push(b);
        }
    }
    if let Some(b) = band {
        shaded.push(b);
    }

    let chart = Chart {
        x_label: result.axis.label(result.user_index),
        y_label: if objective_only {
            "objective (weighted pairs)".to_string()
        } else {
            "rate (ebit/s)".to_string()
        },
        series,
        shaded,
    };
    Ok(chart.render())
}

/// Renders the chart into a file.
pub fn render_svg(result: &SweepResult, destination: &Path) -> Result<(), SweepError> {
    let svg = svg_string(result)?;
    fs::write(destination, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const BASE: &str = r#"
[node]
memory_capacity = 35
decoherence_rate_ebit_s = 1e9
alpha = 3.0

[[user]]
distance_km = 2.0
attenuation_per_km = 0.2
weight = 1.0
rate_min_ebit_s = 1.2e9
rate_max_ebit_s = 10e9

[[user]]
distance_km = 2.0
attenuation_per_km = 0.2
weight = 1.0
rate_min_ebit_s = 1.2e9
rate_max_ebit_s = 10e9
"#;

    fn sweep_text(header: &str) -> String {
        format!("{header}\n{BASE}")
    }

    #[test]
    fn minimal_scenario_parses_with_derived_window() {
        let text = r#"
[node]
memory_capacity = 35
decoherence_rate_ebit_s = 1e9
alpha = 3.0

[[user]]
distance_km = 2.0
attenuation_per_km = 0.2
weight = 1.0
rate_min_ebit_s = 1.2e9
rate_max_ebit_s = 10e9
"#;
        let scenario = parse_scenario(text).unwrap();
        assert_relative_eq!(scenario.node.tau(), 3e-9, max_relative = 1e-12);
        assert_eq!(scenario.node.attenuation_mode, AttenuationMode::Natural);
    }

    #[test]
    fn alpha_at_two_is_rejected_by_name() {
        let text = r#"
[node]
memory_capacity = 35
decoherence_rate_ebit_s = 1e9
alpha = 2.0

[[user]]
distance_km = 2.0
attenuation_per_km = 0.2
weight = 1.0
rate_min_ebit_s = 1.2e9
rate_max_ebit_s = 10e9
"#;
        let err = parse_scenario(text).unwrap_err().to_string();
        assert!(err.contains("node.alpha"), "{err}");
        assert!(err.contains("> 2"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("alpha = 3.0", "alpha = 3.0\nwindow_ns = 3.0");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("window_ns"), "{err}");
    }

    #[test]
    fn scenario_round_trips_through_the_file_schema() {
        let scenario = parse_scenario(BASE).unwrap();
        let text = serialize_scenario(&scenario);
        let again = parse_scenario(&text).unwrap();
        assert_eq!(scenario, again);
    }

    #[test]
    fn rate_min_sweep_keeps_objective_flat_and_rates_monotone() {
        let text = sweep_text(
            r#"
[sweep]
axis = "eps_min_of_user"
user_index = 1
start = 1.2e9
stop = 5.0e9
step = 0.2e9

[solver]
tie_break = "lexicographic"
"#,
        );
        let spec = parse_sweep_spec(&text).unwrap();
        let result = run_sweep(&spec);
        assert_eq!(result.points.len(), 20);
        let objectives: Vec<f64> = result.points.iter().map(|p| p.objective.unwrap()).collect();
        let spread = (objectives.iter().cloned().fold(f64::MIN, f64::max)
            - objectives.iter().cloned().fold(f64::MAX, f64::min))
        .abs();
        assert!(spread / objectives[0] < 1e-9);
        for pair in result.points.windows(2) {
            assert!(pair[1].users[1].rate >= pair[0].users[1].rate - 1e-6);
            assert!(pair[1].users[0].rate <= pair[0].users[0].rate + 1e-6);
        }
    }

    #[test]
    fn tau_sweep_marks_the_infeasible_tail() {
        let text = r#"
[sweep]
axis = "tau"
start = 3e-9
stop = 7.5e-9
step = 1e-10

[node]
memory_capacity = 35
decoherence_rate_ebit_s = 1e9
alpha = 3.0

[[user]]
distance_km = 2.0
attenuation_per_km = 0.2
weight = 1.0
rate_min_ebit_s = 2.6e9
rate_max_ebit_s = 10e9

[[user]]
distance_km = 2.0
attenuation_per_km = 0.2
weight = 1.0
rate_min_ebit_s = 2.8e9
rate_max_ebit_s = 10e9
"#;
        let spec = parse_sweep_spec(text).unwrap();
        let result = run_sweep(&spec);
        for point in &result.points {
            let feasible = matches!(point.status, PointStatus::Optimal);
            // threshold at C / (sum of minima) = 6.481481 ns
            if point.axis_value < 6.481e-9 {
                assert!(feasible, "tau {} should be feasible", point.axis_value);
            }
            if point.axis_value > 6.482e-9 {
                assert!(!feasible, "tau {} should be infeasible", point.axis_value);
            }
        }
    }

    #[test]
    fn capacity_sweep_objective_is_nondecreasing() {
        let text = sweep_text(
            r#"
[sweep]
axis = "memory_capacity"
start = 15
stop = 50
step = 1
"#,
        );
        let spec = parse_sweep_spec(&text).unwrap();
        let result = run_sweep(&spec);
        let objectives: Vec<f64> = result.points.iter().filter_map(|p| p.objective).collect();
        assert_eq!(objectives.len(), 36);
        for pair in objectives.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12);
        }
    }

    #[test]
    fn csv_row_count_includes_infeasible_points() {
        let text = sweep_text(
            r#"
[sweep]
axis = "eps_min_of_user"
user_index = 1
start = 1.2e9
stop = 5.0e9
step = 0.2e9
"#,
        );
        let spec = parse_sweep_spec(&text).unwrap();
        let result = run_sweep(&spec);
        let csv = csv_string(&result);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(
            lines[0],
            "axis,user_index,rate_ebit_s,yield,memory_cells,objective,status"
        );
        assert_eq!(lines.len(), 1 + 20 * 2);

        let single_point = {
            let mut s = spec.clone();
            s.stop = s.start;
            s
        };
        let one = run_sweep(&single_point);
        assert_eq!(csv_string(&one).trim_end().lines().count(), 1 + 2);
    }

    #[test]
    fn csv_is_byte_stable_across_runs() {
        let text = sweep_text(
            r#"
[sweep]
axis = "num_users"
start = 1
stop = 4
step = 1
seed = 42

[sweep.randomized]
runs = 25
distance_min_km = 0.5
distance_max_km = 5.0

[sweep.extra_user]
distance_km = 2.0
attenuation_per_km = 0.2
weight = 0.6
rate_min_ebit_s = 1.2e9
rate_max_ebit_s = 10e9
"#,
        );
        let spec = parse_sweep_spec(&text).unwrap();
        let a = run_sweep(&spec);
        let b = run_sweep(&spec);
        assert_eq!(csv_string(&a), csv_string(&b));
        assert_eq!(raw_csv_string(&a), raw_csv_string(&b));
        assert!(raw_csv_string(&a).trim_end().lines().count() > 25);
    }

    #[test]
    fn chart_needs_two_feasible_points() {
        let text = sweep_text(
            r#"
[sweep]
axis = "eps_min_of_user"
user_index = 1
start = 1.2e9
stop = 1.2e9
step = 0.2e9
"#,
        );
        let spec = parse_sweep_spec(&text).unwrap();
        let result = run_sweep(&spec);
        let err = svg_string(&result).unwrap_err();
        assert!(err.to_string().contains("CSV"), "{err}");
    }

    #[test]
    fn chart_draws_a_polyline_per_user() {
        let text = sweep_text(
            r#"
[sweep]
axis = "eps_min_of_user"
user_index = 1
start = 1.2e9
stop = 5.0e9
step = 0.2e9
"#,
        );
        let spec = parse_sweep_spec(&text).unwrap();
        let svg = svg_string(&run_sweep(&spec)).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("rate (ebit/s)"));
    }

    #[test]
    fn spec_validation_names_fields() {
        let bad_step = sweep_text(
            r#"
[sweep]
axis = "tau"
start = 3e-9
stop = 7e-9
step = 0.0
"#,
        );
        let err = parse_sweep_spec(&bad_step).unwrap_err().to_string();
        assert!(err.contains("sweep.step"), "{err}");

        let bad_index = sweep_text(
            r#"
[sweep]
axis = "eps_min_of_user"
user_index = 7
start = 1e9
stop = 2e9
step = 1e9
"#,
        );
        let err = parse_sweep_spec(&bad_index).unwrap_err().to_string();
        assert!(err.contains("sweep.user_index"), "{err}");
    }
}
