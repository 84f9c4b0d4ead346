//! Command-line harness: solve scenarios, run sweeps, validate against the
//! oracles. Exit codes: 0 success/feasible, 2 infeasible scenario,
//! 3 validation mismatch, 1 usage or parse error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use entrate::model::{RateAllocation, Scenario, SolveStatus};
use entrate::oracle::{self, GridSpec};
use entrate::solver::{self, Relaxation, SolverOptions};
use entrate::sweep;

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "entrate",
    version,
    about = "Entanglement rate allocation over a shared quantum memory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario file and print the allocation.
    Solve {
        scenario: PathBuf,
        /// Enforce the integer memory-cell constraint.
        #[arg(long)]
        integer: bool,
        /// Print the allocation as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run a parameter sweep and write CSV (and optionally an SVG chart).
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Write per-run rows for randomized sweeps instead of averages.
        #[arg(long)]
        raw: bool,
    },
    /// Check the exact solvers against the brute-force grid and dual oracles.
    OracleCheck {
        scenario: PathBuf,
        /// Rate grid step for the brute-force search, ebit/s.
        #[arg(long, default_value_t = 1e7)]
        grid_step: f64,
    },
    /// Monte-Carlo validation of the expected successful pairs at the solved
    /// allocation.
    McValidate {
        scenario: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // keep exit code 1 for usage errors (clap defaults to 2);
            // --help/--version still exit 0
            let is_help = !err.use_stderr();
            let _ = err.print();
            return ExitCode::from(if is_help { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn load_scenario(path: &PathBuf) -> anyhow::Result<Scenario> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sweep::parse_scenario(&text)?)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Solve {
            scenario,
            integer,
            json,
        } => {
            let scenario = load_scenario(&scenario)?;
            let options = SolverOptions {
                relaxation: if integer {
                    Relaxation::Integer
                } else {
                    Relaxation::Continuous
                },
                ..SolverOptions::default()
            };
            let allocation = solver::solve(&scenario, &options)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&allocation)?);
            } else {
                print_allocation(&allocation);
            }
            Ok(if allocation.status.is_optimal() {
                0
            } else {
                EXIT_INFEASIBLE
            })
        }
        Command::Sweep {
            spec,
            csv,
            svg,
            raw,
        } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let spec = sweep::parse_sweep_spec(&text)?;
            let result = sweep::run_sweep(&spec);
            sweep::write_csv(&result, &csv, raw)?;
            println!("wrote {}", csv.display());
            if let Some(svg_path) = svg {
                sweep::render_svg(&result, &svg_path)?;
                println!("wrote {}", svg_path.display());
            }
            Ok(0)
        }
        Command::OracleCheck {
            scenario,
            grid_step,
        } => {
            let scenario = load_scenario(&scenario)?;
            oracle_check(&scenario, grid_step)
        }
        Command::McValidate {
            scenario,
            trials,
            seed,
        } => {
            let scenario = load_scenario(&scenario)?;
            mc_validate(&scenario, trials, seed)
        }
    }
}

fn print_allocation(allocation: &RateAllocation) {
    match allocation.status {
        SolveStatus::Optimal => {
            println!(
                "{:>5}  {:>16}  {:>14}  {:>6}",
                "user", "rate (ebit/s)", "yield", "cells"
            );
            for j in 0..allocation.rates.len() {
                println!(
                    "{:>5}  {:>16.6e}  {:>14.9}  {:>6}",
                    j, allocation.rates[j], allocation.yields[j], allocation.memory_cells[j]
                );
            }
            println!("objective: {:.9}", allocation.objective);
            println!("status: optimal");
        }
        SolveStatus::Infeasible(reason) => {
            println!("status: infeasible ({reason:?})");
        }
    }
}

fn oracle_check(scenario: &Scenario, grid_step: f64) -> anyhow::Result<u8> {
    if scenario.users.len() > oracle::MAX_ORACLE_USERS {
        bail!(
            "oracle-check supports at most {} users, scenario has {}",
            oracle::MAX_ORACLE_USERS,
            scenario.users.len()
        );
    }
    let options = SolverOptions::default();
    let exact = solver::solve_continuous(scenario, &options)?;
    if !exact.status.is_optimal() {
        println!("scenario is infeasible; nothing to cross-check");
        return Ok(EXIT_INFEASIBLE);
    }

    let mut ok = true;

    let grid = GridSpec::for_scenario(scenario, grid_step);
    let brute = oracle::brute_force_best(scenario, &grid)?;
    let grid_gap = (exact.objective - brute.objective).abs() / exact.objective.abs();
    println!(
        "continuous vs grid oracle: objective {:.9} vs {:.9}, relative gap {:.3e} (limit 1e-3)",
        exact.objective, brute.objective, grid_gap
    );
    ok &= grid_gap <= 1e-3;

    let dual = solver::solve_dual(scenario, &options)?;
    let dual_gap = (exact.objective - dual.objective).abs() / exact.objective.abs();
    println!(
        "continuous vs dual bisection: relative gap {:.3e} (limit 1e-9)",
        dual_gap
    );
    ok &= dual_gap <= 1e-9;

    if scenario.node.memory_capacity <= oracle::MAX_ORACLE_CAPACITY {
        let integer = solver::solve_integer(scenario, &options)?;
        let enumerated = oracle::enumerate_integer_best(scenario, options.tie_break)?;
        let cells_match =
            integer.memory_cells == enumerated.memory_cells && integer.status == enumerated.status;
        println!(
            "integer vs enumeration: cells {:?} vs {:?} ({})",
            integer.memory_cells,
            enumerated.memory_cells,
            if cells_match { "match" } else { "MISMATCH" }
        );
        ok &= cells_match;
    } else {
        println!(
            "integer enumeration skipped (capacity {} exceeds {})",
            scenario.node.memory_capacity,
            oracle::MAX_ORACLE_CAPACITY
        );
    }

    Ok(if ok { 0 } else { EXIT_MISMATCH })
}

fn mc_validate(scenario: &Scenario, trials: u64, seed: u64) -> anyhow::Result<u8> {
    let allocation = solver::solve_continuous(scenario, &SolverOptions::default())?;
    if !allocation.status.is_optimal() {
        println!("scenario is infeasible; nothing to validate");
        return Ok(EXIT_INFEASIBLE);
    }
    let mut ok = true;
    for (j, user) in scenario.users.iter().enumerate() {
        let report = oracle::monte_carlo_window(
            user,
            allocation.rates[j],
            &scenario.node,
            trials,
            seed.wrapping_add(j as u64),
        );
        let deviation = (report.empirical_mean - report.analytic_discrete).abs();
        let within = deviation <= 3.5 * report.std_error.max(f64::MIN_POSITIVE);
        println!(
            "user {j}: mean {:.6} vs analytic {:.6} (fluid {:.6}), stderr {:.6} [{}]",
            report.empirical_mean,
            report.analytic_discrete,
            report.analytic_continuous,
            report.std_error,
            if within { "ok" } else { "OUT OF RANGE" }
        );
        ok &= within;
    }
    Ok(if ok { 0 } else { EXIT_MISMATCH })
}
