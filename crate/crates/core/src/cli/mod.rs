//! Command-line front end: `run`, `verify` and `list`.
//!
//! Exit codes: 0 verification passed, 1 verification failed, 2 config or
//! I/O error, 3 divergence during integration.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::FlowMapError;
use crate::mapping::{
    loglog_slope, solve_mapping, verify_composition, MappingResult, VerificationReport,
};
use crate::scenarios::list_scenarios;

pub use config::{PreparedRun, RunConfig};

/// Environment variable overriding the configured output directory.
pub const OUTPUT_ENV: &str = "FLOWMAP_OUT";

/// Smallest observed order `cmd_verify` accepts.
pub const MIN_ORDER: f64 = 3.5;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "flowmap",
    version,
    about = "Transition maps between quadratic Hamiltonian flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a configured problem and write trajectories and a report.
    Run { config: PathBuf },
    /// Solve at h and h/2, check tolerances and the residual's convergence order.
    Verify { config: PathBuf },
    /// List registered scenarios and their parameters.
    List,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Divergence(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Divergence(m) => m,
        }
    }
}

fn solve_error(e: FlowMapError) -> CliError {
    match e {
        FlowMapError::Divergence { .. } | FlowMapError::NonFinite(_) => {
            CliError::Divergence(e.to_string())
        }
        other => CliError::Config(other.to_string()),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Verify { config } => cmd_verify(&config),
        Command::List => {
            print!("{}", cmd_list());
            Ok(EXIT_PASS)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("flowmap: {}", e.message());
            e.code()
        }
    }
}

/// One line per scenario: name, description, then `key=default` pairs.
pub fn cmd_list() -> String {
    let mut out = String::new();
    for spec in list_scenarios() {
        let params: Vec<String> = spec
            .params
            .iter()
            .map(|p| format!("{}={}", p.key, p.default))
            .collect();
        let _ = writeln!(
            out,
            "{}\t{}\t[{}]",
            spec.name,
            spec.description,
            params.join(", ")
        );
    }
    out
}

fn load(path: &Path) -> Result<PreparedRun, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config = RunConfig::parse(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut run = config
        .prepare()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
        run.output_dir = PathBuf::from(dir);
    }
    Ok(run)
}

#[derive(Debug, Serialize)]
struct GeometrySummary {
    arc_length: f64,
    spacelike_length: f64,
    timelike_length: f64,
    degenerate_samples: usize,
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    label: &'a str,
    n: usize,
    steps: usize,
    h: f64,
    residual_max: f64,
    residual_direct_max: f64,
    composition_gap_max: f64,
    transport_error_max: f64,
    eta0_consistent: bool,
    passed: bool,
    verification: &'a VerificationReport,
    geometry: Option<GeometrySummary>,
}

fn cmd_run(path: &Path) -> Result<i32, CliError> {
    let run = load(path)?;
    let result = solve_mapping(&run.problem).map_err(solve_error)?;
    let report = verify_composition(&result, run.tolerance);
    write_outputs(&run, &result, &report)?;
    print_summary(&run.label, &report);
    Ok(if report.passed { EXIT_PASS } else { EXIT_FAIL })
}

#[derive(Debug, Serialize)]
struct VerifyReport<'a> {
    label: &'a str,
    coarse: &'a VerificationReport,
    fine: &'a VerificationReport,
    h_coarse: f64,
    h_fine: f64,
    observed_order: f64,
    /// False when the fine residual is already at rounding level, where the
    /// ratio carries no order information.
    order_applicable: bool,
    order_ok: bool,
    passed: bool,
}

/// Residuals below this are dominated by rounding in the sampled derivative.
fn rounding_floor(result: &MappingResult) -> f64 {
    let t_max = result
        .t_composed
        .samples
        .iter()
        .map(|m| m.frobenius_norm())
        .fold(1.0, f64::max);
    64.0 * f64::EPSILON * t_max / result.t_composed.grid.h()
}

fn cmd_verify(path: &Path) -> Result<i32, CliError> {
    let run = load(path)?;
    let coarse_grid = run.problem.tau_grid;
    let fine_grid = coarse_grid.refined(2);
    let coarse = solve_mapping(&run.problem).map_err(solve_error)?;
    let fine = solve_mapping(&run.problem.with_grid(fine_grid)).map_err(solve_error)?;
    let coarse_report = verify_composition(&coarse, run.tolerance);
    let fine_report = verify_composition(&fine, run.tolerance);

    let observed_order = loglog_slope(&[
        (coarse_grid.h(), coarse.residual_max),
        (fine_grid.h(), fine.residual_max),
    ]);
    let order_applicable = fine.residual_max > rounding_floor(&fine);
    let order_ok = !order_applicable || observed_order >= MIN_ORDER;
    let passed = coarse_report.passed && fine_report.passed && order_ok;

    write_outputs(&run, &coarse, &coarse_report)?;
    let report = VerifyReport {
        label: &run.label,
        coarse: &coarse_report,
        fine: &fine_report,
        h_coarse: coarse_grid.h(),
        h_fine: fine_grid.h(),
        observed_order,
        order_applicable,
        order_ok,
        passed,
    };
    write_atomic(&run.output_dir, "verify.json", &to_json(&report)?)?;
    print_summary(&run.label, &coarse_report);
    println!(
        "observed order = {observed_order:.3}{}",
        if order_applicable {
            ""
        } else {
            " (residual at rounding level; not checked)"
        }
    );
    println!("verify: {}", if passed { "PASS" } else { "FAIL" });
    Ok(if passed { EXIT_PASS } else { EXIT_FAIL })
}

fn print_summary(label: &str, report: &VerificationReport) {
    println!("{label}: residual_max = {:e}", report.residual_max);
    println!(
        "{label}: composition_gap_max = {:e}",
        report.composition_gap_max
    );
    println!(
        "{label}: transport_error_max = {:e}",
        report.transport_error_max
    );
    if !report.eta0_consistent {
        println!(
            "{label}: eta0 differs from K xi0 by {:e}",
            report.eta0_mismatch
        );
    }
    println!(
        "{label}: {} (tol {:e})",
        if report.passed { "PASS" } else { "FAIL" },
        report.tolerance
    );
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Config(format!("cannot serialize report: {e}")))
}

fn write_outputs(
    run: &PreparedRun,
    result: &MappingResult,
    report: &VerificationReport,
) -> Result<(), CliError> {
    let dir = &run.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Config(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })?;
    let tau = result.tau();
    let n = run.problem.n();
    let xi: Vec<&[f64]> = result.xi.samples.iter().map(|s| s.values()).collect();
    let eta: Vec<&[f64]> = result
        .eta_independent
        .samples
        .iter()
        .map(|s| s.values())
        .collect();
    write_atomic(dir, "xi.csv", &state_csv(&tau, &result.t, &xi))?;
    write_atomic(dir, "eta.csv", &state_csv(&tau, &result.t, &eta))?;
    let t_rows: Vec<&[f64]> = result
        .t_composed
        .samples
        .iter()
        .map(|m| m.as_slice())
        .collect();
    write_atomic(dir, "T.csv", &matrix_csv(&tau, 2 * n, &t_rows))?;

    let grid = run.problem.tau_grid;
    let report = RunReport {
        label: &run.label,
        n,
        steps: grid.steps(),
        h: grid.h(),
        residual_max: result.residual_max,
        residual_direct_max: result.residual_direct_max,
        composition_gap_max: result.composition_gap_max,
        transport_error_max: result.transport_error_max,
        eta0_consistent: report.eta0_consistent,
        passed: report.passed,
        verification: report,
        geometry: run.geometry.as_ref().map(|g| GeometrySummary {
            arc_length: g.arc_length,
            spacelike_length: g.spacelike_length,
            timelike_length: g.timelike_length,
            degenerate_samples: g.degenerate_samples,
        }),
    };
    write_atomic(dir, "report.json", &to_json(&report)?)
}

/// `tau,t,comp_1..comp_2n`, one row per grid point.
pub fn state_csv(tau: &[f64], t: &[f64], rows: &[&[f64]]) -> String {
    let width = rows.first().map_or(0, |r| r.len());
    let mut out = String::from("tau,t");
    for i in 1..=width {
        let _ = write!(out, ",comp_{i}");
    }
    out.push('\n');
    for ((tau, t), row) in tau.iter().zip(t).zip(rows) {
        let _ = write!(out, "{tau},{t}");
        for v in row.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// `tau,t_11..t_{2n}{2n}` with row-major entries. Indices are separated by
/// an underscore once the order exceeds 9.
pub fn matrix_csv(tau: &[f64], order: usize, rows: &[&[f64]]) -> String {
    let mut out = String::from("tau");
    for i in 1..=order {
        for j in 1..=order {
            if order > 9 {
                let _ = write!(out, ",t_{i}_{j}");
            } else {
                let _ = write!(out, ",t_{i}{j}");
            }
        }
    }
    out.push('\n');
    for (tau, row) in tau.iter().zip(rows) {
        let _ = write!(out, "{tau}");
        for v in row.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let target = dir.join(name);
    let io_err =
        |e: std::io::Error| CliError::Config(format!("cannot write {}: {e}", target.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.persist(&target).map_err(|e| io_err(e.error))?;
    Ok(())
}
