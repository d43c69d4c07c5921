//! Command-line front end to the solvers and verifiers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sigdesign::epbe::construct_epbe;
use sigdesign::outer::{welfare, EquilibriumOutcome, OutcomeLabel, WelfareReport};

mod check;
mod error;
mod io;
mod solve;
mod sweep;
mod table;

use error::{CliError, CliResult};
use table::{Param, Row};

#[derive(Debug, Parser)]
#[command(
    name = "sigdesign",
    version,
    about = "Solve and verify equilibria of school signaling-design games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Common {
    /// Market parameters (JSON); for `sweep`, a sweep file with `base` and `axes`.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Policy profile or equilibrium bundle (JSON).
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// Evenly spaced efforts in the deviation grid, before adding thresholds.
    #[arg(long, global = true, default_value_t = 21)]
    grid_points: usize,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Worker threads for sweeps (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Audit deviations against the deviator's worst enumerated continuation.
    #[arg(long, global = true)]
    pessimistic: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form outcomes for the market, with deviation audits.
    Solve,
    /// Check an equilibrium (or the canonical one of a profile); exit 1 on failure.
    Verify,
    /// Headline outcome at every point of a parameter grid.
    Sweep,
    /// Compare the canonical equilibrium of a profile with the enumerator; exit 1 on mismatch.
    OracleCompare,
    /// Welfare of the headline outcome, or of the canonical equilibrium of `--profile`.
    Welfare(PlotArgs),
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Parameter varied in the plot data.
    #[arg(long, value_enum, default_value = "theta_L")]
    plot_param: Param,
    /// Comma-separated values of the plotted parameter.
    #[arg(long, value_delimiter = ',', requires = "plot_out")]
    plot_values: Vec<f64>,
    /// CSV file receiving the plot data.
    #[arg(long, requires = "plot_values")]
    plot_out: Option<PathBuf>,
}

/// Output of `welfare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WelfareOutput {
    label: OutcomeLabel,
    welfare: WelfareReport,
}

fn json_only(format: Option<Format>, command: &str) -> CliResult<()> {
    if format == Some(Format::Csv) {
        return Err(CliError::input(format!("`{command}` writes JSON only")));
    }
    Ok(())
}

fn welfare_of(
    params: &sigdesign::market::MarketParams,
    profile: Option<&sigdesign::monitoring::PolicyProfile>,
    tol: f64,
) -> CliResult<EquilibriumOutcome> {
    match profile {
        Some(p) => {
            let eq = construct_epbe(p, params, tol)?;
            Ok(EquilibriumOutcome::from_equilibrium(
                &eq,
                params,
                OutcomeLabel::Canonical,
            )?)
        }
        None => solve::headline(params, tol),
    }
}

/// Runs the command; `Ok(false)` signals a failed verification.
fn run(cli: Cli) -> CliResult<bool> {
    let c = &cli.common;
    if !(c.tol.is_finite() && c.tol > 0.0) {
        return Err(CliError::input(format!("--tol must be positive, got {}", c.tol)));
    }
    if c.grid_points < 2 {
        return Err(CliError::input("--grid-points must be at least 2"));
    }
    let out = c.out.as_deref();
    match &cli.command {
        Command::Solve => {
            let params = io::load_params(io::require(&c.params, "params")?)?;
            let report = solve::solve_report(&params, c.grid_points, c.pessimistic, c.tol)?;
            match c.format.unwrap_or(Format::Json) {
                Format::Json => io::emit_json(out, &report)?,
                Format::Csv => {
                    let rows = report
                        .solution
                        .outcomes
                        .iter()
                        .map(|o| Row::new(&params, o))
                        .collect::<CliResult<Vec<_>>>()?;
                    table::write_csv(out, None, &rows)?;
                }
            }
            Ok(true)
        }
        Command::Verify => {
            json_only(c.format, "verify")?;
            let params = io::load_params(io::require(&c.params, "params")?)?;
            let input = io::load_profile_input(io::require(&c.profile, "profile")?)?;
            let report = check::verify(input, &params, c.grid_points, c.tol)?;
            io::emit_json(out, &report)?;
            Ok(report.passed)
        }
        Command::Sweep => {
            let plan: sweep::SweepPlan = io::load_json(io::require(&c.params, "params")?)?;
            let points = plan.points()?;
            let rows = match c.jobs {
                Some(0) => return Err(CliError::input("--jobs must be at least 1")),
                Some(j) => rayon::ThreadPoolBuilder::new()
                    .num_threads(j)
                    .build()
                    .map_err(|e| CliError::input(format!("--jobs: {e}")))?
                    .install(|| sweep::run(&points, c.tol))?,
                None => sweep::run(&points, c.tol)?,
            };
            match c.format.unwrap_or(Format::Csv) {
                Format::Csv => table::write_csv(out, None, &rows)?,
                Format::Json => io::emit_json(out, &rows)?,
            }
            Ok(true)
        }
        Command::OracleCompare => {
            json_only(c.format, "oracle-compare")?;
            let params = io::load_params(io::require(&c.params, "params")?)?;
            let input = io::load_profile_input(io::require(&c.profile, "profile")?)?;
            let cmp = check::oracle_compare(input.profile(), &params, c.grid_points, c.tol)?;
            io::emit_json(out, &cmp)?;
            let verdict = match cmp.matched {
                Some(k) => format!("match (enumerated equilibrium {} of {})", k + 1, cmp.oracle.len()),
                None => format!("mismatch ({} enumerated equilibria)", cmp.oracle.len()),
            };
            eprintln!("{verdict}");
            Ok(cmp.matched.is_some())
        }
        Command::Welfare(plot) => {
            let params = io::load_params(io::require(&c.params, "params")?)?;
            let profile = match &c.profile {
                Some(path) => Some(io::load_profile_input(path)?.profile().clone()),
                None => None,
            };
            let o = welfare_of(&params, profile.as_ref(), c.tol)?;
            let report = WelfareOutput {
                label: o.label,
                welfare: welfare(&o, &params)?,
            };
            match c.format.unwrap_or(Format::Json) {
                Format::Json => io::emit_json(out, &report)?,
                Format::Csv => table::write_csv(out, None, &[Row::new(&params, &o)?])?,
            }
            if let Some(plot_out) = &plot.plot_out {
                let rows = plot
                    .plot_values
                    .iter()
                    .map(|v| {
                        let p = plot.plot_param.apply(&params, *v)?;
                        Row::new(&p, &welfare_of(&p, profile.as_ref(), c.tol)?)
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                table::write_csv(Some(plot_out), Some((plot.plot_param, &plot.plot_values)), &rows)?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
