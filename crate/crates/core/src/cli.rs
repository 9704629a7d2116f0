//! Command-line front end. Every subcommand is a thin composition of library
//! calls; exit status 2 means invalid input, 3 a numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{bloch_series, f_sweep, AnalysisConfig, PhaseConvention};
use crate::counterexample::{build_dual, evaluate_pair};
use crate::error::{Error, Result};
use crate::format::{fmt_f64, ser_f64, ser_opt_f64};
use crate::models::{HamiltonianModel, SampledHamiltonian, SpinHalfParams};
use crate::numerics::TimeGrid;
use crate::scenario::{default_tau, run_model, spin_half_grid};
use crate::tracking::{coupling_ratios, track_frames};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "ADIABATIC_AUDIT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "adiabatic-audit",
    version,
    about = "Adiabatic-condition diagnostics for time-dependent quantum systems",
    long_about = "Adiabatic-condition diagnostics for time-dependent quantum systems.\n\n\
        Units: ħ = 1, all frequencies are angular (radians per unit time). Levels are \
        numbered from 0 in ascending energy. The spin-half model is \
        H(t) = (omega0/2)(σx sinθ cos ωt + σy sinθ sin ωt + σz cosθ)."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the spin-half model and report fidelity, coefficients and verdicts.
    Evolve(EvolveArgs),
    /// Coupling ratios only, without integrating the Schrödinger equation.
    Condition(ConditionArgs),
    /// Tabulate f(omega0/omega) = sinθ/√(r² − 2r cosθ + 1).
    SweepF(SweepFArgs),
    /// Build the dual system H_b and evaluate both systems.
    Counterexample(CounterexampleArgs),
    /// Bloch vectors of the exact and adiabatic reference states.
    Bloch(EvolveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    Full,
    Dynamical,
}

impl From<Convention> for PhaseConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Full => PhaseConvention::FullAlpha,
            Convention::Dynamical => PhaseConvention::DynamicalOnly,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Include per-node series in JSON reports.
    #[arg(long)]
    pub series: bool,
}

#[derive(Debug, Args)]
pub struct SpinHalfArgs {
    /// Level splitting ω₀ (> 0).
    #[arg(long, allow_negative_numbers = true)]
    pub omega0: f64,
    /// Field rotation rate ω (> 0).
    #[arg(long, allow_negative_numbers = true)]
    pub omega: f64,
    /// Field tilt θ in (0, π).
    #[arg(long, allow_negative_numbers = true)]
    pub theta: f64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Total evolution time; defaults to two periods of the slowest of ω₀, ω, ω̄.
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Number of intervals; defaults to the shortest period over 200 per step.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 0.1)]
    pub condition_threshold: f64,
    #[arg(long, default_value_t = 0.99)]
    pub fidelity_threshold: f64,
    /// Relative Bloch-rate tolerance (0.1 = 10%).
    #[arg(long, default_value_t = 0.1)]
    pub rate_tolerance: f64,
}

impl ThresholdArgs {
    fn config(&self) -> Result<AnalysisConfig> {
        let config = AnalysisConfig {
            condition_threshold: self.condition_threshold,
            fidelity_threshold: self.fidelity_threshold,
            rate_tolerance: self.rate_tolerance,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub model: SpinHalfArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Initial instantaneous level (0 = lowest).
    #[arg(long, default_value_t = 0)]
    pub level: usize,
    #[arg(long, value_enum, default_value = "full")]
    pub phase_convention: Convention,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    /// Sampled model JSON file ({"dim", "times", "matrices"}).
    #[arg(long, conflicts_with_all = ["omega0", "omega", "theta"])]
    pub model: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepFArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub theta: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub r_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub r_max: f64,
    #[arg(long)]
    pub points: usize,
    /// With csv output, also write the JSON summary here.
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    #[command(flatten)]
    pub model: SpinHalfArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 0)]
    pub level: usize,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parse `args`, run, and return the process exit status. Diagnostics go to
/// `stderr` as a single line.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return if code == 0 { EXIT_OK } else { EXIT_INVALID };
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_validation() {
                EXIT_INVALID
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

/// Size the global worker pool from `ADIABATIC_AUDIT_THREADS` when set.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            // already initialized is fine
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("output failed: {e}"))
}

fn with_output(
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(io_err)
        }
        None => f(stdout),
    }
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    writeln!(w).map_err(io_err)
}

fn spin_half_setup(model: &SpinHalfArgs, grid: &GridArgs) -> Result<(SpinHalfParams, TimeGrid)> {
    let p = SpinHalfParams::new(model.omega0, model.omega, model.theta)?;
    let tau = grid.tau.unwrap_or_else(|| default_tau(&p));
    let grid = match grid.steps {
        Some(steps) => TimeGrid::new(0.0, tau, steps)?,
        None => spin_half_grid(&p, tau)?,
    };
    Ok((p, grid))
}

fn execute(command: &Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Evolve(args) => cmd_evolve(args, stdout),
        Command::Condition(args) => cmd_condition(args, stdout),
        Command::SweepF(args) => cmd_sweep_f(args, stdout),
        Command::Counterexample(args) => cmd_counterexample(args, stdout),
        Command::Bloch(args) => cmd_bloch(args, stdout),
    }
}

pub fn cmd_evolve(args: &EvolveArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = args.thresholds.config()?;
    let (p, grid) = spin_half_setup(&args.model, &args.grid)?;
    if args.level > 1 {
        return Err(Error::InvalidParameter(format!(
            "level must be 0 or 1, got {}",
            args.level
        )));
    }
    let run = run_model(
        &HamiltonianModel::SpinHalfRotating(p),
        &grid,
        args.level,
        args.phase_convention.into(),
        &config,
    )?;
    with_output(&args.output.out, stdout, |w| match args.output.format {
        Format::Json => write_json(w, &run.report.to_json(args.output.series)),
        Format::Csv => run.report.write_csv(w),
    })
}

pub fn cmd_condition(args: &ConditionArgs, stdout: &mut dyn Write) -> Result<()> {
    let (model, grid) = match &args.model {
        Some(path) => {
            let sampled = SampledHamiltonian::from_json_file(path)?;
            let (start, end) = sampled.span();
            let end = match args.grid.tau {
                Some(tau) => start + tau,
                None => end,
            };
            let grid = TimeGrid::new(start, end, args.grid.steps.unwrap_or(1000))?;
            (HamiltonianModel::SampledGeneric(sampled), grid)
        }
        None => {
            let missing = |name: &str| Error::InvalidParameter(format!("--{name} is required without --model"));
            let spin = SpinHalfArgs {
                omega0: args.omega0.ok_or_else(|| missing("omega0"))?,
                omega: args.omega.ok_or_else(|| missing("omega"))?,
                theta: args.theta.ok_or_else(|| missing("theta"))?,
            };
            let (p, grid) = spin_half_setup(&spin, &args.grid)?;
            (HamiltonianModel::SpinHalfRotating(p), grid)
        }
    };
    let report = coupling_ratios(&track_frames(&model, &grid)?)?;
    with_output(&args.output.out, stdout, |w| match args.output.format {
        Format::Json => write_json(w, &report.to_json(args.output.series)),
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            let mut header = vec!["t".to_string()];
            header.extend(report.pairs.iter().map(|(n, m)| format!("g_{n}_{m}")));
            csv.write_record(&header).map_err(crate::propagation::csv_err)?;
            for (k, t) in report.times.iter().enumerate() {
                let mut row = vec![fmt_f64(*t)];
                row.extend(report.series.iter().map(|s| fmt_f64(s[k])));
                csv.write_record(&row).map_err(crate::propagation::csv_err)?;
            }
            csv.flush().map_err(io_err)
        }
    })
}

pub fn cmd_sweep_f(args: &SweepFArgs, stdout: &mut dyn Write) -> Result<()> {
    let sweep = f_sweep(args.theta, args.r_min, args.r_max, args.points)?;
    if let (Format::Csv, Some(path)) = (args.output.format, &args.summary_out) {
        with_output(&Some(path.clone()), stdout, |w| write_json(w, &sweep))?;
    }
    with_output(&args.output.out, stdout, |w| match args.output.format {
        Format::Json => write_json(w, &sweep),
        Format::Csv => sweep.write_csv(w),
    })
}

pub fn cmd_counterexample(args: &CounterexampleArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = args.thresholds.config()?;
    let (p, grid) = spin_half_setup(&args.model, &args.grid)?;
    if args.level > 1 {
        return Err(Error::InvalidParameter(format!(
            "level must be 0 or 1, got {}",
            args.level
        )));
    }
    let pair = build_dual(&HamiltonianModel::SpinHalfRotating(p), &grid)?;
    let pair = evaluate_pair(pair, args.level, &config)?;
    let summary = pair.summary().expect("both systems evaluated");
    with_output(&args.output.out, stdout, |w| match args.output.format {
        Format::Json => write_json(w, &summary),
        Format::Csv => Err(Error::InvalidParameter("counterexample emits JSON only".into())),
    })
}

#[derive(Debug, Serialize)]
struct BlochSummary {
    #[serde(serialize_with = "ser_f64")]
    rate_exact: f64,
    #[serde(serialize_with = "ser_f64")]
    rate_reference: f64,
    #[serde(serialize_with = "ser_opt_f64")]
    rate_ratio: Option<f64>,
    rates_agree: bool,
}

pub fn cmd_bloch(args: &EvolveArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = args.thresholds.config()?;
    let (p, grid) = spin_half_setup(&args.model, &args.grid)?;
    if args.level > 1 {
        return Err(Error::InvalidParameter(format!(
            "level must be 0 or 1, got {}",
            args.level
        )));
    }
    let run = run_model(
        &HamiltonianModel::SpinHalfRotating(p),
        &grid,
        args.level,
        args.phase_convention.into(),
        &config,
    )?;
    let exact = bloch_series(&grid, run.trajectory.states())?;
    let reference = bloch_series(&grid, &run.reference.states)?;
    let rates = run.report.rates.expect("two-level run");
    with_output(&args.output.out, stdout, |w| match args.output.format {
        Format::Json => write_json(
            w,
            &BlochSummary {
                rate_exact: exact.rate,
                rate_reference: reference.rate,
                rate_ratio: rates.ratio,
                rates_agree: rates.agree,
            },
        ),
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record([
                "t",
                "bx",
                "by",
                "bz",
                "azimuth",
                "ref_bx",
                "ref_by",
                "ref_bz",
                "ref_azimuth",
            ])
            .map_err(crate::propagation::csv_err)?;
            for k in 0..grid.len() {
                let (b, r) = (exact.vectors[k], reference.vectors[k]);
                let row = [
                    exact.times[k],
                    b[0],
                    b[1],
                    b[2],
                    exact.azimuth[k],
                    r[0],
                    r[1],
                    r[2],
                    reference.azimuth[k],
                ];
                csv.write_record(row.iter().map(|x| fmt_f64(*x)))
                    .map_err(crate::propagation::csv_err)?;
            }
            csv.flush().map_err(io_err)
        }
    })
}
