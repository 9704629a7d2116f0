//! End-to-end pipelines: track frames, integrate, analyze.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{analyze, build_reference, AdiabaticReference, AdiabaticReport, AnalysisConfig, PhaseConvention};
use crate::error::Result;
use crate::format::{ser_f64, ser_opt_f64};
use crate::models::{HamiltonianModel, SpinHalfParams};
use crate::numerics::TimeGrid;
use crate::propagation::{integrate_rk4, Trajectory};
use crate::tracking::{track_frames, EigenFrameSeries};

#[derive(Debug, Clone)]
pub struct Run {
    pub grid: TimeGrid,
    pub frames: EigenFrameSeries,
    pub trajectory: Trajectory,
    pub reference: AdiabaticReference,
    pub report: AdiabaticReport,
}

/// Start in eigenstate `level` of H(t_0) and analyze the evolution.
pub fn run_model(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    level: usize,
    convention: PhaseConvention,
    config: &AnalysisConfig,
) -> Result<Run> {
    let frames = track_frames(model, grid)?;
    let reference = build_reference(&frames, level, convention)?;
    let trajectory = integrate_rk4(model, frames.vector(0, level), grid)?;
    let report = analyze(&trajectory, &frames, &reference, config)?;
    Ok(Run {
        grid: *grid,
        frames,
        trajectory,
        reference,
        report,
    })
}

/// Two periods of the slowest of ω₀, ω, ω̄.
pub fn default_tau(p: &SpinHalfParams) -> f64 {
    let slowest = p.frequencies().into_iter().fold(f64::INFINITY, f64::min);
    4.0 * PI / slowest
}

/// Grid on [0, tau] under the default step rule for `p`.
pub fn spin_half_grid(p: &SpinHalfParams, tau: f64) -> Result<TimeGrid> {
    TimeGrid::with_default_steps(tau, &p.frequencies())
}

/// One point of a spin-half parameter sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    /// ω₀/ω, with ω = 1.
    #[serde(serialize_with = "ser_f64")]
    pub r: f64,
    #[serde(serialize_with = "ser_f64")]
    pub theta: f64,
    #[serde(serialize_with = "ser_f64")]
    pub max_ratio: f64,
    #[serde(serialize_with = "ser_f64")]
    pub min_fidelity: f64,
    #[serde(serialize_with = "ser_opt_f64")]
    pub rate_ratio: Option<f64>,
    pub condition_satisfied: bool,
    pub approximation_valid: bool,
}

impl SweepPoint {
    /// A valid approximation with the condition violated.
    pub fn contradicts_necessity(&self) -> bool {
        self.approximation_valid && !self.condition_satisfied
    }
}

/// Run the spin-half model from the lower level for every (r, θ) with ω = 1,
/// ω₀ = r, over [`default_tau`]. Points run in parallel; output is sorted by
/// (r, θ).
pub fn necessity_sweep(ratios: &[f64], thetas: &[f64], config: &AnalysisConfig) -> Result<Vec<SweepPoint>> {
    let cases: Vec<(f64, f64)> = ratios
        .iter()
        .flat_map(|&r| thetas.iter().map(move |&th| (r, th)))
        .collect();
    let mut points = cases
        .par_iter()
        .map(|&(r, theta)| {
            let p = SpinHalfParams::new(r, 1.0, theta)?;
            let grid = spin_half_grid(&p, default_tau(&p))?;
            let run = run_model(
                &HamiltonianModel::SpinHalfRotating(p),
                &grid,
                0,
                PhaseConvention::FullAlpha,
                config,
            )?;
            let report = &run.report;
            Ok(SweepPoint {
                r,
                theta,
                max_ratio: report.condition.max_ratio,
                min_fidelity: report.min_fidelity,
                rate_ratio: report.rates.and_then(|x| x.ratio),
                condition_satisfied: report.verdicts.condition_satisfied,
                approximation_valid: report.verdicts.approximation_valid,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.r.total_cmp(&b.r).then(a.theta.total_cmp(&b.theta)));
    Ok(points)
}
