//! The dual system H_b(t) = i dU_a^dag/dt U_a(t) built from a reference
//! system's propagator. Both systems share their coupling ratios, yet the
//! adiabatic approximation cannot hold for both.

use serde::Serialize;

use crate::analysis::{analyze, build_reference, AdiabaticReport, AnalysisConfig, PhaseConvention};
use crate::error::{Error, Result};
use crate::format::ser_f64;
use crate::models::{DualHamiltonian, Hamiltonian, HamiltonianModel};
use crate::numerics::{exp_minus_ih_dt, hermitian_eig, hermiticity_deviation, max_abs, CMatrix, TimeGrid, C64, I};
use crate::propagation::{accumulate_propagator, integrate_rk4};
use crate::tracking::track_frames;

/// Agreement between −U^dag H_a U and the finite-difference i dU^dag/dt U.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossCheck {
    #[serde(serialize_with = "ser_f64")]
    pub max_deviation: f64,
    #[serde(serialize_with = "ser_f64")]
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct DualPair {
    pub model_a: HamiltonianModel,
    pub model_b: HamiltonianModel,
    pub grid: TimeGrid,
    pub cross_check: CrossCheck,
    pub report_a: Option<AdiabaticReport>,
    pub report_b: Option<AdiabaticReport>,
    /// Initial level of system b whose run gave the lowest fidelity.
    pub level_b: Option<usize>,
}

/// Largest spectral radius bound used to size the finite-difference step.
fn norm_bound(h: &CMatrix) -> f64 {
    max_abs(h) * h.nrows() as f64
}

/// Literal i dU^dag/dt U at `t`, by a central difference whose step is small
/// against the generator's time scale (the grid step can be far too coarse
/// for that when ‖H‖ dt is not small).
fn literal_dual(model: &HamiltonianModel, u: &CMatrix, t: f64, dt: f64) -> Result<CMatrix> {
    let h_now = model.evaluate(t)?;
    let step = dt.min(1e-4 / (1.0 + norm_bound(&h_now)));
    let forward = exp_minus_ih_dt(&model.evaluate(t + 0.5 * step)?, step)? * u;
    let backward = exp_minus_ih_dt(&model.evaluate(t - 0.5 * step)?, -step)? * u;
    let derivative = (forward.adjoint() - backward.adjoint()) * C64::from(0.5 / step);
    Ok(derivative * I * u)
}

/// Accumulate U_a on `grid` and wrap −U_a^dag H_a U_a as system b. Every
/// interior node is cross-checked against the literal definition within
/// max(100 dt², 1e-6).
pub fn build_dual(model_a: &HamiltonianModel, grid: &TimeGrid) -> Result<DualPair> {
    let traj = accumulate_propagator(model_a, grid, None)?;
    let propagators = traj.propagators().expect("propagators requested").to_vec();
    let dual = DualHamiltonian::new(model_a.clone(), *grid, propagators)?;
    let dt = grid.dt();
    let tolerance = (100.0 * dt * dt).max(1e-6);
    let mut max_deviation: f64 = 0.0;
    for k in 1..grid.steps() {
        let t = grid.time(k);
        let literal = literal_dual(model_a, &dual.propagators()[k], t, dt)?;
        let deviation = max_abs(&(literal - &dual.node_matrices()[k]));
        if deviation > tolerance {
            return Err(Error::CrossCheckFailed {
                deviation,
                tolerance,
                t,
            });
        }
        max_deviation = max_deviation.max(deviation);
    }
    Ok(DualPair {
        model_a: model_a.clone(),
        model_b: HamiltonianModel::DualOf(dual),
        grid: *grid,
        cross_check: CrossCheck {
            max_deviation,
            tolerance,
        },
        report_a: None,
        report_b: None,
        level_b: None,
    })
}

/// Worst Hermiticity defect of H_b and worst mismatch between the spectrum of
/// H_b and the negated spectrum of H_a over the grid nodes.
#[derive(Debug, Clone, Copy)]
pub struct DualInvariants {
    pub max_hermiticity_deviation: f64,
    pub max_spectrum_deviation: f64,
}

impl DualPair {
    pub fn invariants(&self) -> Result<DualInvariants> {
        let mut out = DualInvariants {
            max_hermiticity_deviation: 0.0,
            max_spectrum_deviation: 0.0,
        };
        for t in self.grid.times() {
            let hb = self.model_b.at(t)?;
            out.max_hermiticity_deviation = out.max_hermiticity_deviation.max(hermiticity_deviation(&hb));
            let eb = hermitian_eig(&hb)?.values;
            let mut negated: Vec<f64> = hermitian_eig(&self.model_a.at(t)?)?.values.iter().map(|e| -e).collect();
            negated.sort_by(f64::total_cmp);
            for (x, y) in eb.iter().zip(&negated) {
                out.max_spectrum_deviation = out.max_spectrum_deviation.max((x - y).abs());
            }
        }
        Ok(out)
    }

    pub fn summary(&self) -> Option<PairSummary> {
        let (a, b) = (self.report_a.as_ref()?, self.report_b.as_ref()?);
        Some(PairSummary {
            ratio_a: a.condition.max_ratio,
            ratio_b: b.condition.max_ratio,
            min_fidelity_a: a.min_fidelity,
            min_fidelity_b: b.min_fidelity,
            at_least_one_invalid: !(a.verdicts.approximation_valid && b.verdicts.approximation_valid),
            condition_satisfied_a: a.verdicts.condition_satisfied,
            condition_satisfied_b: b.verdicts.condition_satisfied,
            approximation_valid_a: a.verdicts.approximation_valid,
            approximation_valid_b: b.verdicts.approximation_valid,
            level_a: a.level,
            level_b: b.level,
            cross_check_deviation: self.cross_check.max_deviation,
        })
    }
}

fn run_system(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    levels: &[usize],
    config: &AnalysisConfig,
) -> Result<AdiabaticReport> {
    let frames = track_frames(model, grid)?;
    let mut worst: Option<AdiabaticReport> = None;
    for &level in levels {
        let reference = build_reference(&frames, level, PhaseConvention::FullAlpha)?;
        let traj = integrate_rk4(model, frames.vector(0, level), grid)?;
        let report = analyze(&traj, &frames, &reference, config)?;
        if worst.as_ref().is_none_or(|w| report.min_fidelity < w.min_fidelity) {
            worst = Some(report);
        }
    }
    worst.ok_or_else(|| Error::InvalidParameter("no initial level to evaluate".into()))
}

/// Run system a from `level_a` and system b from each of its levels (keeping
/// the lowest-fidelity run), in parallel.
pub fn evaluate_pair(mut pair: DualPair, level_a: usize, config: &AnalysisConfig) -> Result<DualPair> {
    let dim = pair.model_a.dim();
    if level_a >= dim {
        return Err(Error::InvalidParameter(format!(
            "level {level_a} out of range for dimension {dim}"
        )));
    }
    let levels_b: Vec<usize> = (0..dim).collect();
    let (a, b) = rayon::join(
        || run_system(&pair.model_a, &pair.grid, &[level_a], config),
        || run_system(&pair.model_b, &pair.grid, &levels_b, config),
    );
    let (a, b) = (a?, b?);
    pair.level_b = Some(b.level);
    pair.report_a = Some(a);
    pair.report_b = Some(b);
    Ok(pair)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSummary {
    #[serde(serialize_with = "ser_f64")]
    pub ratio_a: f64,
    #[serde(serialize_with = "ser_f64")]
    pub ratio_b: f64,
    #[serde(serialize_with = "ser_f64")]
    pub min_fidelity_a: f64,
    #[serde(serialize_with = "ser_f64")]
    pub min_fidelity_b: f64,
    pub at_least_one_invalid: bool,
    pub condition_satisfied_a: bool,
    pub condition_satisfied_b: bool,
    pub approximation_valid_a: bool,
    pub approximation_valid_b: bool,
    pub level_a: usize,
    pub level_b: usize,
    #[serde(serialize_with = "ser_f64")]
    pub cross_check_deviation: f64,
}

impl PairSummary {
    /// |ratio_a − ratio_b| / ratio_a.
    pub fn ratio_mismatch(&self) -> f64 {
        (self.ratio_a - self.ratio_b).abs() / self.ratio_a
    }
}
