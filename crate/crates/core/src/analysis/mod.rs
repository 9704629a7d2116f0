//! Adiabatic reference states, eigenbasis coefficients, fidelity, Bloch
//! rotation rates and the validity/condition verdicts.

mod bloch;
mod ffunc;

pub use bloch::{bloch_series, bloch_vector, least_squares_slope, BlochSeries};
pub use ffunc::{f_function, f_sweep, FSweep, SweepShape, SweepVerdicts};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{fmt_f64, ser_f64, ser_opt_f64};
use crate::numerics::{inner, CVector, TimeGrid, C64};
use crate::propagation::{csv_err, Trajectory};
use crate::tracking::{coupling_ratios, ConditionJson, ConditionReport, EigenFrameSeries};

/// |Re<E_n|dE_n/dt>| above this means the frames are not phase-continuous.
pub const GAUGE_REAL_PART_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// α = −∫E_n dt + i∫<E_n|dE_n/dt> dt
    FullAlpha,
    /// α = −∫E_n dt
    DynamicalOnly,
}

/// Thresholds that turn measurements into verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisConfig {
    /// The condition holds when the maximum coupling ratio is at most this.
    #[serde(serialize_with = "ser_f64")]
    pub condition_threshold: f64,
    /// Minimum fidelity for the adiabatic approximation to count as valid.
    #[serde(serialize_with = "ser_f64")]
    pub fidelity_threshold: f64,
    /// Relative tolerance on the Bloch rotation rate (two-level systems).
    #[serde(serialize_with = "ser_f64")]
    pub rate_tolerance: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            condition_threshold: 0.1,
            fidelity_threshold: 0.99,
            rate_tolerance: 0.1,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.condition_threshold > 0.0
            && self.condition_threshold.is_finite()
            && (0.0..=1.0).contains(&self.fidelity_threshold)
            && self.rate_tolerance >= 0.0
            && self.rate_tolerance.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid thresholds {self:?}")))
        }
    }
}

/// e^{iα(t)}|E_n(t)⟩ on the frame grid.
#[derive(Debug, Clone)]
pub struct AdiabaticReference {
    pub level: usize,
    pub grid: TimeGrid,
    pub alpha: Vec<f64>,
    pub states: Vec<CVector>,
    pub convention: PhaseConvention,
}

/// α by trapezoidal quadrature of −E_n − Im<E_n|dE_n/dt> (the second term
/// only for [`PhaseConvention::FullAlpha`]).
pub fn build_reference(
    frames: &EigenFrameSeries,
    level: usize,
    convention: PhaseConvention,
) -> Result<AdiabaticReference> {
    if level >= frames.dim() {
        return Err(Error::InvalidParameter(format!(
            "level {level} out of range for dimension {}",
            frames.dim()
        )));
    }
    let grid = *frames.grid();
    if grid.len() < 3 {
        return Err(Error::InvalidGrid(
            "reference construction needs at least 3 nodes".into(),
        ));
    }
    let rate: Vec<f64> = (0..grid.len())
        .map(|k| {
            let mut phase_rate = -frames.energy(k, level);
            if convention == PhaseConvention::FullAlpha {
                let berry = inner(frames.vector(k, level), &frames.derivative(k, level));
                // one-sided end stencils leave an O(dt³) real part even for a clean
                // gauge; every link between frames is covered by an interior node
                let interior = k > 0 && k + 1 < grid.len();
                if interior && berry.re.abs() > GAUGE_REAL_PART_LIMIT {
                    return Err(Error::GaugeImaginaryPartExceeded {
                        node: k,
                        value: berry.re.abs(),
                    });
                }
                // i * (i Im) = -Im
                phase_rate -= berry.im;
            }
            Ok(phase_rate)
        })
        .collect::<Result<_>>()?;
    let dt = grid.dt();
    let mut alpha = Vec::with_capacity(grid.len());
    alpha.push(0.0);
    for k in 1..grid.len() {
        alpha.push(alpha[k - 1] + 0.5 * dt * (rate[k - 1] + rate[k]));
    }
    let states = alpha
        .iter()
        .enumerate()
        .map(|(k, a)| frames.vector(k, level) * C64::from_polar(1.0, *a))
        .collect();
    Ok(AdiabaticReference {
        level,
        grid,
        alpha,
        states,
        convention,
    })
}

/// Exact and reference Bloch rotation rates of a two-level run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateComparison {
    #[serde(serialize_with = "ser_f64")]
    pub exact: f64,
    #[serde(serialize_with = "ser_f64")]
    pub reference: f64,
    /// max(|rate|) / min(|rate|).
    #[serde(serialize_with = "ser_opt_f64")]
    pub ratio: Option<f64>,
    pub agree: bool,
}

impl RateComparison {
    pub fn new(exact: f64, reference: f64, tolerance: f64) -> Self {
        let (hi, lo) = (exact.abs().max(reference.abs()), exact.abs().min(reference.abs()));
        let ratio = (lo > 0.0).then(|| hi / lo);
        let agree = if reference.abs() > 1e-12 {
            (exact - reference).abs() <= tolerance * reference.abs()
        } else {
            (exact - reference).abs() <= 1e-9
        };
        Self {
            exact,
            reference,
            ratio,
            agree,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Verdicts {
    pub condition_satisfied: bool,
    pub fidelity_ok: bool,
    /// `None` when the rate check does not apply (dimension ≠ 2).
    pub rate_ok: Option<bool>,
    pub approximation_valid: bool,
}

#[derive(Debug, Clone)]
pub struct AdiabaticReport {
    pub level: usize,
    pub convention: PhaseConvention,
    pub condition: ConditionReport,
    pub times: Vec<f64>,
    /// |<ψ^adi(t_k)|ψ(t_k)>|
    pub fidelity: Vec<f64>,
    pub min_fidelity: f64,
    pub argmin_fidelity_t: f64,
    /// |c_m(t_k)| = |<E_m(t_k)|ψ(t_k)>|, indexed [k][m].
    pub coefficients: Vec<Vec<f64>>,
    pub max_coefficients: Vec<f64>,
    pub norm_drift: f64,
    pub rates: Option<RateComparison>,
    pub verdicts: Verdicts,
    pub config: AnalysisConfig,
}

pub fn analyze(
    traj: &Trajectory,
    frames: &EigenFrameSeries,
    reference: &AdiabaticReference,
    config: &AnalysisConfig,
) -> Result<AdiabaticReport> {
    config.validate()?;
    let grid = traj.grid();
    if !grid.matches(frames.grid()) || !grid.matches(&reference.grid) {
        return Err(Error::GridMismatch(
            "trajectory, frames and reference must share one grid".into(),
        ));
    }
    if traj.dim() != frames.dim() {
        return Err(Error::DimensionMismatch {
            expected: frames.dim(),
            found: traj.dim(),
        });
    }
    let condition = coupling_ratios(frames)?;

    let fidelity: Vec<f64> = traj
        .states()
        .iter()
        .zip(&reference.states)
        .map(|(psi, adi)| inner(adi, psi).norm())
        .collect();
    let (kmin, min_fidelity) =
        fidelity.iter().copied().enumerate().fold(
            (0, f64::INFINITY),
            |best, (k, f)| if f < best.1 { (k, f) } else { best },
        );

    let coefficients: Vec<Vec<f64>> = traj
        .states()
        .iter()
        .enumerate()
        .map(|(k, psi)| frames.vectors(k).iter().map(|e| inner(e, psi).norm()).collect())
        .collect();
    let max_coefficients = (0..frames.dim())
        .map(|m| coefficients.iter().map(|c| c[m]).fold(0.0, f64::max))
        .collect();

    let rates = if traj.dim() == 2 {
        let exact = bloch_series(grid, traj.states())?;
        let adi = bloch_series(grid, &reference.states)?;
        Some(RateComparison::new(exact.rate, adi.rate, config.rate_tolerance))
    } else {
        None
    };

    let condition_satisfied = condition.max_ratio <= config.condition_threshold;
    let fidelity_ok = min_fidelity >= config.fidelity_threshold;
    let rate_ok = rates.map(|r| r.agree);
    let verdicts = Verdicts {
        condition_satisfied,
        fidelity_ok,
        rate_ok,
        approximation_valid: fidelity_ok && rate_ok.unwrap_or(true),
    };

    Ok(AdiabaticReport {
        level: reference.level,
        convention: reference.convention,
        condition,
        times: grid.times(),
        fidelity,
        min_fidelity,
        argmin_fidelity_t: grid.time(kmin),
        coefficients,
        max_coefficients,
        norm_drift: traj.norm_drift(),
        rates,
        verdicts,
        config: *config,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityJson {
    #[serde(serialize_with = "ser_f64")]
    pub min: f64,
    #[serde(serialize_with = "ser_f64")]
    pub argmin_t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub level: usize,
    pub phase_convention: PhaseConvention,
    pub condition: ConditionJson,
    pub fidelity: FidelityJson,
    #[serde(serialize_with = "crate::format::ser_vec_f64")]
    pub max_coefficients: Vec<f64>,
    #[serde(serialize_with = "ser_f64")]
    pub norm_drift: f64,
    pub bloch_rates: Option<RateComparison>,
    pub verdicts: Verdicts,
    pub thresholds: AnalysisConfig,
}

impl AdiabaticReport {
    pub fn to_json(&self, include_series: bool) -> ReportJson {
        ReportJson {
            level: self.level,
            phase_convention: self.convention,
            condition: self.condition.to_json(include_series),
            fidelity: FidelityJson {
                min: self.min_fidelity,
                argmin_t: self.argmin_fidelity_t,
            },
            max_coefficients: self.max_coefficients.clone(),
            norm_drift: self.norm_drift,
            bloch_rates: self.rates,
            verdicts: self.verdicts,
            thresholds: self.config,
        }
    }

    /// Columns: t, fidelity, |c_0| … |c_{N−1}|, ratio_max_at_t.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.max_coefficients.len();
        let mut header = vec!["t".to_string(), "fidelity".to_string()];
        header.extend((0..dim).map(|m| format!("abs_c{m}")));
        header.push("ratio_max_at_t".into());
        w.write_record(&header).map_err(csv_err)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![fmt_f64(*t), fmt_f64(self.fidelity[k])];
            row.extend(self.coefficients[k].iter().map(|c| fmt_f64(*c)));
            row.push(fmt_f64(self.condition.max_at(k)));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidParameter(format!("write failed: {e}")))?;
        Ok(())
    }
}

/// Max |c_m| against max g_mn over one window of the grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindowStat {
    #[serde(serialize_with = "ser_f64")]
    pub t_start: f64,
    #[serde(serialize_with = "ser_f64")]
    pub t_end: f64,
    #[serde(serialize_with = "ser_f64")]
    pub max_coefficient: f64,
    #[serde(serialize_with = "ser_f64")]
    pub max_ratio: f64,
    /// max_coefficient / max_ratio, `None` when both vanish.
    #[serde(serialize_with = "ser_opt_f64")]
    pub quotient: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NecessityPair {
    /// Off-reference level m compared against g_{m n}.
    pub level: usize,
    pub windows: Vec<WindowStat>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub min_quotient: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub max_quotient: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NecessityResidual {
    pub reference_level: usize,
    #[serde(serialize_with = "ser_f64")]
    pub window: f64,
    pub pairs: Vec<NecessityPair>,
}

/// Compare |c_m(t)| with g_mn(t) over consecutive windows of length at least
/// `window` (the remainder joins the last window). Only meaningful when the
/// adiabatic approximation holds.
pub fn necessity_residual(report: &AdiabaticReport, window: f64) -> Result<NecessityResidual> {
    if !report.verdicts.approximation_valid {
        return Err(Error::PreconditionNotMet(
            "necessity residual needs a run where the adiabatic approximation is valid".into(),
        ));
    }
    let times = &report.times;
    let span = times[times.len() - 1] - times[0];
    if window.is_nan() || window <= 0.0 || window > span * (1.0 + 1e-12) {
        return Err(Error::PreconditionNotMet(format!(
            "window {window} must be positive and no longer than the run ({span})"
        )));
    }
    let dt = span / (times.len() - 1) as f64;
    let count = ((span / window) * (1.0 + 1e-12)).floor().max(1.0) as usize;
    let per = ((window / dt) - 1e-9).ceil() as usize;
    let n = report.level;
    let dim = report.max_coefficients.len();
    let pairs = (0..dim)
        .filter(|&m| m != n)
        .map(|m| {
            let ratio = report
                .condition
                .pair_series(m, n)
                .expect("condition report holds every ordered pair");
            let windows: Vec<WindowStat> = (0..count)
                .map(|w| {
                    let lo = w * per;
                    let hi = if w + 1 == count { times.len() - 1 } else { (w + 1) * per };
                    let max_coefficient = (lo..=hi).map(|k| report.coefficients[k][m]).fold(0.0, f64::max);
                    let max_ratio = ratio[lo..=hi].iter().copied().fold(0.0, f64::max);
                    let quotient = if max_ratio > 0.0 {
                        Some(max_coefficient / max_ratio)
                    } else if max_coefficient == 0.0 {
                        None
                    } else {
                        Some(f64::INFINITY)
                    };
                    WindowStat {
                        t_start: times[lo],
                        t_end: times[hi],
                        max_coefficient,
                        max_ratio,
                        quotient,
                    }
                })
                .collect();
            let quotients: Vec<f64> = windows.iter().filter_map(|w| w.quotient).collect();
            NecessityPair {
                level: m,
                min_quotient: quotients.iter().copied().reduce(f64::min),
                max_quotient: quotients.iter().copied().reduce(f64::max),
                windows,
            }
        })
        .collect();
    Ok(NecessityResidual {
        reference_level: n,
        window,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{HamiltonianModel, SampledHamiltonian, SpinHalfParams};
    use crate::numerics::{pauli_x, pauli_z};
    use crate::propagation::integrate_rk4;
    use crate::tracking::track_frames;
    use std::f64::consts::PI;

    fn constant_run(convention: PhaseConvention) -> (Trajectory, EigenFrameSeries, AdiabaticReference) {
        let h = pauli_z() * C64::from(0.8) + pauli_x() * C64::from(0.3);
        let model = HamiltonianModel::SampledGeneric(SampledHamiltonian::constant(h, 0.0, 4.0).unwrap());
        let grid = TimeGrid::new(0.0, 4.0, 4000).unwrap();
        let frames = track_frames(&model, &grid).unwrap();
        let reference = build_reference(&frames, 0, convention).unwrap();
        let traj = integrate_rk4(&model, frames.vector(0, 0), &grid).unwrap();
        (traj, frames, reference)
    }

    #[test]
    fn constant_reference_is_stationary_phase() {
        let (_, frames, reference) = constant_run(PhaseConvention::FullAlpha);
        let e0 = frames.energy(0, 0);
        for (k, a) in reference.alpha.iter().enumerate() {
            let t = frames.grid().time(k);
            assert!((a + e0 * t).abs() < 1e-12);
        }
        assert_eq!(reference.alpha[0], 0.0);
    }

    #[test]
    fn exact_eigenstate_run_has_unit_fidelity() {
        let (traj, frames, reference) = constant_run(PhaseConvention::FullAlpha);
        let report = analyze(&traj, &frames, &reference, &AnalysisConfig::default()).unwrap();
        assert!((report.min_fidelity - 1.0).abs() < 1e-9);
        assert!((report.max_coefficients[0] - 1.0).abs() < 1e-9);
        assert!(report.max_coefficients[1] < 1e-9);
        assert_eq!(report.condition.max_ratio, 0.0);
        assert!(report.verdicts.condition_satisfied);
        assert!(report.verdicts.approximation_valid);

        let residual = necessity_residual(&report, 1.0).unwrap();
        assert_eq!(residual.pairs.len(), 1);
        assert_eq!(residual.pairs[0].windows.len(), 4);
        assert!(residual.pairs[0].windows.iter().all(|w| w.max_ratio == 0.0));
    }

    #[test]
    fn spin_half_alpha_with_closed_form_gauge() {
        // frames supplied in the closed-form gauge, where <E1|dE1/dt> = i(ω/2)cosθ
        let p = SpinHalfParams::new(1.0, 0.4, PI / 3.0).unwrap();
        let grid = TimeGrid::new(0.0, 20.0, 8000).unwrap();
        let (energies, vectors): (Vec<Vec<f64>>, Vec<Vec<CVector>>) = grid
            .times()
            .iter()
            .map(|&t| {
                let (e, v) = p.eigensystem(t);
                (e.to_vec(), v.to_vec())
            })
            .unzip();
        let frames = EigenFrameSeries::from_parts(grid, energies, vectors).unwrap();
        let full = build_reference(&frames, 0, PhaseConvention::FullAlpha).unwrap();
        let dynamical = build_reference(&frames, 0, PhaseConvention::DynamicalOnly).unwrap();
        for (k, t) in grid.times().iter().enumerate() {
            let expected = 0.5 * p.omega0() * t - 0.5 * p.omega() * p.theta().cos() * t;
            assert!((full.alpha[k] - expected).abs() < 1e-6);
            assert!((dynamical.alpha[k] - 0.5 * p.omega0() * t).abs() < 1e-12);
        }
    }

    #[test]
    fn level_out_of_range() {
        let (_, frames, _) = constant_run(PhaseConvention::FullAlpha);
        assert!(build_reference(&frames, 2, PhaseConvention::FullAlpha).is_err());
    }

    #[test]
    fn grid_mismatch_detected() {
        let (traj, _, _) = constant_run(PhaseConvention::FullAlpha);
        let h = pauli_z();
        let model = HamiltonianModel::SampledGeneric(SampledHamiltonian::constant(h, 0.0, 4.0).unwrap());
        let other = TimeGrid::new(0.0, 4.0, 100).unwrap();
        let frames = track_frames(&model, &other).unwrap();
        let reference = build_reference(&frames, 0, PhaseConvention::FullAlpha).unwrap();
        assert!(matches!(
            analyze(&traj, &frames, &reference, &AnalysisConfig::default()),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn rate_comparison_rules() {
        let r = RateComparison::new(1.0, 10.0, 0.1);
        assert!(!r.agree);
        assert!((r.ratio.unwrap() - 10.0).abs() < 1e-15);
        assert!(RateComparison::new(9.5, 10.0, 0.1).agree);
        let z = RateComparison::new(0.0, 0.0, 0.1);
        assert!(z.agree);
        assert_eq!(z.ratio, None);
    }

    #[test]
    fn csv_header() {
        let (traj, frames, reference) = constant_run(PhaseConvention::DynamicalOnly);
        let report = analyze(&traj, &frames, &reference, &AnalysisConfig::default()).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,fidelity,abs_c0,abs_c1,ratio_max_at_t");
        assert_eq!(text.lines().count(), 4002);
    }
}
