//! f(r) = sinθ / √(r² − 2r cosθ + 1) with r = ω₀/ω: the peak size of the
//! excited-level coefficient as a function of field strength over rotation
//! rate.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::{fmt_f64, ser_f64};
use crate::propagation::csv_err;

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < std::f64::consts::PI) {
        return Err(Error::DomainError(format!("theta must lie in (0, π), got {theta}")));
    }
    Ok(())
}

pub fn f_function(r: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::DomainError(format!("r must be positive, got {r}")));
    }
    Ok(theta.sin() / (r * r - 2.0 * r * theta.cos() + 1.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepShape {
    /// θ ≤ π/2: rises up to r = cosθ, falls after.
    RiseThenFall,
    /// θ > π/2: falls everywhere.
    MonotoneDecreasing,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepVerdicts {
    pub expected_shape: SweepShape,
    pub shape_holds: bool,
    /// argmax lies within one grid spacing of cosθ (θ ≤ π/2 with cosθ inside
    /// the sweep).
    pub peak_at_cos_theta: Option<bool>,
    /// f > sinθ on (0, cosθ] (θ ≤ π/2).
    pub exceeds_sin_theta_below_peak: Option<bool>,
    /// f > sin(θ/2) on (cosθ, 1] for θ ≤ π/2, on (0, 1] for θ > π/2.
    pub exceeds_sin_half_theta_up_to_one: Option<bool>,
    /// f ≥ cos(θ/2) on (0, 1] for θ > π/2; f(1) = cos(θ/2).
    pub exceeds_cos_half_theta_up_to_one: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FSweep {
    #[serde(serialize_with = "ser_f64")]
    pub theta: f64,
    #[serde(skip)]
    pub table: Vec<(f64, f64)>,
    #[serde(serialize_with = "ser_f64")]
    pub argmax: f64,
    #[serde(serialize_with = "ser_f64")]
    pub max: f64,
    pub verdicts: SweepVerdicts,
}

/// Tabulate f on `points` evenly spaced r in [r_min, r_max] and check its
/// shape and lower bounds on the sampled points.
pub fn f_sweep(theta: f64, r_min: f64, r_max: f64, points: usize) -> Result<FSweep> {
    check_theta(theta)?;
    if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
        return Err(Error::DomainError(format!(
            "need 0 < r_min < r_max, got r_min = {r_min}, r_max = {r_max}"
        )));
    }
    if points < 2 {
        return Err(Error::DomainError(format!("need at least 2 points, got {points}")));
    }
    let spacing = (r_max - r_min) / (points - 1) as f64;
    let table = (0..points)
        .map(|i| {
            let r = if i == points - 1 {
                r_max
            } else {
                r_min + i as f64 * spacing
            };
            f_function(r, theta).map(|f| (r, f))
        })
        .collect::<Result<Vec<_>>>()?;
    let (argmax, max) =
        table.iter().copied().fold(
            (table[0].0, f64::NEG_INFINITY),
            |best, (r, f)| if f > best.1 { (r, f) } else { best },
        );

    let cos = theta.cos();
    let (sin, sin_half, cos_half) = (theta.sin(), (0.5 * theta).sin(), (0.5 * theta).cos());
    let over = |lo: f64, hi: f64, pred: &dyn Fn(f64) -> bool| -> Option<bool> {
        let mut hit = false;
        let mut ok = true;
        for &(r, f) in &table {
            if r > lo && r <= hi {
                hit = true;
                ok &= pred(f);
            }
        }
        hit.then_some(ok)
    };

    let verdicts = if theta <= FRAC_PI_2 {
        let rising = table.windows(2).filter(|w| w[1].0 <= cos).all(|w| w[1].1 > w[0].1);
        let falling = table.windows(2).filter(|w| w[0].0 >= cos).all(|w| w[1].1 < w[0].1);
        SweepVerdicts {
            expected_shape: SweepShape::RiseThenFall,
            shape_holds: rising && falling,
            peak_at_cos_theta: (cos >= r_min && cos <= r_max).then(|| (argmax - cos).abs() <= spacing),
            exceeds_sin_theta_below_peak: over(0.0, cos, &|f| f > sin),
            exceeds_sin_half_theta_up_to_one: over(cos, 1.0, &|f| f > sin_half),
            exceeds_cos_half_theta_up_to_one: None,
        }
    } else {
        SweepVerdicts {
            expected_shape: SweepShape::MonotoneDecreasing,
            shape_holds: table.windows(2).all(|w| w[1].1 < w[0].1),
            peak_at_cos_theta: None,
            exceeds_sin_theta_below_peak: None,
            exceeds_sin_half_theta_up_to_one: over(0.0, 1.0, &|f| f > sin_half),
            exceeds_cos_half_theta_up_to_one: over(0.0, 1.0, &|f| f >= cos_half * (1.0 - 1e-12)),
        }
    };
    Ok(FSweep {
        theta,
        table,
        argmax,
        max,
        verdicts,
    })
}

impl FSweep {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "f"]).map_err(csv_err)?;
        for (r, f) in &self.table {
            w.write_record([fmt_f64(*r), fmt_f64(*f)]).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidParameter(format!("write failed: {e}")))?;
        Ok(())
    }
}
