//! Fixed-step integration of i dψ/dt = H(t) ψ and accumulation of the
//! time-ordered propagator.

use std::io::Write;

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::models::Hamiltonian;
use crate::numerics::{exp_minus_ih_dt, CMatrix, CVector, TimeGrid, C64, I};

/// Runs whose norm drifts further than this are rejected.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;
/// Initial states must be normalized to this accuracy.
pub const INITIAL_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: TimeGrid,
    states: Vec<CVector>,
    propagators: Option<Vec<CMatrix>>,
    norm_drift: f64,
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &[CVector] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &CVector {
        &self.states[k]
    }

    pub fn propagators(&self) -> Option<&[CMatrix]> {
        self.propagators.as_deref()
    }

    pub fn final_state(&self) -> &CVector {
        &self.states[self.states.len() - 1]
    }

    /// max_k | ‖ψ(t_k)‖ − 1 |.
    pub fn norm_drift(&self) -> f64 {
        self.norm_drift
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// Columns: t, re(ψ_0), im(ψ_0), …, norm.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        for i in 0..self.dim() {
            header.push(format!("re_psi{i}"));
            header.push(format!("im_psi{i}"));
        }
        header.push("norm".into());
        w.write_record(&header).map_err(csv_err)?;
        for (k, psi) in self.states.iter().enumerate() {
            let mut row = vec![fmt_f64(self.grid.time(k))];
            for z in psi.iter() {
                row.push(fmt_f64(z.re));
                row.push(fmt_f64(z.im));
            }
            row.push(fmt_f64(psi.norm()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidParameter(format!("write failed: {e}")))?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("csv output failed: {e}"))
}

fn check_initial<H: Hamiltonian + ?Sized>(model: &H, psi0: &CVector) -> Result<()> {
    if psi0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: psi0.len(),
        });
    }
    let drift = (psi0.norm() - 1.0).abs();
    if drift.is_nan() || drift > INITIAL_NORM_TOL {
        return Err(Error::InvalidState(format!(
            "initial state norm differs from 1 by {drift:e}"
        )));
    }
    Ok(())
}

fn norm_drift(states: &[CVector]) -> f64 {
    states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max)
}

/// Classical fourth-order Runge–Kutta with fixed steps. The state is never
/// renormalized: the final norm drift is the accuracy telemetry.
pub fn integrate_rk4<H: Hamiltonian + ?Sized>(model: &H, psi0: &CVector, grid: &TimeGrid) -> Result<Trajectory> {
    check_initial(model, psi0)?;
    let dt = grid.dt();
    let half = C64::from(0.5 * dt);
    let full = C64::from(dt);
    let sixth = C64::from(dt / 6.0);
    let minus_i = -I;

    let mut states = Vec::with_capacity(grid.len());
    states.push(psi0.clone());
    let mut psi = psi0.clone();
    let mut h_start = model.at(grid.time(0))?;
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let h_mid = model.at(t + 0.5 * dt)?;
        let h_end = model.at(grid.time(k + 1))?;
        let k1 = &h_start * &psi * minus_i;
        let k2 = &h_mid * (&psi + &k1 * half) * minus_i;
        let k3 = &h_mid * (&psi + &k2 * half) * minus_i;
        let k4 = &h_end * (&psi + &k3 * full) * minus_i;
        psi += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * sixth;
        states.push(psi.clone());
        h_start = h_end;
    }
    let drift = norm_drift(&states);
    if drift.is_nan() || drift > NORM_DRIFT_LIMIT {
        return Err(Error::NormDriftExceeded {
            drift,
            limit: NORM_DRIFT_LIMIT,
        });
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        propagators: None,
        norm_drift: drift,
    })
}

/// U(t_{k+1}) = exp(−i H(t_k + dt/2) dt) U(t_k), U(t_0) = I. States are
/// U(t_k) ψ₀, with ψ₀ the first basis vector when none is given.
pub fn accumulate_propagator<H: Hamiltonian + ?Sized>(
    model: &H,
    grid: &TimeGrid,
    psi0: Option<&CVector>,
) -> Result<Trajectory> {
    let n = model.dim();
    let psi0 = match psi0 {
        Some(p) => {
            check_initial(model, p)?;
            p.clone()
        }
        None => {
            let mut e0 = CVector::zeros(n);
            e0[0] = C64::from(1.0);
            e0
        }
    };
    let dt = grid.dt();
    let mut propagators = Vec::with_capacity(grid.len());
    let mut u = CMatrix::identity(n, n);
    propagators.push(u.clone());
    for k in 0..grid.steps() {
        let step = exp_minus_ih_dt(&model.at(grid.time(k) + 0.5 * dt)?, dt)?;
        u = step * u;
        propagators.push(u.clone());
    }
    let states: Vec<CVector> = propagators.iter().map(|u| u * &psi0).collect();
    let drift = norm_drift(&states);
    Ok(Trajectory {
        grid: *grid,
        states,
        propagators: Some(propagators),
        norm_drift: drift,
    })
}

/// H'(s) = −H(t_end + t_start − s): integrating it forward undoes evolution
/// under H over `[t_start, t_end]`.
pub struct TimeReversed<'a, H: Hamiltonian + ?Sized> {
    inner: &'a H,
    t_start: f64,
    t_end: f64,
}

impl<'a, H: Hamiltonian + ?Sized> TimeReversed<'a, H> {
    pub fn new(inner: &'a H, grid: &TimeGrid) -> Self {
        Self {
            inner,
            t_start: grid.t_start(),
            t_end: grid.t_end(),
        }
    }
}

impl<H: Hamiltonian + ?Sized> Hamiltonian for TimeReversed<'_, H> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn at(&self, s: f64) -> Result<CMatrix> {
        Ok(-self.inner.at(self.t_end + self.t_start - s)?)
    }
}
