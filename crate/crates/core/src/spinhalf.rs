//! Exact dynamics of the spin-half rotating-field model started in the lower
//! instantaneous eigenstate: ψ(t) = a(t)|E₁(t)⟩ + b(t)|E₂(t)⟩.

use crate::error::Result;
use crate::models::{HamiltonianModel, SpinHalfParams};
use crate::numerics::{CVector, TimeGrid, C64, I};
use crate::propagation::integrate_rk4;

/// Expansion coefficients of the exact state in the instantaneous eigenbasis.
#[derive(Debug, Clone, Copy)]
pub struct ClosedFormCoefficients {
    params: SpinHalfParams,
    omega_bar: f64,
}

impl ClosedFormCoefficients {
    pub fn new(params: SpinHalfParams) -> Self {
        Self {
            params,
            omega_bar: params.omega_bar(),
        }
    }

    pub fn omega_bar(&self) -> f64 {
        self.omega_bar
    }

    /// a(t) = cos(ω̄t/2) + i (ω₀ − ω cosθ)/ω̄ · sin(ω̄t/2)
    pub fn a(&self, t: f64) -> C64 {
        let p = &self.params;
        let (s, c) = (0.5 * self.omega_bar * t).sin_cos();
        C64::new(c, (p.omega0() - p.omega() * p.theta().cos()) / self.omega_bar * s)
    }

    /// b(t) = i (ω sinθ)/ω̄ · sin(ω̄t/2)
    pub fn b(&self, t: f64) -> C64 {
        let p = &self.params;
        I * (p.omega() * p.theta().sin() / self.omega_bar * (0.5 * self.omega_bar * t).sin())
    }

    /// max_t |b(t)| = ω sinθ / ω̄, reached at ω̄t = π.
    pub fn b_max(&self) -> f64 {
        self.params.omega() * self.params.theta().sin() / self.omega_bar
    }
}

pub fn closed_form_state(p: &SpinHalfParams, t: f64) -> CVector {
    let coeffs = ClosedFormCoefficients::new(*p);
    let (_, [e1, e2]) = p.eigensystem(t);
    e1 * coeffs.a(t) + e2 * coeffs.b(t)
}

/// ψ = A + B with A = a|E₁⟩ and B = b|E₂⟩, entry by entry.
#[derive(Debug, Clone)]
pub struct ComponentSplit {
    pub a_part: [C64; 2],
    pub b_part: [C64; 2],
    /// |B_i| / |A_i|; `None` where |A_i| < 1e-15.
    pub ratios: [Option<f64>; 2],
}

impl ComponentSplit {
    pub fn state(&self) -> CVector {
        CVector::from_vec(vec![self.a_part[0] + self.b_part[0], self.a_part[1] + self.b_part[1]])
    }

    /// True when some |A_i| was too small to divide by.
    pub fn division_guarded(&self) -> bool {
        self.ratios.iter().any(Option::is_none)
    }
}

pub fn component_split(p: &SpinHalfParams, t: f64) -> ComponentSplit {
    let coeffs = ClosedFormCoefficients::new(*p);
    let (_, [e1, e2]) = p.eigensystem(t);
    let a = &e1 * coeffs.a(t);
    let b = &e2 * coeffs.b(t);
    let ratio = |i: usize| (a[i].norm() >= 1e-15).then(|| b[i].norm() / a[i].norm());
    ComponentSplit {
        a_part: [a[0], a[1]],
        b_part: [b[0], b[1]],
        ratios: [ratio(0), ratio(1)],
    }
}

/// Integrate from |E₁(0)⟩ with RK4 and return max_k ‖ψ_numeric − ψ_closed‖.
pub fn verify_against_integrator(p: &SpinHalfParams, grid: &TimeGrid) -> Result<f64> {
    let model = HamiltonianModel::SpinHalfRotating(*p);
    let psi0 = closed_form_state(p, grid.t_start());
    let traj = integrate_rk4(&model, &psi0, grid)?;
    Ok(traj
        .states()
        .iter()
        .enumerate()
        .map(|(k, psi)| (psi - closed_form_state(p, grid.time(k))).norm())
        .fold(0.0, f64::max))
}
