//! Finite-dimensional time-dependent quantum dynamics with diagnostics for
//! the adiabatic approximation: instantaneous eigen-frames, coupling ratios
//! |<E_n|dE_m/dt> / (E_n − E_m)|, fidelity against the adiabatic reference
//! state, Bloch rotation rates, the closed-form spin-half rotating-field
//! solution and the dual-Hamiltonian construction H_b = i dU_a^dag/dt U_a.
//!
//! ħ = 1; frequencies are angular. Levels are numbered from 0 in ascending
//! energy.

pub mod analysis;
pub mod cli;
pub mod counterexample;
pub mod error;
pub mod format;
pub mod models;
pub mod numerics;
pub mod propagation;
pub mod scenario;
pub mod spinhalf;
pub mod tracking;

pub use error::{Error, Result};
pub use models::{Hamiltonian, HamiltonianModel, SampledHamiltonian, SpinHalfParams};
pub use numerics::{CMatrix, CVector, TimeGrid, C64};
