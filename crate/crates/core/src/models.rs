//! Time-dependent Hamiltonian sources.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{check_hermitian, hermitize, pauli_x, pauli_y, pauli_z, CMatrix, CVector, TimeGrid, C64};

/// Anything that yields a Hermitian matrix at a given time.
pub trait Hamiltonian: Sync {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> Result<CMatrix>;
}

/// Spin-half particle in a field of strength `omega0` rotating at `omega`
/// about z, tilted by `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinHalfParams {
    omega0: f64,
    omega: f64,
    theta: f64,
}

impl SpinHalfParams {
    pub fn new(omega0: f64, omega: f64, theta: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega0 must be positive, got {omega0}"
            )));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        if !(theta > 0.0 && theta < PI) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in (0, π), got {theta}"
            )));
        }
        Ok(Self { omega0, omega, theta })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// √(ω₀² + ω² − 2ω₀ω cosθ), the Rabi frequency in the rotating frame.
    pub fn omega_bar(&self) -> f64 {
        let (w0, w) = (self.omega0, self.omega);
        (w0 * w0 + w * w - 2.0 * w0 * w * self.theta.cos()).sqrt()
    }

    /// The three time scales relevant for step selection.
    pub fn frequencies(&self) -> [f64; 3] {
        [self.omega0, self.omega, self.omega_bar()]
    }

    /// ω sinθ / (2ω₀): the coupling ratio between the two instantaneous levels.
    pub fn condition_ratio(&self) -> f64 {
        self.omega * self.theta.sin() / (2.0 * self.omega0)
    }

    pub fn hamiltonian(&self, t: f64) -> CMatrix {
        let half = 0.5 * self.omega0;
        let (s, c) = self.theta.sin_cos();
        let phase = C64::from_polar(1.0, self.omega * t);
        let off = phase.conj() * (half * s);
        CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(half * c, 0.0), off, off.conj(), C64::new(-half * c, 0.0)],
        )
    }

    /// Same matrix built from the Pauli decomposition; used to cross-check
    /// [`Self::hamiltonian`].
    pub fn hamiltonian_from_paulis(&self, t: f64) -> CMatrix {
        let (s, c) = self.theta.sin_cos();
        let wt = self.omega * t;
        (pauli_x() * C64::from(s * wt.cos()) + pauli_y() * C64::from(s * wt.sin()) + pauli_z() * C64::from(c))
            * C64::from(0.5 * self.omega0)
    }

    /// Closed-form instantaneous eigenpairs, ascending: E₁ = −ω₀/2, E₂ = +ω₀/2.
    pub fn eigensystem(&self, t: f64) -> ([f64; 2], [CVector; 2]) {
        let (sh, ch) = (0.5 * self.theta).sin_cos();
        let minus = C64::from_polar(1.0, -0.5 * self.omega * t);
        let plus = minus.conj();
        let e1 = CVector::from_vec(vec![minus * sh, -plus * ch]);
        let e2 = CVector::from_vec(vec![minus * ch, plus * sh]);
        ([-0.5 * self.omega0, 0.5 * self.omega0], [e1, e2])
    }
}

/// Closed-form eigenpairs of the rotating-field Hamiltonian at time `t`.
pub fn spin_half_eigensystem(p: &SpinHalfParams, t: f64) -> ([f64; 2], [CVector; 2]) {
    p.eigensystem(t)
}

/// Hermitian matrices tabulated at strictly increasing times, interpolated
/// linearly entry by entry and re-Hermitized.
#[derive(Debug, Clone)]
pub struct SampledHamiltonian {
    dim: usize,
    times: Vec<f64>,
    matrices: Vec<CMatrix>,
}

impl SampledHamiltonian {
    pub fn new(times: Vec<f64>, matrices: Vec<CMatrix>) -> Result<Self> {
        if times.is_empty() || times.len() != matrices.len() {
            return Err(Error::ModelFile(format!(
                "need matching non-empty times and matrices, got {} and {}",
                times.len(),
                matrices.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::ModelFile("times must be finite".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::ModelFile("times must be strictly increasing".into()));
        }
        let dim = matrices[0].nrows();
        if dim == 0 {
            return Err(Error::ModelFile("dimension must be positive".into()));
        }
        for m in &matrices {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.nrows(),
                });
            }
            check_hermitian(m)?;
        }
        Ok(Self { dim, times, matrices })
    }

    /// The same matrix at every time in `[t_start, t_end]`.
    pub fn constant(h: CMatrix, t_start: f64, t_end: f64) -> Result<Self> {
        Self::new(vec![t_start, t_end], vec![h.clone(), h])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    fn evaluate(&self, t: f64) -> Result<CMatrix> {
        let (start, end) = self.span();
        let slack = 1e-12 * (end - start).abs().max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(Error::TimeOutOfDomain { t, start, end });
        }
        if self.times.len() == 1 {
            return Ok(self.matrices[0].clone());
        }
        let t = t.clamp(start, end);
        let upper = self.times.partition_point(|&x| x < t);
        if upper < self.times.len() && self.times[upper] == t {
            return Ok(self.matrices[upper].clone());
        }
        let hi = upper.min(self.times.len() - 1).max(1);
        let lo = hi - 1;
        let w = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        let (a, b) = (&self.matrices[lo], &self.matrices[hi]);
        let m = a + (b - a) * C64::from(w);
        Ok(hermitize(&m))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SampledModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
        file.into_model()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_file(&self) -> SampledModelFile {
        SampledModelFile {
            dim: self.dim,
            times: self.times.clone(),
            matrices: self
                .matrices
                .iter()
                .map(|m| {
                    // row-major
                    (0..self.dim)
                        .flat_map(|r| (0..self.dim).map(move |c| (r, c)))
                        .map(|(r, c)| [m[(r, c)].re, m[(r, c)].im])
                        .collect()
                })
                .collect(),
        }
    }
}

/// On-disk form of a sampled model: row-major `[re, im]` pairs per matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledModelFile {
    pub dim: usize,
    pub times: Vec<f64>,
    pub matrices: Vec<Vec<[f64; 2]>>,
}

impl SampledModelFile {
    pub fn into_model(self) -> Result<SampledHamiltonian> {
        let n = self.dim;
        let mut matrices = Vec::with_capacity(self.matrices.len());
        for (k, entries) in self.matrices.into_iter().enumerate() {
            if entries.len() != n * n {
                return Err(Error::ModelFile(format!(
                    "matrix {k} has {} entries, expected {}",
                    entries.len(),
                    n * n
                )));
            }
            let data: Vec<C64> = entries.iter().map(|[re, im]| C64::new(*re, *im)).collect();
            matrices.push(CMatrix::from_row_slice(n, n, &data));
        }
        SampledHamiltonian::new(self.times, matrices)
    }
}

/// H_b(t) = i dU_a^dag/dt U_a(t) = −U_a^dag(t) H_a(t) U_a(t), tabulated on the
/// propagator grid of the reference model.
#[derive(Debug, Clone)]
pub struct DualHamiltonian {
    reference: Box<HamiltonianModel>,
    grid: TimeGrid,
    propagators: Vec<CMatrix>,
    samples: SampledHamiltonian,
}

impl DualHamiltonian {
    pub fn new(reference: HamiltonianModel, grid: TimeGrid, propagators: Vec<CMatrix>) -> Result<Self> {
        if propagators.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} propagators for {} grid nodes",
                propagators.len(),
                grid.len()
            )));
        }
        let matrices = propagators
            .iter()
            .enumerate()
            .map(|(k, u)| {
                let h = reference.at(grid.time(k))?;
                Ok(hermitize(&-(u.adjoint() * h * u)))
            })
            .collect::<Result<Vec<_>>>()?;
        let samples = SampledHamiltonian::new(grid.times(), matrices)?;
        Ok(Self {
            reference: Box::new(reference),
            grid,
            propagators,
            samples,
        })
    }

    pub fn reference(&self) -> &HamiltonianModel {
        &self.reference
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn propagators(&self) -> &[CMatrix] {
        &self.propagators
    }

    /// H_b at every grid node.
    pub fn node_matrices(&self) -> &[CMatrix] {
        self.samples.matrices()
    }
}

#[derive(Debug, Clone)]
pub enum HamiltonianModel {
    SpinHalfRotating(SpinHalfParams),
    SampledGeneric(SampledHamiltonian),
    DualOf(DualHamiltonian),
}

impl HamiltonianModel {
    pub fn spin_half(omega0: f64, omega: f64, theta: f64) -> Result<Self> {
        Ok(Self::SpinHalfRotating(SpinHalfParams::new(omega0, omega, theta)?))
    }

    pub fn evaluate(&self, t: f64) -> Result<CMatrix> {
        let h = match self {
            Self::SpinHalfRotating(p) => {
                if !t.is_finite() {
                    return Err(Error::TimeOutOfDomain {
                        t,
                        start: f64::NEG_INFINITY,
                        end: f64::INFINITY,
                    });
                }
                return Ok(p.hamiltonian(t));
            }
            Self::SampledGeneric(s) => s.evaluate(t)?,
            Self::DualOf(d) => d.samples.evaluate(t)?,
        };
        Ok(h)
    }

    pub fn spin_half_params(&self) -> Option<&SpinHalfParams> {
        match self {
            Self::SpinHalfRotating(p) => Some(p),
            _ => None,
        }
    }
}

impl Hamiltonian for HamiltonianModel {
    fn dim(&self) -> usize {
        match self {
            Self::SpinHalfRotating(_) => 2,
            Self::SampledGeneric(s) => s.dim,
            Self::DualOf(d) => d.samples.dim,
        }
    }

    fn at(&self, t: f64) -> Result<CMatrix> {
        self.evaluate(t)
    }
}

/// Evaluate `model` at `t`.
pub fn evaluate(model: &HamiltonianModel, t: f64) -> Result<CMatrix> {
    model.evaluate(t)
}
