//! Dense complex linear algebra, Hermitian eigensolves, exponentials of
//! Hermitian generators and uniform time grids.
//!
//! Units are ħ = 1 throughout; frequencies are angular.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Relative Hermiticity tolerance: max|M - M^dag| <= HERMITIAN_RTOL * max|M|.
pub const HERMITIAN_RTOL: f64 = 1e-10;
/// Gaps at or below this fraction of the spectral range count as degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-8;
/// Default upper bound on the step: the shortest relevant period over this.
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 200.0;

/// Uniform discretization of `[t_start, t_end]` into `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidGrid("grid bounds must be finite".into()));
        }
        if t_end <= t_start {
            return Err(Error::InvalidGrid(format!(
                "t_end ({t_end}) must exceed t_start ({t_start})"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("steps must be at least 1".into()));
        }
        Ok(Self { t_start, t_end, steps })
    }

    /// Grid on `[0, tau]` whose spacing does not exceed the shortest period
    /// among `frequencies` divided by `DEFAULT_STEPS_PER_PERIOD`.
    pub fn with_default_steps(tau: f64, frequencies: &[f64]) -> Result<Self> {
        let steps = default_steps(tau, frequencies)?;
        Self::new(0.0, tau, steps)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Node `k`, computed from the index so long grids do not drift.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// Same bounds and spacing, within a relative tolerance on the bounds.
    pub fn matches(&self, other: &TimeGrid) -> bool {
        let scale = self.span().abs().max(1.0);
        self.steps == other.steps
            && (self.t_start - other.t_start).abs() <= 1e-12 * scale
            && (self.t_end - other.t_end).abs() <= 1e-12 * scale
    }
}

/// Number of steps so that `dt <= min(2π/f)/200` over the positive entries of
/// `frequencies`.
pub fn default_steps(tau: f64, frequencies: &[f64]) -> Result<usize> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidGrid(format!("tau must be positive, got {tau}")));
    }
    let fastest = frequencies
        .iter()
        .copied()
        .filter(|f| f.is_finite() && *f > 0.0)
        .fold(0.0_f64, f64::max);
    if fastest == 0.0 {
        return Ok(DEFAULT_STEPS_PER_PERIOD as usize);
    }
    let dt_max = 2.0 * PI / fastest / DEFAULT_STEPS_PER_PERIOD;
    Ok(((tau / dt_max).ceil() as usize).max(1))
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: Vec<CVector>,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Smallest gap between adjacent eigenvalues, `+inf` for dimension 1.
    pub fn min_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn check_hermitian(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::HermiticityViolation {
            deviation: f64::INFINITY,
            tolerance: 0.0,
        });
    }
    let deviation = hermiticity_deviation(m);
    let tolerance = HERMITIAN_RTOL * max_abs(m);
    if deviation > tolerance {
        return Err(Error::HermiticityViolation { deviation, tolerance });
    }
    Ok(())
}

/// (M + M^dag)/2.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Rotate `v` so that its largest-magnitude component is real and positive.
pub fn fix_phase(v: &mut CVector) {
    let mut pivot = C64::new(0.0, 0.0);
    for z in v.iter() {
        if z.norm() > pivot.norm() * (1.0 + 1e-12) {
            pivot = *z;
        }
    }
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

fn eig_sorted(m: &CMatrix) -> Eigensystem {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut v: CVector = eig.eigenvectors.column(i).into_owned();
            let norm = v.norm();
            v.unscale_mut(norm);
            fix_phase(&mut v);
            v
        })
        .collect();
    Eigensystem { values, vectors }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a nondegenerate
/// Hermitian matrix. Each eigenvector's largest component is real positive.
pub fn hermitian_eig(m: &CMatrix) -> Result<Eigensystem> {
    check_hermitian(m)?;
    let eig = eig_sorted(&hermitize(m));
    if eig.dim() > 1 {
        let range = eig.values[eig.dim() - 1] - eig.values[0];
        let tolerance = DEGENERACY_RTOL * range;
        let gap = eig.min_gap();
        if gap <= tolerance {
            return Err(Error::DegenerateSpectrum { gap, tolerance });
        }
    }
    Ok(eig)
}

/// exp(-i H dt) = Σ e^{-i E_m dt} v_m v_m^dag. Degenerate generators are fine
/// here.
pub fn exp_minus_ih_dt(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    check_hermitian(h)?;
    let eig = eig_sorted(&hermitize(h));
    let n = h.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (e, v) in eig.values.iter().zip(&eig.vectors) {
        let phase = C64::from_polar(1.0, -e * dt);
        out += v * v.adjoint() * phase;
    }
    Ok(out)
}

/// max|U^dag U - I|.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

/// <a|b> with the conjugate on the left.
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ],
    )
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), -I, I, C64::new(0.0, 0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-1.0, 0.0),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        hermitize(&m)
    }

    #[test]
    fn grid_nodes_from_index() {
        let grid = TimeGrid::new(0.0, 1.0, 100_000).unwrap();
        assert_eq!(grid.time(0), 0.0);
        assert_eq!(grid.time(100_000), 1.0);
        assert_eq!(grid.time(50_000), 50_000.0 * 1e-5);
        assert_eq!(grid.len(), 100_001);
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(matches!(TimeGrid::new(1.0, 1.0, 10), Err(Error::InvalidGrid(_))));
        assert!(matches!(TimeGrid::new(0.0, 1.0, 0), Err(Error::InvalidGrid(_))));
        assert!(TimeGrid::new(0.0, f64::NAN, 3).is_err());
    }

    #[test]
    fn default_step_rule() {
        // shortest period 2π/10, so dt <= 2π/2000
        let steps = default_steps(2.0 * PI, &[1.0, 10.0, 3.0]).unwrap();
        assert_eq!(steps, 2000);
        let grid = TimeGrid::with_default_steps(1.0, &[100.0]).unwrap();
        assert!(grid.dt() <= 2.0 * PI / 100.0 / 200.0);
    }

    #[test]
    fn sigma_z_eigensystem() {
        let eig = hermitian_eig(&pauli_z()).unwrap();
        assert_eq!(eig.values, vec![-1.0, 1.0]);
        assert!((eig.vectors[0][1] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(eig.vectors[0][0].norm() < 1e-15);
        assert!((eig.vectors[1][0] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_spectral_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_hermitian(&mut rng, 4);
        let eig = hermitian_eig(&m).unwrap();
        let mut rebuilt = CMatrix::zeros(4, 4);
        for (e, v) in eig.values.iter().zip(&eig.vectors) {
            rebuilt += v * v.adjoint() * C64::new(*e, 0.0);
        }
        assert!(max_abs(&(rebuilt - &m)) < 1e-9);
        assert!(eig.values.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = pauli_x();
        m[(0, 1)] = C64::new(2.0, 0.0);
        assert!(matches!(hermitian_eig(&m), Err(Error::HermiticityViolation { .. })));
        assert!(matches!(
            exp_minus_ih_dt(&m, 0.1),
            Err(Error::HermiticityViolation { .. })
        ));
    }

    #[test]
    fn rejects_degenerate() {
        let m = CMatrix::identity(3, 3);
        assert!(matches!(hermitian_eig(&m), Err(Error::DegenerateSpectrum { .. })));
        let mut d = CMatrix::zeros(3, 3);
        d[(0, 0)] = C64::new(1.0, 0.0);
        d[(1, 1)] = C64::new(1.0 + 1e-12, 0.0);
        d[(2, 2)] = C64::new(-1.0, 0.0);
        assert!(matches!(hermitian_eig(&d), Err(Error::DegenerateSpectrum { .. })));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let u = exp_minus_ih_dt(&CMatrix::zeros(3, 3), 0.7).unwrap();
        assert!(max_abs(&(u - CMatrix::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn exp_full_period_is_minus_identity() {
        let omega0 = 1.3;
        let h = pauli_z().scale(omega0 / 2.0);
        let u = exp_minus_ih_dt(&h, 2.0 * PI / omega0).unwrap();
        assert!(max_abs(&(u + CMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn exp_is_unitary_and_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=8 {
            let h = random_hermitian(&mut rng, n);
            let ua = exp_minus_ih_dt(&h, 0.3).unwrap();
            let ub = exp_minus_ih_dt(&h, 0.45).unwrap();
            let uab = exp_minus_ih_dt(&h, 0.75).unwrap();
            assert!(unitarity_deviation(&ua) < 1e-10);
            assert!(max_abs(&(&ua * &ub - uab)) < 1e-9);
        }
    }
}
