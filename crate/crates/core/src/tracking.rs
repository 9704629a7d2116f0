//! Eigen-frames followed along a time grid, and the coupling ratios
//! |<E_n|dE_m/dt>| / |E_n − E_m| built from them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::{ser_f64, ser_opt_vec_vec_f64};
use crate::models::Hamiltonian;
use crate::numerics::{fix_phase, hermitian_eig, inner, CMatrix, CVector, TimeGrid, C64, DEGENERACY_RTOL};

/// Largest tolerated off-diagonal overlap between successive frames.
pub const CROSSING_OVERLAP: f64 = 0.5;

/// Per-node energies and eigenvectors in a phase-continuous gauge.
#[derive(Debug, Clone)]
pub struct EigenFrameSeries {
    grid: TimeGrid,
    energies: Vec<Vec<f64>>,
    vectors: Vec<Vec<CVector>>,
    min_gap: f64,
}

/// Eigensolve every node of `grid` and gauge-fix the result.
pub fn track_frames<H: Hamiltonian + ?Sized>(model: &H, grid: &TimeGrid) -> Result<EigenFrameSeries> {
    let solved = (0..grid.len())
        .into_par_iter()
        .map(|k| hermitian_eig(&model.at(grid.time(k))?))
        .collect::<Result<Vec<_>>>()?;
    let (energies, vectors) = solved.into_iter().map(|e| (e.values, e.vectors)).unzip();
    EigenFrameSeries::gauge_fixed(*grid, energies, vectors)
}

impl EigenFrameSeries {
    /// Fix the phase of node 0 by its largest component, then make every
    /// successive overlap <v_m(t_k)|v_m(t_{k+1})> real and positive.
    pub fn gauge_fixed(grid: TimeGrid, energies: Vec<Vec<f64>>, mut vectors: Vec<Vec<CVector>>) -> Result<Self> {
        check_shapes(&grid, &energies, &vectors)?;
        for v in vectors[0].iter_mut() {
            fix_phase(v);
        }
        for k in 1..vectors.len() {
            let (done, rest) = vectors.split_at_mut(k);
            let prev = &done[k - 1];
            let cur = &mut rest[0];
            check_crossing(prev, cur, k - 1)?;
            for (p, c) in prev.iter().zip(cur.iter_mut()) {
                let o = inner(p, c);
                if o.im == 0.0 && o.re > 0.0 {
                    continue;
                }
                let phase = o.conj() / o.norm();
                c.iter_mut().for_each(|z| *z *= phase);
            }
        }
        Self::assemble(grid, energies, vectors)
    }

    /// Frames supplied in an already-continuous gauge, e.g. closed-form
    /// eigenvectors. Only continuity is checked.
    pub fn from_parts(grid: TimeGrid, energies: Vec<Vec<f64>>, vectors: Vec<Vec<CVector>>) -> Result<Self> {
        check_shapes(&grid, &energies, &vectors)?;
        for k in 1..vectors.len() {
            check_crossing(&vectors[k - 1], &vectors[k], k - 1)?;
            for (p, c) in vectors[k - 1].iter().zip(&vectors[k]) {
                if inner(p, c).re <= 0.0 {
                    return Err(Error::PreconditionNotMet(format!(
                        "frames are not phase-continuous between nodes {} and {k}",
                        k - 1
                    )));
                }
            }
        }
        Self::assemble(grid, energies, vectors)
    }

    fn assemble(grid: TimeGrid, energies: Vec<Vec<f64>>, vectors: Vec<Vec<CVector>>) -> Result<Self> {
        let mut min_gap = f64::INFINITY;
        for (k, e) in energies.iter().enumerate() {
            if e.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::PreconditionNotMet(format!("energies not ascending at node {k}")));
            }
            if e.len() > 1 {
                let gap = e.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
                let tolerance = DEGENERACY_RTOL * (e[e.len() - 1] - e[0]);
                if gap <= tolerance {
                    return Err(Error::DegenerateSpectrum { gap, tolerance });
                }
                min_gap = min_gap.min(gap);
            }
        }
        Ok(Self {
            grid,
            energies,
            vectors,
            min_gap,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.energies[0].len()
    }

    pub fn energies(&self, k: usize) -> &[f64] {
        &self.energies[k]
    }

    pub fn vectors(&self, k: usize) -> &[CVector] {
        &self.vectors[k]
    }

    pub fn vector(&self, k: usize, m: usize) -> &CVector {
        &self.vectors[k][m]
    }

    pub fn energy(&self, k: usize, m: usize) -> f64 {
        self.energies[k][m]
    }

    /// Smallest adjacent-level gap over all nodes.
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    /// dv_m/dt at node k: central differences inside, second-order one-sided
    /// stencils at the two ends. Needs at least three nodes.
    pub fn derivative(&self, k: usize, m: usize) -> CVector {
        let n = self.vectors.len();
        let h = self.grid.dt();
        let v = |j: usize| &self.vectors[j][m];
        if k == 0 {
            ((v(1) - v(0)) * C64::from(4.0) - (v(2) - v(0))) * C64::from(0.5 / h)
        } else if k == n - 1 {
            ((v(n - 3) - v(n - 1)) - (v(n - 2) - v(n - 1)) * C64::from(4.0)) * C64::from(0.5 / h)
        } else {
            (v(k + 1) - v(k - 1)) * C64::from(0.5 / h)
        }
    }

    /// D[n][m] = <v_n|dv_m/dt> at node k, as computed from the stencils.
    pub fn coupling_matrix(&self, k: usize) -> CMatrix {
        let dim = self.dim();
        let derivs: Vec<CVector> = (0..dim).map(|m| self.derivative(k, m)).collect();
        CMatrix::from_fn(dim, dim, |n, m| inner(&self.vectors[k][n], &derivs[m]))
    }
}

fn check_shapes(grid: &TimeGrid, energies: &[Vec<f64>], vectors: &[Vec<CVector>]) -> Result<()> {
    if energies.len() != grid.len() || vectors.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} energy sets and {} vector sets for {} nodes",
            energies.len(),
            vectors.len(),
            grid.len()
        )));
    }
    let dim = energies[0].len();
    for (e, v) in energies.iter().zip(vectors) {
        if e.len() != dim || v.len() != dim || v.iter().any(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: e.len(),
            });
        }
    }
    Ok(())
}

fn check_crossing(prev: &[CVector], cur: &[CVector], node: usize) -> Result<()> {
    for (m, p) in prev.iter().enumerate() {
        for (j, c) in cur.iter().enumerate() {
            if m != j {
                let overlap = inner(p, c).norm();
                if overlap > CROSSING_OVERLAP {
                    return Err(Error::LevelCrossing {
                        node,
                        next: node + 1,
                        overlap,
                    });
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArgMax {
    pub pair: (usize, usize),
    #[serde(serialize_with = "ser_f64")]
    pub t: f64,
    #[serde(skip)]
    pub node: usize,
}

/// Coupling ratios for every ordered level pair over the grid.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub times: Vec<f64>,
    pub pairs: Vec<(usize, usize)>,
    /// `series[p][k]` is the ratio of `pairs[p]` at node k.
    pub series: Vec<Vec<f64>>,
    pub max_ratio: f64,
    pub arg_max: Option<ArgMax>,
}

/// Ratios g_nm(t) = |<E_n|dE_m/dt>| / |E_n − E_m| for all n ≠ m.
///
/// The stencil coupling matrix is projected onto its anti-Hermitian part
/// before taking magnitudes. The exact matrix is anti-Hermitian, so this only
/// removes O(dt²) stencil error and makes |g_nm| = |g_mn| hold exactly.
pub fn coupling_ratios(frames: &EigenFrameSeries) -> Result<ConditionReport> {
    let grid = frames.grid();
    if grid.len() < 3 {
        return Err(Error::InvalidGrid("coupling ratios need at least 3 nodes".into()));
    }
    let dim = frames.dim();
    let pairs: Vec<(usize, usize)> = (0..dim)
        .flat_map(|n| (0..dim).filter(move |&m| m != n).map(move |m| (n, m)))
        .collect();
    let per_node: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let d = frames.coupling_matrix(k);
            let a = (&d - d.adjoint()) * C64::from(0.5);
            let e = frames.energies(k);
            pairs
                .iter()
                .map(|&(n, m)| a[(n, m)].norm() / (e[n] - e[m]).abs())
                .collect()
        })
        .collect();
    let mut series = vec![Vec::with_capacity(grid.len()); pairs.len()];
    for row in &per_node {
        for (p, g) in row.iter().enumerate() {
            series[p].push(*g);
        }
    }
    let mut max_ratio = 0.0;
    let mut arg_max = None;
    for (p, s) in series.iter().enumerate() {
        for (k, &g) in s.iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::PreconditionNotMet(format!(
                    "non-finite coupling ratio at node {k}"
                )));
            }
            if arg_max.is_none() || g > max_ratio {
                max_ratio = g;
                arg_max = Some(ArgMax {
                    pair: pairs[p],
                    t: grid.time(k),
                    node: k,
                });
            }
        }
    }
    Ok(ConditionReport {
        times: grid.times(),
        pairs,
        series,
        max_ratio,
        arg_max,
    })
}

impl ConditionReport {
    /// Largest ratio over pairs at node k.
    pub fn max_at(&self, k: usize) -> f64 {
        self.series.iter().map(|s| s[k]).fold(0.0, f64::max)
    }

    pub fn pair_series(&self, n: usize, m: usize) -> Option<&[f64]> {
        self.pairs
            .iter()
            .position(|&p| p == (n, m))
            .map(|p| self.series[p].as_slice())
    }

    pub fn to_json(&self, include_series: bool) -> ConditionJson {
        ConditionJson {
            max_ratio: self.max_ratio,
            arg_max: self.arg_max,
            series: include_series.then(|| self.series.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionJson {
    #[serde(serialize_with = "ser_f64")]
    pub max_ratio: f64,
    pub arg_max: Option<ArgMax>,
    #[serde(serialize_with = "ser_opt_vec_vec_f64", skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<Vec<f64>>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{HamiltonianModel, SampledHamiltonian, SpinHalfParams};
    use crate::numerics::{pauli_x, pauli_z};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn constant_model() -> HamiltonianModel {
        let h = pauli_z() * C64::from(0.7) + pauli_x() * C64::from(0.2);
        HamiltonianModel::SampledGeneric(SampledHamiltonian::constant(h, 0.0, 1.0).unwrap())
    }

    #[test]
    fn constant_model_has_identical_frames_and_zero_ratios() {
        let grid = TimeGrid::new(0.0, 1.0, 99).unwrap();
        let frames = track_frames(&constant_model(), &grid).unwrap();
        for k in 1..grid.len() {
            for m in 0..2 {
                assert_eq!(frames.vector(k, m), frames.vector(0, m));
                assert_eq!(inner(frames.vector(k - 1, m), frames.vector(k, m)).im, 0.0);
            }
        }
        let report = coupling_ratios(&frames).unwrap();
        assert_eq!(report.max_ratio, 0.0);
        assert_eq!(report.pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn frames_follow_closed_form_up_to_phase() {
        let p = SpinHalfParams::new(1.0, 0.1, PI / 3.0).unwrap();
        let grid = TimeGrid::new(0.0, 2.0 * PI / 0.1, 10_000).unwrap();
        let frames = track_frames(&HamiltonianModel::SpinHalfRotating(p), &grid).unwrap();
        for k in (0..grid.len()).step_by(97) {
            let (e, closed) = p.eigensystem(grid.time(k));
            for m in 0..2 {
                assert!((inner(frames.vector(k, m), &closed[m]).norm() - 1.0).abs() < 1e-8);
                assert!((frames.energy(k, m) - e[m]).abs() < 1e-12);
            }
        }
        assert!((frames.min_gap() - 1.0).abs() < 1e-12);
        for k in 1..grid.len() {
            for m in 0..2 {
                assert!(inner(frames.vector(k - 1, m), frames.vector(k, m)).re > 0.0);
            }
        }
    }

    #[test]
    fn equatorial_ratio_matches_symbolic_value() {
        let p = SpinHalfParams::new(1.0, 0.1, FRAC_PI_2).unwrap();
        let grid = TimeGrid::with_default_steps(2.0 * PI / 0.1, &p.frequencies()).unwrap();
        let report = coupling_ratios(&track_frames(&HamiltonianModel::SpinHalfRotating(p), &grid).unwrap()).unwrap();
        for s in &report.series {
            for g in s {
                assert!((g - 0.05).abs() < 1e-4, "{g}");
            }
        }
        assert!((report.max_ratio - 0.05).abs() < 1e-4);
    }

    #[test]
    fn fast_field_ratio() {
        let p = SpinHalfParams::new(1.0, 10.0, 0.06).unwrap();
        // central differences carry a relative error of (ω dt)²/6, so refine past the default rule
        let steps = 4 * crate::numerics::default_steps(2.0 * PI, &p.frequencies()).unwrap();
        let grid = TimeGrid::new(0.0, 2.0 * PI, steps).unwrap();
        let report = coupling_ratios(&track_frames(&HamiltonianModel::SpinHalfRotating(p), &grid).unwrap()).unwrap();
        let expected = 10.0 * 0.06_f64.sin() / 2.0;
        assert!(
            (report.max_ratio - expected).abs() < 1e-4 * expected,
            "{} {expected}",
            report.max_ratio
        );
        assert!((report.max_ratio - 0.2998).abs() < 1e-4);
    }

    #[test]
    fn degenerate_and_crossing_rejected() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let flat = HamiltonianModel::SampledGeneric(
            SampledHamiltonian::constant(crate::numerics::CMatrix::identity(2, 2), 0.0, 1.0).unwrap(),
        );
        assert!(matches!(
            track_frames(&flat, &grid),
            Err(Error::DegenerateSpectrum { .. })
        ));

        // sigma_z -> -sigma_z swaps the eigenvectors of the two levels
        let swap = HamiltonianModel::SampledGeneric(
            SampledHamiltonian::new(
                vec![0.0, 0.5, 0.50001, 1.0],
                vec![pauli_z(), pauli_z(), -pauli_z(), -pauli_z()],
            )
            .unwrap(),
        );
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert!(matches!(track_frames(&swap, &grid), Err(Error::LevelCrossing { .. })));
    }

    #[test]
    fn too_few_nodes() {
        let grid = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let frames = track_frames(&constant_model(), &grid).unwrap();
        assert!(matches!(coupling_ratios(&frames), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn json_shape() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let report = coupling_ratios(&track_frames(&constant_model(), &grid).unwrap()).unwrap();
        let v = serde_json::to_value(report.to_json(false)).unwrap();
        assert_eq!(v["max_ratio"], 0.0);
        assert_eq!(v["arg_max"]["pair"], serde_json::json!([0, 1]));
        assert!(v.get("series").is_none());
        let v = serde_json::to_value(report.to_json(true)).unwrap();
        assert_eq!(v["series"].as_array().unwrap().len(), 2);
    }
}
