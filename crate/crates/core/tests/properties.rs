use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use adiabatic_audit::analysis::{analyze, build_reference, AnalysisConfig, PhaseConvention};
use adiabatic_audit::numerics::{
    exp_minus_ih_dt, hermitian_eig, inner, max_abs, unitarity_deviation, CMatrix, CVector, C64, I,
};
use adiabatic_audit::propagation::{accumulate_propagator, integrate_rk4, TimeReversed};
use adiabatic_audit::scenario::{default_tau, run_model, spin_half_grid};
use adiabatic_audit::spinhalf::{closed_form_state, verify_against_integrator, ClosedFormCoefficients};
use adiabatic_audit::tracking::{coupling_ratios, track_frames, EigenFrameSeries};
use adiabatic_audit::{HamiltonianModel, SpinHalfParams, TimeGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(dim: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (&a + a.adjoint()) * C64::from(0.5)
}

fn spin_half() -> impl Strategy<Value = SpinHalfParams> {
    (0.2..20.0f64, 0.2..20.0f64, 0.05..PI - 0.05).prop_map(|(w0, w, th)| SpinHalfParams::new(w0, w, th).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigen_residual_and_unitarity(dim in 2usize..=8, seed in any::<u64>(), dt in -3.0..3.0f64) {
        let h = random_hermitian(dim, seed);
        let eig = hermitian_eig(&h).unwrap();
        let scale = max_abs(&h).max(1.0);
        for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
            prop_assert!((&h * v - v * C64::from(*lambda)).norm() <= 1e-9 * scale);
            prop_assert!((v.norm() - 1.0).abs() <= 1e-12);
        }
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let u = exp_minus_ih_dt(&h, dt).unwrap();
        prop_assert!(unitarity_deviation(&u) <= 1e-12);
    }

    #[test]
    fn closed_form_is_normalized(p in spin_half(), t in 0.0..200.0f64) {
        let c = ClosedFormCoefficients::new(p);
        prop_assert!((c.a(t).norm_sqr() + c.b(t).norm_sqr() - 1.0).abs() <= 1e-12);
        prop_assert!((closed_form_state(&p, t).norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn omega_bar_identity(p in spin_half()) {
        let (w0, w, th) = (p.omega0(), p.omega(), p.theta());
        let expected = w0 * w0 + w * w - 2.0 * w0 * w * th.cos();
        prop_assert!((p.omega_bar().powi(2) - expected).abs() <= 1e-12 * expected.max(1.0));
        // a(t) starts at 1 and returns to −1 after one period of ω̄
        let c = ClosedFormCoefficients::new(p);
        prop_assert!((c.a(2.0 * PI / p.omega_bar()) + 1.0).norm() <= 1e-9);
    }

    #[test]
    fn closed_form_solves_schrodinger(p in spin_half(), t in 0.1..20.0f64) {
        let h = 1e-5;
        let derivative = (closed_form_state(&p, t + h) - closed_form_state(&p, t - h)) * C64::from(0.5 / h);
        let residual = derivative * I - p.hamiltonian(t) * closed_form_state(&p, t);
        let scale = p.omega0() + p.omega();
        prop_assert!(residual.norm() <= 1e-6 * scale * scale, "{}", residual.norm());
    }

    #[test]
    fn full_and_dynamical_conventions_share_fidelity(p in spin_half()) {
        let grid = TimeGrid::new(0.0, 2.0 * PI / p.omega_bar().min(p.omega()), 2000).unwrap();
        let model = HamiltonianModel::SpinHalfRotating(p);
        let frames = track_frames(&model, &grid).unwrap();
        let traj = integrate_rk4(&model, frames.vector(0, 0), &grid);
        prop_assume!(traj.is_ok());
        let traj = traj.unwrap();
        let config = AnalysisConfig::default();
        let full = analyze(&traj, &frames, &build_reference(&frames, 0, PhaseConvention::FullAlpha).unwrap(), &config).unwrap();
        let dynamical = analyze(&traj, &frames, &build_reference(&frames, 0, PhaseConvention::DynamicalOnly).unwrap(), &config).unwrap();
        for (a, b) in full.fidelity.iter().zip(&dynamical.fidelity) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ratios_are_gauge_invariant(p in spin_half(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = TimeGrid::new(0.0, 2.0 * PI / p.omega(), 500).unwrap();
        let model = HamiltonianModel::SpinHalfRotating(p);
        let frames = track_frames(&model, &grid);
        prop_assume!(frames.is_ok());
        let baseline = coupling_ratios(&frames.unwrap()).unwrap();
        let (mut energies, mut vectors) = (Vec::new(), Vec::new());
        for t in grid.times() {
            let eig = hermitian_eig(&p.hamiltonian(t)).unwrap();
            energies.push(eig.values);
            vectors.push(
                eig.vectors
                    .into_iter()
                    .map(|v: CVector| v * C64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI)))
                    .collect::<Vec<_>>(),
            );
        }
        let scrambled = coupling_ratios(&EigenFrameSeries::gauge_fixed(grid, energies, vectors).unwrap()).unwrap();
        for (a, b) in baseline.series.iter().flatten().zip(scrambled.series.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn coupling_matrix_is_hermitian_symmetric(p in spin_half()) {
        let grid = TimeGrid::new(0.0, 2.0 * PI / p.omega(), 400).unwrap();
        let frames = track_frames(&HamiltonianModel::SpinHalfRotating(p), &grid);
        prop_assume!(frames.is_ok());
        let frames = frames.unwrap();
        for k in (0..grid.len()).step_by(37) {
            let d = frames.coupling_matrix(k);
            prop_assert!((d[(0, 1)].norm() - d[(1, 0)].norm()).abs() <= 1e-10);
        }
    }

    #[test]
    fn coefficients_sum_to_one(p in spin_half()) {
        let grid = spin_half_grid(&p, default_tau(&p)).unwrap();
        let run = run_model(
            &HamiltonianModel::SpinHalfRotating(p),
            &grid,
            0,
            PhaseConvention::FullAlpha,
            &AnalysisConfig::default(),
        )
        .unwrap();
        let drift = run.report.norm_drift;
        for c in &run.report.coefficients {
            prop_assert!((c.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() <= drift + 1e-8);
        }
    }

    #[test]
    fn time_reversal_returns_initial_state(p in spin_half()) {
        let tau = 2.0 * PI / p.omega();
        let grid = spin_half_grid(&p, tau).unwrap();
        let model = HamiltonianModel::SpinHalfRotating(p);
        let psi0 = closed_form_state(&p, 0.0);
        let forward = integrate_rk4(&model, &psi0, &grid).unwrap();
        // RK4 norm drift is far below 1e-6 but above the 1e-12 initial-state check
        let turn = forward.final_state().normalize();
        let backward = integrate_rk4(&TimeReversed::new(&model, &grid), &turn, &grid).unwrap();
        prop_assert!((backward.final_state() - psi0).norm() <= 1e-6);
    }
}

#[test]
fn ratio_converges_at_second_order() {
    let p = SpinHalfParams::new(1.0, 0.3, FRAC_PI_3).unwrap();
    let expected = p.omega() * p.theta().sin() / (2.0 * p.omega0());
    let tau = 2.0 * PI / p.omega();
    let error = |steps: usize| {
        let grid = TimeGrid::new(0.0, tau, steps).unwrap();
        let report = coupling_ratios(&track_frames(&HamiltonianModel::SpinHalfRotating(p), &grid).unwrap()).unwrap();
        report
            .series
            .iter()
            .flatten()
            .map(|g| (g - expected).abs())
            .fold(0.0, f64::max)
    };
    let ratio = error(400) / error(800);
    assert!((2.5..=6.0).contains(&ratio), "{ratio}");
}

#[test]
fn rk4_converges_at_fourth_order() {
    for p in [
        SpinHalfParams::new(1.0, 0.5, FRAC_PI_3).unwrap(),
        SpinHalfParams::new(2.0, 1.0, FRAC_PI_2).unwrap(),
    ] {
        let tau = 4.0 * PI / p.omega_bar();
        let error = |steps| verify_against_integrator(&p, &TimeGrid::new(0.0, tau, steps).unwrap()).unwrap();
        let ratio = error(100) / error(200);
        assert!((8.0..=32.0).contains(&ratio), "{ratio}");
    }
}

#[test]
fn propagator_and_rk4_agree() {
    let p = SpinHalfParams::new(3.0, 1.0, 1.1).unwrap();
    let model = HamiltonianModel::SpinHalfRotating(p);
    let grid = TimeGrid::new(0.0, 2.0 * PI, 20_000).unwrap();
    let psi0 = closed_form_state(&p, 0.0);
    let rk = integrate_rk4(&model, &psi0, &grid).unwrap();
    let prop = accumulate_propagator(&model, &grid, Some(&psi0)).unwrap();
    for k in (0..grid.len()).step_by(500) {
        let closed = closed_form_state(&p, grid.time(k));
        assert!((rk.state(k) - &closed).norm() <= 1e-8);
        assert!((prop.state(k) - &closed).norm() <= 1e-5);
        assert!((inner(prop.state(k), rk.state(k)).norm() - 1.0).abs() <= 1e-8);
    }
}
