//! Cross-checks between the master equation, trajectories, the quadrature
//! map and the ancilla emulator on the extended SSH model.

use std::f64::consts::PI;

use num_complex::Complex64;
use ssh_jumptime::emulator::{ancilla_project, build_extended, jumptime_states_from_ancilla, EmulationSettings, EXTENDED_SUBSTEPS_PER_UNIT};
use ssh_jumptime::jumptime::{
    is_dark, jump_count_average, jumptime_step, mc_unravel, QuadratureRule, QuadratureSpec, UnravelConfig,
};
use ssh_jumptime::lindblad::{build_heff, evolve};
use ssh_jumptime::matrix::{trace_distance, vec_norm_sqr, I};
use ssh_jumptime::{BlochParams, DensityMatrix, MomentumPair};

fn params(w: f64) -> BlochParams {
    BlochParams::new(1.0, w, 1.0).unwrap()
}

fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64)
}

#[test]
fn extended_model_trace_over_long_times() {
    let ext = build_extended(&params(2.0), MomentumPair::new(0.4, 2.2).unwrap(), 3).unwrap();
    let times: Vec<f64> = (1..=30).map(|k| 10.0 * k as f64).collect();
    let out = evolve(&ext.model, &ext.initial_density(), 300.0, EXTENDED_SUBSTEPS_PER_UNIT, &times).unwrap();
    for (_, rho) in &out {
        assert!((rho.trace() - 1.0).abs() <= 1e-8);
    }
}

#[test]
fn no_jump_survival_follows_the_effective_hamiltonian() {
    let ext = build_extended(&params(0.5), MomentumPair::new(0.0, PI / 2.0).unwrap(), 3).unwrap();
    let heff = build_heff(&ext.model);
    let n = 100_000;
    let cfg = UnravelConfig::new(4.0, n, 11).stop_after(1);
    let recs = mc_unravel(&ext.model, &ext.initial_state, &cfg).unwrap();
    for t in [0.5, 1.0, 2.0, 4.0] {
        let psi = heff.scale(-I * t).expm().unwrap().matvec(&ext.initial_state).unwrap();
        let survival = vec_norm_sqr(&psi);
        let frac = recs.iter().filter(|r| r.jumps_by(t) == 0).count() as f64 / n as f64;
        assert!(
            (frac - survival).abs() <= 3.0 * binomial_sigma(survival, n),
            "t={t}: {frac} vs {survival}"
        );
    }
}

#[test]
fn ancilla_levels_count_jumps() {
    let ext = build_extended(&params(2.0), MomentumPair::new(0.0, PI / 2.0).unwrap(), 3).unwrap();
    let times = [1.0, 3.0, 6.0];
    let n = 10_000;
    let recs = mc_unravel(&ext.model, &ext.initial_state, &UnravelConfig::new(6.0, n, 5)).unwrap();
    let exact = evolve(&ext.model, &ext.initial_density(), 6.0, EXTENDED_SUBSTEPS_PER_UNIT, &times).unwrap();
    for (t, rho) in &exact {
        for m in 0..2 {
            let weight = ancilla_project(rho, m).unwrap().trace().unwrap().re;
            let frac = recs.iter().filter(|r| r.jumps_by(*t) == m).count() as f64 / n as f64;
            assert!((frac - weight).abs() <= 3.0 * binomial_sigma(weight, n), "t={t} m={m}: {frac} vs {weight}");
        }
        let overflow = ancilla_project(rho, 2).unwrap().trace().unwrap().re;
        let frac = recs.iter().filter(|r| r.jumps_by(*t) >= 2).count() as f64 / n as f64;
        assert!((frac - overflow).abs() <= 3.0 * binomial_sigma(overflow, n));
    }
}

fn system_state(w: f64, pair: MomentumPair) -> (ssh_jumptime::LindbladModel, Vec<Complex64>) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    (params(w).pair_model(pair), vec![Complex64::new(h, 0.0), z, Complex64::new(h, 0.0), z])
}

#[test]
fn second_jump_state_from_trajectories_and_quadrature() {
    let pair = MomentumPair::new(0.0, PI / 2.0).unwrap();
    let (model, psi0) = system_state(0.5, pair);
    let recs = mc_unravel(&model, &psi0, &UnravelConfig::new(500.0, 10_000, 3).stop_after(2)).unwrap();
    let mc = jump_count_average(&recs, 2, false).unwrap();
    let quad = QuadratureSpec::new(80.0, 8000, QuadratureRule::Trapezoid).unwrap();
    let rho0 = DensityMatrix::from_pure(&psi0).unwrap();
    let rho2 = jumptime_step(&model, &jumptime_step(&model, &rho0, &quad).unwrap().state, &quad)
        .unwrap()
        .state;
    assert!(trace_distance(mc.matrix(), rho2.matrix()).unwrap() <= 0.05);
}

#[test]
fn dark_pair_in_every_route() {
    let prm = params(1.0);
    let pair = MomentumPair::new(PI, PI).unwrap();
    let ext = build_extended(&prm, pair, 3).unwrap();
    let (rho1, _) = jumptime_states_from_ancilla(&ext, &EmulationSettings::new(30.0, 60).unwrap()).unwrap();
    assert!(rho1.trace().abs() < 1e-12);

    let (model, psi0) = system_state(1.0, pair);
    assert!(is_dark(&model, &psi0, 1e-12).unwrap());
    let quad = QuadratureSpec::new(50.0, 2000, QuadratureRule::Trapezoid).unwrap();
    let image = jumptime_step(&model, &DensityMatrix::from_pure(&psi0).unwrap(), &quad).unwrap();
    assert!(image.state.trace().abs() <= 1e-6);

    let recs = mc_unravel(&model, &psi0, &UnravelConfig::new(20.0, 100, 1)).unwrap();
    assert!(recs.iter().all(|r| r.jump_events.is_empty()));
}

#[test]
fn gamma_free_extended_model_keeps_the_ancilla_in_ground() {
    use ssh_jumptime::lindblad::{Channel, LindbladModel};
    let ext = build_extended(&params(2.0), MomentumPair::new(0.3, 1.0).unwrap(), 3).unwrap();
    let op = ext.model.channels()[0].op.clone();
    let model = LindbladModel::new(ext.model.hamiltonian().clone(), vec![Channel::new(0.0, op)]).unwrap();
    let out = evolve(&model, &ext.initial_density(), 10.0, 1000, &[2.0, 10.0]).unwrap();
    for (_, rho) in &out {
        assert!((ancilla_project(rho, 0).unwrap().trace().unwrap().re - 1.0).abs() <= 1e-8);
    }
}
