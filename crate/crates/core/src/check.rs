//! Fast cross-oracle self-check run by `ssh-jumptime check`.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::emulator::{
    build_extended, jumptime_states_from_ancilla, jumptime_states_full_model, kcc_emulated_at, EmulationSettings,
    EXTENDED_SUBSTEPS_PER_UNIT,
};
use crate::error::Result;
use crate::jumptime::{
    is_dark, jump_count_average, jumptime_step, mc_unravel, sample_average, QuadratureRule, QuadratureSpec,
    UnravelConfig,
};
use crate::lindblad::{amplitude_damping, evolve, Channel, DensityMatrix, LindbladModel};
use crate::matrix::pauli::{sigma_minus, sigma_x};
use crate::matrix::{trace_distance, ComplexMatrix, I};
use crate::ssh::{jumptime_phase, kcc_closed_form, kcc_closed_form_at, winding_number, BlochParams, MomentumPair, PhaseOptions};

#[derive(Debug, Clone)]
pub struct CheckOptions {
    /// RK4 substeps per unit time for every master-equation integration.
    pub substeps_per_unit: usize,
    pub seed: u64,
    pub n_traj: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            substeps_per_unit: EXTENDED_SUBSTEPS_PER_UNIT,
            seed: 7,
            n_traj: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }
}

type Outcome = Result<(bool, String)>;

fn verdict(ok: bool, detail: String) -> Outcome {
    Ok((ok, detail))
}

fn ssh(w: f64) -> BlochParams {
    BlochParams::new(1.0, w, 1.0).expect("valid parameters")
}

fn expm_identities(opts: &CheckOptions) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst_inv: f64 = 0.0;
    let mut worst_unit: f64 = 0.0;
    for _ in 0..20 {
        let n = 4;
        let a = ComplexMatrix::new(
            n,
            n,
            (0..n * n).map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect(),
        )?;
        let prod = &a.expm()? * &a.scale_real(-1.0).expm()?;
        worst_inv = worst_inv.max(prod.max_abs_diff(&ComplexMatrix::identity(n)));
        let h = &a + &a.adjoint();
        let u = h.scale(-I * 1.3).expm()?;
        worst_unit = worst_unit.max((&u.adjoint() * &u).max_abs_diff(&ComplexMatrix::identity(n)));
    }
    verdict(
        worst_inv <= 1e-9 && worst_unit <= 1e-9,
        format!("max |e^A e^-A - I| = {worst_inv:.2e}, max |U†U - I| = {worst_unit:.2e}"),
    )
}

fn amplitude_damping_decay(opts: &CheckOptions) -> Outcome {
    let model = amplitude_damping(1.0)?;
    let rho0 = DensityMatrix::new(ComplexMatrix::basis_projector(2, 1), true)?;
    let out = evolve(&model, &rho0, 1.0, opts.substeps_per_unit, &[])?;
    let err = (out[0].1.population(1) - (-1.0f64).exp()).abs();
    verdict(err <= 1e-6, format!("|P_1(1) - e^-1| = {err:.2e}"))
}

fn extended_invariants(opts: &CheckOptions) -> Outcome {
    let ext = build_extended(&ssh(2.0), MomentumPair::new(0.0, PI / 2.0)?, 3)?;
    let times: Vec<f64> = (1..=20).map(|k| 5.0 * k as f64).collect();
    match evolve(&ext.model, &ext.initial_density(), 100.0, opts.substeps_per_unit, &times) {
        Ok(samples) => {
            let drift = samples.iter().map(|(_, r)| (r.trace() - 1.0).abs()).fold(0.0, f64::max);
            verdict(true, format!("100 time units, max trace drift {drift:.2e}"))
        }
        Err(e) => verdict(false, e.to_string()),
    }
}

fn quadrature_map(_: &CheckOptions) -> Outcome {
    let params = ssh(0.5);
    let model = params.pair_model(MomentumPair::new(0.0, PI / 2.0)?);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    let rho0 = DensityMatrix::from_pure(&[Complex64::new(h, 0.0), z, Complex64::new(h, 0.0), z])?;
    let quad = QuadratureSpec::auto(&model, rho0.matrix())?;
    let rho1 = jumptime_step(&model, &rho0, &quad)?.state;
    let rho2 = jumptime_step(&model, &rho1, &quad)?.state;
    let rho2_again = jumptime_step(&model, &jumptime_step(&model, &rho0, &quad)?.state, &quad)?.state;
    let same = rho2.matrix().max_abs_diff(rho2_again.matrix());
    let trace_err = (rho1.trace() - 1.0).abs().max((rho2.trace() - 1.0).abs());

    let dark_model = ssh(1.0).sector_model(PI);
    let ground = [Complex64::new(1.0, 0.0), z];
    let dark = is_dark(&dark_model, &ground, 1e-12)?;
    let dark_rho = DensityMatrix::from_pure(&ground)?;
    let dark_quad = QuadratureSpec::new(50.0, 2000, QuadratureRule::Trapezoid)?;
    let dark_trace = jumptime_step(&dark_model, &dark_rho, &dark_quad)?.state.trace().abs();
    verdict(
        same <= 1e-6 && trace_err <= 1e-4 && dark && dark_trace <= 1e-6,
        format!("repeat diff {same:.1e}, trace error {trace_err:.1e}, dark {dark}, dark image trace {dark_trace:.1e}"),
    )
}

fn mc_vs_master_equation(opts: &CheckOptions) -> Outcome {
    let ext = build_extended(&ssh(2.0), MomentumPair::new(0.0, PI / 2.0)?, 3)?;
    let times = [1.0, 5.0];
    let cfg = UnravelConfig::new(5.0, opts.n_traj, opts.seed).with_samples(&times);
    let recs = mc_unravel(&ext.model, &ext.initial_state, &cfg)?;
    let exact = evolve(&ext.model, &ext.initial_density(), 5.0, opts.substeps_per_unit, &times)?;
    let mut worst: f64 = 0.0;
    for (i, (_, rho)) in exact.iter().enumerate() {
        worst = worst.max(trace_distance(sample_average(&recs, i)?.matrix(), rho.matrix())?);
    }
    verdict(worst <= 0.03, format!("{} trajectories, max trace distance {worst:.4}", opts.n_traj))
}

fn mc_smoke_without_decay(opts: &CheckOptions) -> Outcome {
    let model = LindbladModel::new(sigma_x(), vec![Channel::new(0.0, sigma_minus())])?;
    let psi0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let cfg = UnravelConfig::new(3.0, 200, opts.seed).with_samples(&[3.0]);
    let recs = mc_unravel(&model, &psi0, &cfg)?;
    let exact = evolve(&model, &DensityMatrix::from_pure(&psi0)?, 3.0, opts.substeps_per_unit, &[3.0])?;
    let dist = trace_distance(sample_average(&recs, 0)?.matrix(), exact[0].1.matrix())?;
    let jumps: usize = recs.iter().map(|r| r.jump_events.len()).sum();
    verdict(jumps == 0 && dist <= 1e-6, format!("jumps {jumps}, trace distance {dist:.1e}"))
}

fn analytic_phase_equals_winding(_: &CheckOptions) -> Outcome {
    let mut worst: f64 = 0.0;
    for w in [0.25, 0.5, 0.75, 1.5, 2.0, 3.0] {
        let params = ssh(w);
        let t = jumptime_phase(|p, q| kcc_closed_form_at(&params, p, q), 500, 0.01, PhaseOptions::default())?;
        let wind = winding_number(&params, 1000)?.value as f64;
        worst = worst.max((t - Complex64::new(wind, 0.0)).norm());
    }
    verdict(worst <= 0.05, format!("max |T - W| = {worst:.4}"))
}

fn closed_form_vs_quadrature(_: &CheckOptions) -> Outcome {
    let params = ssh(0.5);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    let rho0 = DensityMatrix::from_pure(&[Complex64::new(h, 0.0), z, Complex64::new(h, 0.0), z])?;
    let quad = QuadratureSpec::new(80.0, 8000, QuadratureRule::Trapezoid)?;
    let mut worst: f64 = 0.0;
    for (p, q) in [(0.0, PI / 2.0), (1.0, 2.5), (3.0, 5.5)] {
        let pair = MomentumPair::new(p, q)?;
        let model = params.pair_model(pair);
        let rho1 = jumptime_step(&model, &rho0, &quad)?.state;
        let rho2 = jumptime_step(&model, &rho1, &quad)?.state;
        let ratio = rho2.matrix()[(0, 2)] / rho1.matrix()[(0, 2)];
        worst = worst.max((ratio - kcc_closed_form(&params, pair)?).norm());
    }
    verdict(worst <= 1e-3, format!("max |ratio - K| = {worst:.2e}"))
}

fn block_vs_full_route(opts: &CheckOptions) -> Outcome {
    let ext = build_extended(&ssh(2.0), MomentumPair::new(0.7, 2.9)?, 3)?;
    let s = EmulationSettings::new(30.0, 60)?;
    let (a1, a2) = jumptime_states_from_ancilla(&ext, &s)?;
    let (f1, f2) = jumptime_states_full_model(&ext, &s, opts.substeps_per_unit)?;
    let diff = a1.matrix().max_abs_diff(f1.matrix()).max(a2.matrix().max_abs_diff(f2.matrix()));
    verdict(diff <= 1e-6, format!("max element difference {diff:.2e}"))
}

fn three_routes_to_second_state(opts: &CheckOptions) -> Outcome {
    let params = ssh(2.0);
    let pair = MomentumPair::new(0.0, PI / 2.0)?;
    let ext = build_extended(&params, pair, 3)?;
    let s = EmulationSettings::new(80.0, 1600)?.with_rule(QuadratureRule::Trapezoid);
    let (rho1, rho2) = jumptime_states_from_ancilla(&ext, &s)?;

    let model = params.pair_model(pair);
    let quad = QuadratureSpec::new(80.0, 8000, QuadratureRule::Trapezoid)?;
    let psi0 = rho0_vector(&ext.initial_state);
    let rho0 = DensityMatrix::from_pure(&psi0)?;
    let q1 = jumptime_step(&model, &rho0, &quad)?.state;
    let q2 = jumptime_step(&model, &q1, &quad)?.state;
    let d_quad = trace_distance(rho1.matrix(), q1.matrix())?.max(trace_distance(rho2.matrix(), q2.matrix())?);

    let cfg = UnravelConfig::new(400.0, opts.n_traj, opts.seed).stop_after(2);
    let recs = mc_unravel(&model, &psi0, &cfg)?;
    let mc2 = jump_count_average(&recs, 2, false)?;
    let d_mc = trace_distance(rho2.matrix(), mc2.matrix())?;
    verdict(
        d_quad <= 1e-3 && d_mc <= 0.05,
        format!("ancilla vs quadrature {d_quad:.2e}, ancilla vs MC {d_mc:.4}"),
    )
}

/// Branch ⊗ sublattice amplitudes of an extended state whose ancilla is in `|0⟩`.
fn rho0_vector(extended: &[Complex64]) -> Vec<Complex64> {
    let da = extended.len() / 4;
    extended.iter().step_by(da).copied().collect()
}

fn emulated_vs_closed_form(_: &CheckOptions) -> Outcome {
    let s = EmulationSettings::new(300.0, 3000)?;
    let mut worst: f64 = 0.0;
    for w in [0.5, 2.0] {
        let params = ssh(w);
        for (p, q) in [(0.3, 1.1), (2.0, 4.0), (1.0, 1.0)] {
            let emu = kcc_emulated_at(&params, p, q, 3, &s)?;
            worst = worst.max((emu - kcc_closed_form(&params, MomentumPair::new(p, q)?)?).norm());
        }
    }
    verdict(worst <= 1e-2, format!("max |K_emulated - K| = {worst:.2e}"))
}

type CheckFn = fn(&CheckOptions) -> Outcome;

const ITEMS: &[(&str, CheckFn)] = &[
    ("matrix exponential identities", expm_identities),
    ("master equation: amplitude damping", amplitude_damping_decay),
    ("master equation: extended model invariants", extended_invariants),
    ("jump-time map: repeat, trace, dark state", quadrature_map),
    ("trajectories vs master equation", mc_vs_master_equation),
    ("trajectories without decay", mc_smoke_without_decay),
    ("analytic phase equals winding number", analytic_phase_equals_winding),
    ("closed-form propagator vs quadrature", closed_form_vs_quadrature),
    ("ancilla blocks vs full extended model", block_vs_full_route),
    ("ancilla vs quadrature vs trajectories", three_routes_to_second_state),
    ("emulated vs closed-form propagator", emulated_vs_closed_form),
];

/// Run every item; errors inside an item count as failures.
pub fn run_checks(opts: &CheckOptions) -> CheckReport {
    let items = ITEMS
        .iter()
        .map(|(name, f)| {
            let started = Instant::now();
            let (passed, detail) = match f(opts) {
                Ok(v) => v,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckItem {
                name,
                passed,
                detail,
                seconds: started.elapsed().as_secs_f64(),
            }
        })
        .collect();
    CheckReport { items }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_integration_fails_the_invariant_item() {
        let opts = CheckOptions {
            substeps_per_unit: 1,
            ..Default::default()
        };
        let (ok, detail) = extended_invariants(&opts).unwrap();
        assert!(!ok, "{detail}");
    }

    #[test]
    fn default_invariant_item_passes() {
        let (ok, detail) = extended_invariants(&CheckOptions::default()).unwrap();
        assert!(ok, "{detail}");
    }

    #[test]
    fn ancilla_ground_amplitudes() {
        let ext = build_extended(&ssh(0.5), MomentumPair::new(0.0, 1.0).unwrap(), 3).unwrap();
        let v = rho0_vector(&ext.initial_state);
        assert_eq!(v.len(), 4);
        assert!((v[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((v[2].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }
}
