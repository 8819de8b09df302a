//! Ancilla-extended two-momentum model.
//!
//! The Hilbert space is branch ⊗ sublattice ⊗ ancilla with branch `|0⟩ ≡ p`
//! and `|1⟩ ≡ p′`. The single channel `1₂ ⊗ σ_− ⊗ C_+` raises the ancilla on
//! every jump, so after a wall-time evolution the ancilla level `m` holds the
//! part of the state that has jumped exactly `m` times. Integrating those
//! blocks over time and applying the system jump once more gives the
//! jump-count-conditioned states without ever monitoring a trajectory.
//!
//! Because the channel only raises the ancilla and the initial ancilla state
//! is `|0⟩`, blocks with different ancilla levels stay zero forever. Each
//! branch pair `(a, b)` therefore evolves as `d_a` coupled 2×2 sublattice
//! blocks `X_m^{ab}`, which is what [`BlockEvolution`] integrates. The full
//! `4·d_a`-dimensional master equation is kept as a cross-check route in
//! [`jumptime_states_full_model`].

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jumptime::QuadratureRule;
use crate::lindblad::{evolve, Channel, DensityMatrix, LindbladModel};
use crate::matrix::pauli::sigma_minus;
use crate::matrix::{ComplexMatrix, I, ONE, ZERO};
use crate::ssh::{jumptime_phase, BlochParams, MomentumPair, PhaseOptions};
use crate::sweep::{Method, PhaseResult, PhaseRow, SweepConfig};

pub const DEFAULT_GRID_SUBSTEPS: usize = 10;
/// RK4 density for full extended-model evolutions. Pure initial states sit on
/// the positivity boundary, and at 100 substeps per unit the truncation error
/// alone pushes eigenvalues below the positivity tolerance for `w ≳ 2`.
pub const EXTENDED_SUBSTEPS_PER_UNIT: usize = 400;
pub const MAX_GRID_SUBSTEPS: usize = 1280;
/// Weight left in a projected block at `t_final` above which the time
/// integral is reported as truncated.
pub const ANCILLA_TAIL_WARN: f64 = 1e-4;
pub const DEGENERATE_TOL: f64 = 1e-12;

const BLOCK_TRACE_TOL: f64 = 1e-8;
const BLOCK_POSITIVITY_TOL: f64 = 1e-9;
const BLOCK_HERMITIAN_TOL: f64 = 1e-10;

/// Ancilla raising operator `C_+` truncated at `dim` levels.
pub fn ancilla_raise(dim: usize) -> ComplexMatrix {
    let mut c = ComplexMatrix::zeros(dim, dim);
    for n in 0..dim.saturating_sub(1) {
        c[(n + 1, n)] = ONE;
    }
    c
}

fn check_ancilla_dim(ancilla_dim: usize) -> Result<()> {
    if ancilla_dim == 2 || ancilla_dim == 3 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "ancilla dimension must be 2 or 3, got {ancilla_dim}"
        )))
    }
}

#[derive(Debug, Clone)]
pub struct ExtendedModel {
    pub params: BlochParams,
    pub pair: MomentumPair,
    pub ancilla_dim: usize,
    pub model: LindbladModel,
    pub initial_state: Vec<Complex64>,
}

/// Assemble the extended model for `(p, p′)`.
pub fn build_extended(params: &BlochParams, pair: MomentumPair, ancilla_dim: usize) -> Result<ExtendedModel> {
    check_ancilla_dim(ancilla_dim)?;
    let id_a = ComplexMatrix::identity(ancilla_dim);
    let h = &ComplexMatrix::basis_projector(2, 0).kron(&params.hamiltonian(pair.p).kron(&id_a))
        + &ComplexMatrix::basis_projector(2, 1).kron(&params.hamiltonian(pair.p_prime).kron(&id_a));
    let l = ComplexMatrix::identity(2).kron(&sigma_minus().kron(&ancilla_raise(ancilla_dim)));
    let model = LindbladModel::new(h, vec![Channel::new(params.gamma, l)])?;
    let dim = 4 * ancilla_dim;
    let mut initial_state = vec![ZERO; dim];
    // (|0⟩ + |1⟩)/√2 on the branch, sublattice |0⟩, ancilla |0⟩
    initial_state[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    initial_state[2 * ancilla_dim] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    Ok(ExtendedModel {
        params: *params,
        pair,
        ancilla_dim,
        model,
        initial_state,
    })
}

impl ExtendedModel {
    pub fn dim(&self) -> usize {
        4 * self.ancilla_dim
    }

    pub fn initial_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(&self.initial_state).expect("initial state is normalized")
    }

    /// Wall-time evolution of the full extended model on the grid
    /// `kΔt`, `k = 0..=n_final`.
    pub fn evolve_grid(&self, t_final: f64, n_final: usize, substeps_per_unit: usize) -> Result<Vec<(f64, DensityMatrix)>> {
        let dt = t_final / n_final as f64;
        let times: Vec<f64> = (0..=n_final).map(|k| k as f64 * dt).collect();
        evolve(&self.model, &self.initial_density(), t_final, substeps_per_unit, &times)
    }
}

/// System jump operator `1₂ ⊗ σ_−` acting on branch ⊗ sublattice.
pub fn system_jump() -> ComplexMatrix {
    ComplexMatrix::identity(2).kron(&sigma_minus())
}

/// System block `⟨m|ρ̃|m⟩_a` (4×4, branch ⊗ sublattice). The ancilla
/// dimension is inferred as `dim / 4`.
pub fn ancilla_project(rho_tilde: &DensityMatrix, m: usize) -> Result<ComplexMatrix> {
    let dim = rho_tilde.dim();
    if !dim.is_multiple_of(4) || dim == 0 {
        return Err(Error::Shape(format!("dimension {dim} is not 4 × ancilla levels")));
    }
    let da = dim / 4;
    if m >= da {
        return Err(Error::InvalidArgument(format!("ancilla level {m} out of range 0..{da}")));
    }
    let full = rho_tilde.matrix();
    let mut block = ComplexMatrix::zeros(4, 4);
    for r in 0..4 {
        for c in 0..4 {
            block[(r, c)] = full[(r * da + m, c * da + m)];
        }
    }
    Ok(block)
}

/// Discretization of the wall-time integrals over the measurement grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmulationSettings {
    pub t_final: f64,
    pub n_final: usize,
    /// `LeftRiemann` sums `k = 1..=n_final` with weight `Δt`; `Trapezoid`
    /// sums `k = 0..=n_final` with half weights at both ends.
    pub rule: QuadratureRule,
    /// Initial RK4 substeps per grid interval; doubled until the block
    /// invariants hold.
    pub substeps: usize,
}

impl EmulationSettings {
    pub fn new(t_final: f64, n_final: usize) -> Result<Self> {
        let s = Self {
            t_final,
            n_final,
            rule: QuadratureRule::LeftRiemann,
            substeps: DEFAULT_GRID_SUBSTEPS,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_rule(mut self, rule: QuadratureRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) || self.n_final == 0 || self.substeps == 0 {
            return Err(Error::InvalidArgument(format!(
                "need t_final > 0, n_final ≥ 1, substeps ≥ 1 (got {}, {}, {})",
                self.t_final, self.n_final, self.substeps
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_final as f64
    }

    fn weights(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.n_final;
        let rule = self.rule;
        (0..=n).filter_map(move |k| match rule {
            QuadratureRule::LeftRiemann if k == 0 => None,
            QuadratureRule::LeftRiemann => Some((k, 1.0)),
            QuadratureRule::Trapezoid if k == 0 || k == n => Some((k, 0.5)),
            QuadratureRule::Trapezoid => Some((k, 1.0)),
        })
    }
}

/// Generator of the ancilla-diagonal blocks `X_m^{ab}` for one branch pair.
/// State layout: `x[4m + 2r + c] = X_m[r, c]`, sublattice indices `r, c`.
fn block_generator(params: &BlochParams, p_a: f64, p_b: f64, ancilla_dim: usize) -> ComplexMatrix {
    let n = 4 * ancilla_dim;
    let id2 = ComplexMatrix::identity(2);
    let excited = ComplexMatrix::basis_projector(2, 1);
    let sm = sigma_minus();
    let feed = sm.kron(&sm).scale_real(params.gamma);
    let h_a = params.hamiltonian(p_a);
    let h_b = params.hamiltonian(p_b);
    let mut g = ComplexMatrix::zeros(n, n);
    for m in 0..ancilla_dim {
        // the top level is not raised further, so it does not decay
        let decay = if m + 1 < ancilla_dim { params.gamma } else { 0.0 };
        let left = &h_a.scale(-I) - &excited.scale_real(0.5 * decay);
        let right_t = (&h_b.scale(I) - &excited.scale_real(0.5 * decay)).transpose();
        let blk = &left.kron(&id2) + &id2.kron(&right_t);
        for r in 0..4 {
            for c in 0..4 {
                g[(4 * m + r, 4 * m + c)] += blk[(r, c)];
                if m > 0 {
                    g[(4 * m + r, 4 * (m - 1) + c)] += feed[(r, c)];
                }
            }
        }
    }
    g
}

/// RK4 step map of a linear ODE `ẋ = Gx`: `Σ_{j≤4} (hG)^j / j!`.
fn rk4_step_map(g: &ComplexMatrix, h: f64) -> ComplexMatrix {
    let hg = g.scale_real(h);
    let mut term = ComplexMatrix::identity(g.rows());
    let mut step = term.clone();
    for j in 1..=4 {
        term = (&term * &hg).scale_real(1.0 / j as f64);
        step = &step + &term;
    }
    step
}

/// Blocks of one branch pair sampled on the measurement grid `k = 0..=n_final`.
#[derive(Debug, Clone)]
pub struct BlockEvolution {
    pub ancilla_dim: usize,
    pub samples: Vec<Vec<Complex64>>,
    pub substeps: usize,
}

impl BlockEvolution {
    fn run(params: &BlochParams, p_a: f64, p_b: f64, ancilla_dim: usize, s: &EmulationSettings, substeps: usize) -> Self {
        let g = block_generator(params, p_a, p_b, ancilla_dim);
        let step = rk4_step_map(&g, s.dt() / substeps as f64);
        let mut grid = step.clone();
        for _ in 1..substeps {
            grid = &grid * &step;
        }
        let mut x = vec![ZERO; 4 * ancilla_dim];
        x[0] = Complex64::new(0.5, 0.0);
        let mut samples = Vec::with_capacity(s.n_final + 1);
        samples.push(x.clone());
        for _ in 0..s.n_final {
            x = grid.matvec(&x).expect("generator matches state size");
            samples.push(x.clone());
        }
        Self {
            ancilla_dim,
            samples,
            substeps,
        }
    }

    pub fn entry(&self, k: usize, m: usize, r: usize, c: usize) -> Complex64 {
        self.samples[k][4 * m + 2 * r + c]
    }

    pub fn block_trace(&self, k: usize, m: usize) -> f64 {
        (self.entry(k, m, 0, 0) + self.entry(k, m, 1, 1)).re
    }

    /// Invariants of a branch-diagonal evolution: block Hermiticity and
    /// positivity, total weight ½ conserved, level-0 weight non-increasing.
    fn check_diagonal(&self, t_final: f64) -> std::result::Result<(), String> {
        let trace_tol = BLOCK_TRACE_TOL * (t_final / 100.0).max(1.0);
        let mut prev_ground = f64::INFINITY;
        for (k, x) in self.samples.iter().enumerate() {
            if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(format!("non-finite block at grid point {k}"));
            }
            let mut total = 0.0;
            for m in 0..self.ancilla_dim {
                let (a, b, b2, d) = (
                    self.entry(k, m, 0, 0),
                    self.entry(k, m, 0, 1),
                    self.entry(k, m, 1, 0),
                    self.entry(k, m, 1, 1),
                );
                let herm = (b - b2.conj()).norm().max(a.im.abs()).max(d.im.abs());
                if herm > BLOCK_HERMITIAN_TOL {
                    return Err(format!("block {m} not Hermitian ({herm:.2e}) at grid point {k}"));
                }
                let mid = 0.5 * (a.re + d.re);
                let min_eig = mid - ((0.5 * (a.re - d.re)).powi(2) + b.norm_sqr()).sqrt();
                if min_eig < -BLOCK_POSITIVITY_TOL {
                    return Err(format!("block {m} has eigenvalue {min_eig:.2e} at grid point {k}"));
                }
                total += a.re + d.re;
            }
            if (total - 0.5).abs() > trace_tol {
                return Err(format!("block weight {total} ≠ 1/2 at grid point {k}"));
            }
            let ground = self.block_trace(k, 0);
            if ground > prev_ground + BLOCK_POSITIVITY_TOL {
                return Err(format!("level-0 weight increased at grid point {k}"));
            }
            prev_ground = ground;
        }
        Ok(())
    }

    /// `Σ_k w_k X_m[1,1](kΔt)`, the excited-sublattice element the system
    /// jump maps onto the ground sublattice.
    fn integrated_excited(&self, m: usize, s: &EmulationSettings) -> Complex64 {
        s.weights().map(|(k, w)| self.entry(k, m, 1, 1) * w).sum()
    }
}

/// Smallest substep count (doubling from `s.substeps`) for which both
/// branch-diagonal block evolutions pass their invariants.
fn stable_diagonals(params: &BlochParams, pair: MomentumPair, ancilla_dim: usize, s: &EmulationSettings) -> Result<(BlockEvolution, BlockEvolution)> {
    let mut substeps = s.substeps;
    loop {
        let aa = BlockEvolution::run(params, pair.p, pair.p, ancilla_dim, s, substeps);
        let bb = BlockEvolution::run(params, pair.p_prime, pair.p_prime, ancilla_dim, s, substeps);
        match aa.check_diagonal(s.t_final).and(bb.check_diagonal(s.t_final)) {
            Ok(()) => return Ok((aa, bb)),
            Err(msg) if substeps * 2 <= MAX_GRID_SUBSTEPS => {
                log::info!("refining grid substeps {substeps} → {}: {msg}", substeps * 2);
                substeps *= 2;
            }
            Err(msg) => {
                return Err(Error::Invariant(format!(
                    "block evolution still unstable at {substeps} substeps: {msg}"
                )))
            }
        }
    }
}

fn warn_tail(diag: &BlockEvolution, m: usize, s: &EmulationSettings) {
    // each branch starts with weight ½
    let tail = 2.0 * diag.block_trace(s.n_final, m);
    if tail > ANCILLA_TAIL_WARN {
        log::warn!(
            "ancilla level {m} still holds weight {tail:.3e} at t_final = {}: time integral truncated",
            s.t_final
        );
    }
}

/// `(ρ_1, ρ_2)` on branch ⊗ sublattice from the ancilla blocks,
/// `ρ_{m+1} = γ Σ_k w_k Δt L ⟨m|ρ̃_{kΔt}|m⟩ L†` with `L = 1₂ ⊗ σ_−`.
pub fn jumptime_states_from_ancilla(ext: &ExtendedModel, s: &EmulationSettings) -> Result<(DensityMatrix, DensityMatrix)> {
    s.validate()?;
    let prm = &ext.params;
    let (aa, bb) = stable_diagonals(prm, ext.pair, ext.ancilla_dim, s)?;
    let ab = BlockEvolution::run(prm, ext.pair.p, ext.pair.p_prime, ext.ancilla_dim, s, aa.substeps.max(bb.substeps));
    let scale = prm.gamma * s.dt();
    let state = |m: usize| -> Result<DensityMatrix> {
        warn_tail(&aa, m, s);
        warn_tail(&bb, m, s);
        let mut rho = ComplexMatrix::zeros(4, 4);
        rho[(0, 0)] = aa.integrated_excited(m, s) * scale;
        rho[(2, 2)] = bb.integrated_excited(m, s) * scale;
        let coh = ab.integrated_excited(m, s) * scale;
        rho[(0, 2)] = coh;
        rho[(2, 0)] = coh.conj();
        let dm = DensityMatrix::new(rho, false)?;
        Ok(dm)
    };
    Ok((state(0)?, state(1)?))
}

/// Same states as [`jumptime_states_from_ancilla`], computed by evolving the
/// full extended density matrix and projecting each grid sample.
pub fn jumptime_states_full_model(ext: &ExtendedModel, s: &EmulationSettings, substeps_per_unit: usize) -> Result<(DensityMatrix, DensityMatrix)> {
    s.validate()?;
    let samples = ext.evolve_grid(s.t_final, s.n_final, substeps_per_unit)?;
    let l = system_jump();
    let l_dag = l.adjoint();
    let scale = ext.params.gamma * s.dt();
    let mut out = Vec::with_capacity(2);
    for m in 0..2 {
        let mut acc = ComplexMatrix::zeros(4, 4);
        for (k, w) in s.weights() {
            acc.axpy(Complex64::new(w, 0.0), &ancilla_project(&samples[k].1, m)?);
        }
        let rho = l.try_matmul(&acc)?.try_matmul(&l_dag)?.scale_real(scale);
        out.push(DensityMatrix::new(rho, false)?);
    }
    let rho2 = out.pop().expect("two states");
    let rho1 = out.pop().expect("two states");
    Ok((rho1, rho2))
}

/// Propagator from the coherence element `⟨p,1|·|p′,1⟩` of the level-1 and
/// level-0 ancilla blocks, integrated over the grid; `γ`, `Δt` and the
/// system jump cancel in the ratio.
pub fn kcc_emulated_at(params: &BlochParams, p: f64, p_prime: f64, ancilla_dim: usize, s: &EmulationSettings) -> Result<Complex64> {
    check_ancilla_dim(ancilla_dim)?;
    s.validate()?;
    let pair = MomentumPair { p, p_prime };
    let (aa, bb) = stable_diagonals(params, pair, ancilla_dim, s)?;
    let ab = BlockEvolution::run(params, p, p_prime, ancilla_dim, s, aa.substeps.max(bb.substeps));
    let den = ab.integrated_excited(0, s);
    if (den * params.gamma * s.dt()).norm() < DEGENERATE_TOL {
        return Err(Error::Singular(format!(
            "vanishing level-0 coherence at (p, p′) = ({p}, {p_prime})"
        )));
    }
    Ok(ab.integrated_excited(1, s) / den)
}

pub fn kcc_emulated(ext: &ExtendedModel, s: &EmulationSettings) -> Result<Complex64> {
    kcc_emulated_at(&ext.params, ext.pair.p, ext.pair.p_prime, ext.ancilla_dim, s)
}

/// Order parameter `T(w)` over `w_grid` with everything else taken from
/// `config`. Grid points on the gap-closing locus are skipped unless
/// `config.include_singular` is set.
pub fn phase_sweep(w_grid: &[f64], config: &SweepConfig) -> Result<PhaseResult> {
    let mut cfg = config.clone();
    cfg.w_grid = w_grid.to_vec();
    cfg.validate()?;
    let started = std::time::Instant::now();
    let emu = cfg.emulation_settings()?;
    let opts = PhaseOptions {
        delta_q: cfg.delta_q,
        corrected_sum: cfg.corrected_sum,
    };

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &w in w_grid {
        let params = BlochParams::new(cfg.v, w, cfg.gamma)?;
        if params.is_singular() {
            if cfg.include_singular {
                log::warn!("including singular point w = {w}");
            } else {
                log::info!("skipping singular point w = {w}");
                skipped.push(w);
                continue;
            }
        }
        points.push(params);
    }

    let rows: Vec<PhaseRow> = points
        .par_iter()
        .map(|params| {
            let t = match cfg.method {
                Method::Analytic => jumptime_phase(
                    |p, q| crate::ssh::kcc_closed_form_at(params, p, q),
                    cfg.n_cir,
                    cfg.delta_p,
                    opts,
                )?,
                Method::Emulated => jumptime_phase(
                    |p, q| kcc_emulated_at(params, p, q, cfg.ancilla_dim, &emu),
                    cfg.n_cir,
                    cfg.delta_p,
                    opts,
                )?,
            };
            log::debug!("w = {}: T = {t}", params.w);
            Ok(PhaseRow {
                w: params.w,
                t_re: t.re,
                t_im: t.im,
            })
        })
        .collect::<Result<_>>()?;

    Ok(PhaseResult {
        rows,
        skipped,
        settings: cfg,
        duration_secs: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jumptime::{jumptime_step, QuadratureSpec};
    use crate::matrix::trace_distance;
    use crate::ssh::kcc_closed_form;
    use std::f64::consts::PI;

    fn prm(w: f64) -> BlochParams {
        BlochParams::new(1.0, w, 1.0).unwrap()
    }

    fn pair(p: f64, q: f64) -> MomentumPair {
        MomentumPair::new(p, q).unwrap()
    }

    #[test]
    fn raise_operator_truncates() {
        let c = ancilla_raise(3);
        assert_eq!(c[(1, 0)], ONE);
        assert_eq!(c[(2, 1)], ONE);
        assert_eq!(c.matvec(&[ZERO, ZERO, ONE]).unwrap(), vec![ZERO; 3]);
    }

    #[test]
    fn extended_model_shape_and_structure() {
        let ext = build_extended(&prm(0.5), pair(0.3, 1.2), 3).unwrap();
        assert_eq!(ext.model.dim(), 12);
        assert_eq!(build_extended(&prm(0.5), pair(0.3, 1.2), 2).unwrap().model.dim(), 8);
        assert!(build_extended(&prm(0.5), pair(0.3, 1.2), 4).is_err());
        let rho0 = ext.initial_density();
        let blk0 = ancilla_project(&rho0, 0).unwrap();
        let sys = ComplexMatrix::projector(&[
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            ZERO,
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            ZERO,
        ]);
        assert!(blk0.max_abs_diff(&sys) < 1e-15);
        assert_eq!(ancilla_project(&rho0, 1).unwrap().max_abs(), 0.0);
        assert!(ancilla_project(&rho0, 3).is_err());
    }

    #[test]
    fn hamiltonian_is_branch_diagonal() {
        let p = prm(0.7);
        let ext = build_extended(&p, pair(0.3, 1.2), 3).unwrap();
        let h = ext.model.hamiltonian();
        let expect = &ComplexMatrix::basis_projector(2, 0).kron(&p.hamiltonian(0.3).kron(&ComplexMatrix::identity(3)))
            + &ComplexMatrix::basis_projector(2, 1).kron(&p.hamiltonian(1.2).kron(&ComplexMatrix::identity(3)));
        assert!(h.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn dark_pair_never_leaves_the_ground_ancilla() {
        let ext = build_extended(&prm(1.0), pair(PI, PI), 3).unwrap();
        for (_, rho) in ext.evolve_grid(30.0, 30, 100).unwrap() {
            assert!((ancilla_project(&rho, 0).unwrap().trace().unwrap().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ancilla_weights_sum_to_one_and_ground_decays() {
        let ext = build_extended(&prm(2.0), pair(0.4, 2.2), 3).unwrap();
        let mut prev = f64::INFINITY;
        for (_, rho) in ext.evolve_grid(40.0, 80, 400).unwrap() {
            let traces: Vec<f64> = (0..3).map(|m| ancilla_project(&rho, m).unwrap().trace().unwrap().re).collect();
            assert!((traces.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            assert!(traces[0] <= prev + 1e-12);
            prev = traces[0];
        }
    }

    #[test]
    fn block_route_matches_full_model() {
        let s = EmulationSettings::new(30.0, 60).unwrap();
        for (w, p, q) in [(0.5, 0.0, PI / 2.0), (2.0, 0.7, 2.9)] {
            let ext = build_extended(&prm(w), pair(p, q), 3).unwrap();
            let (a1, a2) = jumptime_states_from_ancilla(&ext, &s).unwrap();
            let (f1, f2) = jumptime_states_full_model(&ext, &s, 400).unwrap();
            assert!(a1.matrix().max_abs_diff(f1.matrix()) < 1e-6);
            assert!(a2.matrix().max_abs_diff(f2.matrix()) < 1e-6);
        }
    }

    #[test]
    fn first_jump_is_certain_without_dark_component() {
        let ext = build_extended(&prm(0.5), pair(0.0, 0.0), 3).unwrap();
        let (rho1, _) = jumptime_states_from_ancilla(&ext, &EmulationSettings::new(50.0, 200).unwrap()).unwrap();
        assert!((rho1.trace() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn dark_pair_gives_no_jump() {
        let ext = build_extended(&prm(1.0), pair(PI, PI), 3).unwrap();
        let (rho1, rho2) = jumptime_states_from_ancilla(&ext, &EmulationSettings::new(20.0, 40).unwrap()).unwrap();
        assert!(rho1.matrix().max_abs() < 1e-12);
        assert!(rho2.matrix().max_abs() < 1e-12);
    }

    #[test]
    fn jump_states_live_on_the_ground_sublattice() {
        let ext = build_extended(&prm(2.0), pair(0.2, 1.0), 3).unwrap();
        let (rho1, rho2) = jumptime_states_from_ancilla(&ext, &EmulationSettings::new(40.0, 100).unwrap()).unwrap();
        for rho in [rho1, rho2] {
            for r in 0..4 {
                for c in 0..4 {
                    if r % 2 == 1 || c % 2 == 1 {
                        assert_eq!(rho.matrix()[(r, c)], ZERO);
                    }
                }
            }
        }
    }

    #[test]
    fn second_state_matches_quadrature_map() {
        let params = prm(0.5);
        let pr = pair(0.0, PI / 2.0);
        let ext = build_extended(&params, pr, 3).unwrap();
        let s = EmulationSettings::new(80.0, 1600).unwrap().with_rule(QuadratureRule::Trapezoid);
        let (rho1, rho2) = jumptime_states_from_ancilla(&ext, &s).unwrap();
        let model = params.pair_model(pr);
        let quad = QuadratureSpec::new(80.0, 8000, QuadratureRule::Trapezoid).unwrap();
        let next = jumptime_step(&model, &rho1, &quad).unwrap().state;
        assert!(trace_distance(next.matrix(), rho2.matrix()).unwrap() < 1e-3);
    }

    #[test]
    fn emulated_diagonal_is_one() {
        let s = EmulationSettings::new(300.0, 300).unwrap();
        for p in [0.0, 1.0, 2.5] {
            let k = kcc_emulated_at(&prm(0.5), p, p, 3, &s).unwrap();
            assert!((k - ONE).norm() <= 2e-2, "p={p}: {k}");
        }
    }

    #[test]
    fn emulated_matches_closed_form_on_a_resolved_grid() {
        let s = EmulationSettings::new(300.0, 3000).unwrap();
        for w in [0.5, 2.0] {
            for p in [0.3, 2.0] {
                for q in [1.1, 4.0] {
                    let emu = kcc_emulated_at(&prm(w), p, q, 3, &s).unwrap();
                    let exact = kcc_closed_form(&prm(w), pair(p, q)).unwrap();
                    assert!((emu - exact).norm() <= 1e-2, "w={w} p={p} q={q}: {emu} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn unit_grid_spacing_aliases_fast_oscillations() {
        // Δt = 1 undersamples the 2|h| ≈ 5 oscillation at w = 2
        let s = EmulationSettings::new(300.0, 300).unwrap();
        let emu = kcc_emulated_at(&prm(2.0), 0.3, 1.1, 3, &s).unwrap();
        let exact = kcc_closed_form(&prm(2.0), pair(0.3, 1.1)).unwrap();
        assert!((emu - exact).norm() > 0.1);
    }

    #[test]
    fn emulated_ratio_is_stable_under_grid_refinement() {
        let coarse = EmulationSettings::new(300.0, 1500).unwrap();
        let fine = EmulationSettings::new(300.0, 3000).unwrap();
        for w in [0.5, 2.0] {
            let a = kcc_emulated_at(&prm(w), 0.5, 1.7, 3, &coarse).unwrap();
            let b = kcc_emulated_at(&prm(w), 0.5, 1.7, 3, &fine).unwrap();
            assert!((a - b).norm() <= 1e-2);
        }
    }

    #[test]
    fn dark_pair_is_degenerate() {
        let s = EmulationSettings::new(20.0, 20).unwrap();
        assert!(matches!(kcc_emulated_at(&prm(1.0), PI, PI, 3, &s), Err(Error::Singular(_))));
    }

    #[test]
    fn settings_validation() {
        assert!(EmulationSettings::new(0.0, 10).is_err());
        assert!(EmulationSettings::new(10.0, 0).is_err());
    }
}
