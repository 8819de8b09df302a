//! Lindblad master equation: model definition, effective Hamiltonian,
//! right-hand side, and deterministic fixed-step RK4 integration.
//!
//! Time is measured in units of the reference decay rate (`1/γ`).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, I};

/// Hermiticity tolerance for Hamiltonians.
pub const HAMILTONIAN_HERMITIAN_TOL: f64 = 1e-12;
/// Hermiticity tolerance for states.
pub const STATE_HERMITIAN_TOL: f64 = 1e-10;
/// Trace tolerance for normalized states (and drift per 100 time units).
pub const TRACE_TOL: f64 = 1e-8;
/// Eigenvalues above `-POSITIVITY_TOL` count as non-negative.
pub const POSITIVITY_TOL: f64 = 1e-9;

pub const DEFAULT_SUBSTEPS_PER_UNIT: usize = 100;

/// One dissipation channel: rate `γ_j` and jump operator `L_j`.
#[derive(Debug, Clone)]
pub struct Channel {
    pub rate: f64,
    pub op: ComplexMatrix,
}

impl Channel {
    pub fn new(rate: f64, op: ComplexMatrix) -> Self {
        Self { rate, op }
    }
}

#[derive(Debug, Clone)]
pub struct LindbladModel {
    hamiltonian: ComplexMatrix,
    channels: Vec<Channel>,
}

impl LindbladModel {
    pub fn new(hamiltonian: ComplexMatrix, channels: Vec<Channel>) -> Result<Self> {
        if !hamiltonian.is_square() {
            return Err(Error::Shape("Hamiltonian must be square".into()));
        }
        if !hamiltonian.is_hermitian(HAMILTONIAN_HERMITIAN_TOL) {
            return Err(Error::InvalidArgument(format!(
                "Hamiltonian is not Hermitian (defect {:.3e})",
                hamiltonian.hermiticity_defect()
            )));
        }
        let dim = hamiltonian.rows();
        for (j, ch) in channels.iter().enumerate() {
            if ch.op.dim() != (dim, dim) {
                return Err(Error::Shape(format!(
                    "channel {j} operator is {}x{}, model dimension is {dim}",
                    ch.op.rows(),
                    ch.op.cols()
                )));
            }
            if !(ch.rate.is_finite() && ch.rate >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "channel {j} has invalid rate {}",
                    ch.rate
                )));
            }
        }
        Ok(Self {
            hamiltonian,
            channels,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn liouvillian(&self) -> Liouvillian {
        let heff = build_heff(self);
        Liouvillian {
            heff_dag: heff.adjoint(),
            heff,
            jumps: self
                .channels
                .iter()
                .filter(|ch| ch.rate > 0.0)
                .map(|ch| (ch.rate, ch.op.clone(), ch.op.adjoint()))
                .collect(),
        }
    }
}

/// `H_eff = H − (i/2) Σ_j γ_j L_j† L_j`.
pub fn build_heff(model: &LindbladModel) -> ComplexMatrix {
    let mut heff = model.hamiltonian.clone();
    for ch in &model.channels {
        let ldl = &ch.op.adjoint() * &ch.op;
        heff.axpy(-I * (0.5 * ch.rate), &ldl);
    }
    heff
}

/// Precomputed pieces of the Lindblad generator, written as
/// `ρ̇ = −i H_eff ρ + i ρ H_eff† + Σ γ_j L_j ρ L_j†`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    heff: ComplexMatrix,
    heff_dag: ComplexMatrix,
    jumps: Vec<(f64, ComplexMatrix, ComplexMatrix)>,
}

impl Liouvillian {
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let mut out = self.heff.try_matmul(rho)?.scale(-I);
        out.axpy(I, &rho.try_matmul(&self.heff_dag)?);
        for (rate, l, l_dag) in &self.jumps {
            out.axpy(Complex64::new(*rate, 0.0), &l.try_matmul(rho)?.try_matmul(l_dag)?);
        }
        Ok(out)
    }

    /// One classical RK4 step of size `h`.
    pub fn rk4_step(&self, rho: &ComplexMatrix, h: f64) -> Result<ComplexMatrix> {
        let k1 = self.apply(rho)?;
        let mut tmp = rho.clone();
        tmp.axpy(Complex64::new(0.5 * h, 0.0), &k1);
        let k2 = self.apply(&tmp)?;
        let mut tmp = rho.clone();
        tmp.axpy(Complex64::new(0.5 * h, 0.0), &k2);
        let k3 = self.apply(&tmp)?;
        let mut tmp = rho.clone();
        tmp.axpy(Complex64::new(h, 0.0), &k3);
        let k4 = self.apply(&tmp)?;

        let mut next = rho.clone();
        next.axpy(Complex64::new(h / 6.0, 0.0), &k1);
        next.axpy(Complex64::new(h / 3.0, 0.0), &k2);
        next.axpy(Complex64::new(h / 3.0, 0.0), &k3);
        next.axpy(Complex64::new(h / 6.0, 0.0), &k4);
        Ok(next)
    }
}

/// `dρ/dt` for the model at state `rho`.
pub fn liouvillian_apply(model: &LindbladModel, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho.dim() != (model.dim(), model.dim()) {
        return Err(Error::Shape(format!(
            "state is {}x{}, model dimension is {}",
            rho.rows(),
            rho.cols(),
            model.dim()
        )));
    }
    model.liouvillian().apply(rho)
}

/// Measured invariants of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub trace: f64,
    pub trace_imag: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

impl InvariantReport {
    pub fn measure(m: &ComplexMatrix) -> Result<Self> {
        let tr = m.trace()?;
        Ok(Self {
            trace: tr.re,
            trace_imag: tr.im,
            hermiticity_defect: m.hermiticity_defect(),
            min_eigenvalue: m.hermitian_eigenvalues()?.first().copied().unwrap_or(0.0),
        })
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect <= STATE_HERMITIAN_TOL
    }

    pub fn is_positive(&self) -> bool {
        self.min_eigenvalue >= -POSITIVITY_TOL
    }
}

/// A density matrix, possibly unnormalized (jump-time conditioned states).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    normalized: bool,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity and, when `normalized`, unit trace.
    pub fn new(matrix: ComplexMatrix, normalized: bool) -> Result<Self> {
        let rho = Self { matrix, normalized };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps without validation. Used for intermediate results whose
    /// invariants are checked by the caller.
    pub fn new_unchecked(matrix: ComplexMatrix, normalized: bool) -> Self {
        Self { matrix, normalized }
    }

    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        Self::new(ComplexMatrix::projector(psi), true)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
            normalized: true,
        }
    }

    pub fn validate(&self) -> Result<InvariantReport> {
        if !self.matrix.is_square() {
            return Err(Error::Shape("density matrix must be square".into()));
        }
        let report = InvariantReport::measure(&self.matrix)?;
        if !report.is_hermitian() {
            return Err(Error::Invariant(format!(
                "state not Hermitian (defect {:.3e})",
                report.hermiticity_defect
            )));
        }
        if !report.is_positive() {
            return Err(Error::Invariant(format!(
                "state not positive (min eigenvalue {:.3e})",
                report.min_eigenvalue
            )));
        }
        if self.normalized && (report.trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::Invariant(format!(
                "normalized state has trace {:.12}",
                report.trace
            )));
        }
        Ok(report)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().map(|t| t.re).unwrap_or(f64::NAN)
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().map(|t| t.re).unwrap_or(f64::NAN)
    }

    pub fn population(&self, k: usize) -> f64 {
        self.matrix[(k, k)].re
    }

    /// Copy rescaled to unit trace.
    pub fn normalized_copy(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr.abs() > 0.0) {
            return Err(Error::Invariant("cannot normalize a zero-trace state".into()));
        }
        Ok(Self {
            matrix: self.matrix.scale_real(1.0 / tr),
            normalized: true,
        })
    }
}

/// Integrates the master equation with classical RK4 and returns the state at
/// each requested sample time.
///
/// The step inside each interval between consecutive samples is the largest
/// step not exceeding `1 / substeps_per_unit` that divides the interval evenly.
/// Samples are validated against the trace, Hermiticity and positivity
/// invariants; a violation means the step is too coarse and is returned as
/// [`Error::Invariant`].
pub fn evolve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_final: f64,
    substeps_per_unit: usize,
    sample_times: &[f64],
) -> Result<Vec<(f64, DensityMatrix)>> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_final = {t_final}")));
    }
    if substeps_per_unit == 0 {
        return Err(Error::InvalidArgument("substeps_per_unit must be ≥ 1".into()));
    }
    if rho0.dim() != model.dim() {
        return Err(Error::Shape(format!(
            "state dimension {} vs model dimension {}",
            rho0.dim(),
            model.dim()
        )));
    }
    let mut times: Vec<f64> = if sample_times.is_empty() {
        vec![t_final]
    } else {
        sample_times.to_vec()
    };
    if times.iter().any(|&t| !(0.0..=t_final).contains(&t)) {
        return Err(Error::InvalidArgument(
            "sample times must lie in [0, t_final]".into(),
        ));
    }
    times.sort_by(|a, b| a.total_cmp(b));

    let liouv = model.liouvillian();
    let trace0 = rho0.trace();
    let max_h = 1.0 / substeps_per_unit as f64;
    let mut t = 0.0;
    let mut rho = rho0.matrix().clone();
    let mut out = Vec::with_capacity(times.len());
    for &ts in &times {
        let span = ts - t;
        if span > 0.0 {
            let steps = (span / max_h).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                rho = liouv.rk4_step(&rho, h)?;
            }
            t = ts;
        }
        let report = check_sample(&rho, trace0, t)?;
        log::trace!("t = {t:.4}: {report:?}");
        out.push((t, DensityMatrix::new_unchecked(rho.clone(), rho0.is_normalized())));
    }
    Ok(out)
}

fn check_sample(rho: &ComplexMatrix, trace0: f64, t: f64) -> Result<InvariantReport> {
    if !rho.is_finite() {
        return Err(Error::Invariant(format!("state diverged at t = {t}")));
    }
    let report = InvariantReport::measure(rho)?;
    let trace_tol = TRACE_TOL * (t / 100.0).max(1.0);
    if (report.trace - trace0).abs() > trace_tol || report.trace_imag.abs() > trace_tol {
        return Err(Error::Invariant(format!(
            "trace drifted to {:.12} (from {trace0:.12}) at t = {t}",
            report.trace
        )));
    }
    if !report.is_hermitian() {
        return Err(Error::Invariant(format!(
            "Hermiticity defect {:.3e} at t = {t}",
            report.hermiticity_defect
        )));
    }
    if !report.is_positive() {
        return Err(Error::Invariant(format!(
            "negative eigenvalue {:.3e} at t = {t}",
            report.min_eigenvalue
        )));
    }
    Ok(report)
}

/// Amplitude damping of a single two-level system, `L = σ₋`, `H = 0`.
pub fn amplitude_damping(rate: f64) -> Result<LindbladModel> {
    LindbladModel::new(
        ComplexMatrix::zeros(2, 2),
        vec![Channel::new(rate, crate::matrix::pauli::sigma_minus())],
    )
}
