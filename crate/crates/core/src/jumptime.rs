//! Quantum-trajectory machinery and the jump-time evolution map.
//!
//! Two independent routes to jump-count-conditioned states live here:
//!
//! * [`jumptime_step`] integrates `ρ_{n+1} = ∫₀^∞ ds Σ_j γ_j J_j U_s ρ_n`
//!   directly by quadrature, with `U_s ρ = e^{−iH_eff s} ρ e^{iH_eff† s}`
//!   and `J_j ρ = L_j ρ L_j†`.
//! * [`mc_unravel`] samples Monte-Carlo wave-function trajectories with the
//!   waiting-time algorithm and records the state right after each jump, so
//!   [`jump_count_average`] can average them at a fixed jump count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{build_heff, DensityMatrix, LindbladModel};
use crate::matrix::{normalize, vec_norm_sqr, ComplexMatrix, I, ONE};

/// Conditioned trace above which a quadrature is considered truncated.
pub const TAIL_WARN: f64 = 1e-6;
/// Target conditioned trace when choosing `s_max` automatically.
pub const TAIL_TARGET: f64 = 1e-8;
pub const DEFAULT_QUAD_POINTS: usize = 2000;
pub const DEFAULT_MAX_CAPTURED_JUMPS: usize = 4;
pub const DEFAULT_MC_DT: f64 = 0.01;

/// `U_s ρ = e^{−iH_eff s} ρ e^{+iH_eff† s}`.
pub fn conditioned_propagate(heff: &ComplexMatrix, s: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if s < 0.0 {
        return Err(Error::InvalidArgument(format!("negative propagation time {s}")));
    }
    let u = heff.scale(-I * s).expm()?;
    u.try_matmul(rho)?.try_matmul(&u.adjoint())
}

/// `J ρ = L ρ L†`.
pub fn jump_apply(l: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    l.try_matmul(rho)?.try_matmul(&l.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    LeftRiemann,
    Trapezoid,
}

/// Discretization of the `∫₀^∞ ds` in the jump-time map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub s_max: f64,
    pub n_points: usize,
    pub rule: QuadratureRule,
}

impl QuadratureSpec {
    pub fn new(s_max: f64, n_points: usize, rule: QuadratureRule) -> Result<Self> {
        if !(s_max > 0.0 && s_max.is_finite()) || n_points < 2 {
            return Err(Error::InvalidArgument(format!(
                "quadrature needs s_max > 0 and n_points ≥ 2 (got {s_max}, {n_points})"
            )));
        }
        Ok(Self { s_max, n_points, rule })
    }

    /// Trapezoid with `DEFAULT_QUAD_POINTS` nodes and `s_max` doubled from 8
    /// until the conditioned trace of `rho` falls below `TAIL_TARGET`
    /// (capped at 512 when a dark component keeps it from decaying).
    pub fn auto(model: &LindbladModel, rho: &ComplexMatrix) -> Result<Self> {
        let heff = build_heff(model);
        let trace0 = rho.trace()?.re.abs().max(f64::MIN_POSITIVE);
        let mut s_max = 8.0;
        while s_max < 512.0 {
            let tail = conditioned_propagate(&heff, s_max, rho)?.trace()?.re;
            if tail <= TAIL_TARGET * trace0.max(1.0) {
                break;
            }
            s_max *= 2.0;
        }
        Self::new(s_max, DEFAULT_QUAD_POINTS, QuadratureRule::Trapezoid)
    }
}

/// Output of one application of the jump-time map.
#[derive(Debug, Clone)]
pub struct JumpStep {
    /// `ρ_{n+1}`, unnormalized.
    pub state: DensityMatrix,
    /// `tr U_{s_max} ρ_n`: weight the quadrature did not reach.
    pub tail_mass: f64,
}

/// One step of the jump-time evolution, `ρ_n ↦ ρ_{n+1}`.
///
/// Trace-preserving when `rho_n` has no dark component; dark states are
/// mapped to zero.
pub fn jumptime_step(model: &LindbladModel, rho_n: &DensityMatrix, quad: &QuadratureSpec) -> Result<JumpStep> {
    if rho_n.dim() != model.dim() {
        return Err(Error::Shape(format!(
            "state dimension {} vs model dimension {}",
            rho_n.dim(),
            model.dim()
        )));
    }
    let heff = build_heff(model);
    let h = quad.s_max / (quad.n_points - 1) as f64;
    let u = heff.scale(-I * h).expm()?;
    let u_dag = u.adjoint();
    let jumps: Vec<(f64, &ComplexMatrix, ComplexMatrix)> = model
        .channels()
        .iter()
        .filter(|ch| ch.rate > 0.0)
        .map(|ch| (ch.rate, &ch.op, ch.op.adjoint()))
        .collect();
    let integrand = |x: &ComplexMatrix| -> Result<ComplexMatrix> {
        let mut acc = ComplexMatrix::zeros(x.rows(), x.cols());
        for (rate, l, l_dag) in &jumps {
            acc.axpy(Complex64::new(*rate, 0.0), &l.try_matmul(x)?.try_matmul(l_dag)?);
        }
        Ok(acc)
    };

    let last = quad.n_points - 1;
    let mut x = rho_n.matrix().clone();
    let mut total = ComplexMatrix::zeros(x.rows(), x.cols());
    for k in 0..quad.n_points {
        let weight = match quad.rule {
            QuadratureRule::Trapezoid if k == 0 || k == last => 0.5 * h,
            QuadratureRule::Trapezoid => h,
            QuadratureRule::LeftRiemann if k == last => 0.0,
            QuadratureRule::LeftRiemann => h,
        };
        if weight > 0.0 {
            total.axpy(Complex64::new(weight, 0.0), &integrand(&x)?);
        }
        if k < last {
            x = u.try_matmul(&x)?.try_matmul(&u_dag)?;
        }
    }
    let tail_mass = x.trace()?.re;
    if tail_mass > TAIL_WARN {
        log::warn!(
            "jump-time quadrature truncated: tr U(s_max) ρ = {tail_mass:.3e} at s_max = {}",
            quad.s_max
        );
    }
    Ok(JumpStep {
        state: DensityMatrix::new_unchecked(total, false),
        tail_mass,
    })
}

/// True iff `ψ` is annihilated by every active jump operator and commutes
/// (as a projector) with the Hamiltonian, both within `tol`.
pub fn is_dark(model: &LindbladModel, psi: &[Complex64], tol: f64) -> Result<bool> {
    for ch in model.channels().iter().filter(|ch| ch.rate > 0.0) {
        if vec_norm_sqr(&ch.op.matvec(psi)?).sqrt() > tol {
            return Ok(false);
        }
    }
    let proj = ComplexMatrix::projector(psi);
    Ok(model.hamiltonian().commutator(&proj)?.frobenius_norm() <= tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: usize,
}

/// Normalized state of one trajectory at a requested sample time.
#[derive(Debug, Clone)]
pub struct StateSample {
    pub time: f64,
    pub state: Vec<Complex64>,
    pub jumps: usize,
}

/// One Monte-Carlo realization.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub seed: u64,
    pub jump_events: Vec<JumpEvent>,
    pub final_state: Vec<Complex64>,
    pub samples: Vec<StateSample>,
    /// `jump_states[n]` is the normalized state right after the n-th jump;
    /// `jump_states[0]` is the initial state.
    pub jump_states: Vec<Vec<Complex64>>,
    /// Time the trajectory was integrated to.
    pub t_end: f64,
}

impl TrajectoryRecord {
    pub fn jumps_by(&self, t: f64) -> usize {
        self.jump_events.iter().take_while(|e| e.time <= t).count()
    }
}

#[derive(Debug, Clone)]
pub struct UnravelConfig {
    pub t_final: f64,
    pub dt: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub sample_times: Vec<f64>,
    pub max_captured_jumps: usize,
    /// Stop a trajectory once it has this many jumps and no samples remain.
    pub stop_after_jumps: Option<usize>,
}

impl UnravelConfig {
    pub fn new(t_final: f64, n_traj: usize, seed: u64) -> Self {
        Self {
            t_final,
            dt: DEFAULT_MC_DT,
            n_traj,
            seed,
            sample_times: Vec::new(),
            max_captured_jumps: DEFAULT_MAX_CAPTURED_JUMPS,
            stop_after_jumps: None,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_samples(mut self, times: &[f64]) -> Self {
        self.sample_times = times.to_vec();
        self
    }

    pub fn stop_after(mut self, jumps: usize) -> Self {
        self.stop_after_jumps = Some(jumps);
        self
    }
}

struct Unraveler<'a> {
    heff: ComplexMatrix,
    step: ComplexMatrix,
    decay: ComplexMatrix,
    channels: Vec<(f64, &'a ComplexMatrix)>,
    cfg: &'a UnravelConfig,
    samples: Vec<f64>,
}

impl Unraveler<'_> {
    fn propagator(&self, h: f64) -> Result<ComplexMatrix> {
        if (h - self.cfg.dt).abs() <= 1e-15 * self.cfg.dt {
            Ok(self.step.clone())
        } else {
            self.heff.scale(-I * h).expm()
        }
    }

    /// Time `τ ∈ (0, h]` at which `‖e^{−iH_eff τ} ψ‖² = r`, by Newton's
    /// method safeguarded with bisection.
    fn jump_time(&self, psi: &[Complex64], r: f64, h: f64) -> Result<f64> {
        let norm_at = |tau: f64| -> Result<(f64, Vec<Complex64>)> {
            let v = self.heff.scale(-I * tau).expm()?.matvec(psi)?;
            Ok((vec_norm_sqr(&v), v))
        };
        let (mut lo, mut hi) = (0.0, h);
        let (f_lo, f_hi) = (vec_norm_sqr(psi) - r, norm_at(h)?.0 - r);
        let mut tau = if f_lo > f_hi { h * f_lo / (f_lo - f_hi) } else { 0.5 * h };
        for _ in 0..60 {
            let (n2, v) = norm_at(tau)?;
            let f = n2 - r;
            if f.abs() <= 1e-14 || hi - lo <= 1e-14 {
                break;
            }
            if f > 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            // d‖ψ‖²/dτ = −ψ† (Σ γ L†L) ψ
            let slope = -self.decay.matvec(&v)?.iter().zip(&v).map(|(a, b)| (b.conj() * a).re).sum::<f64>();
            let newton = if slope < 0.0 { tau - f / slope } else { f64::NAN };
            tau = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        Ok(tau)
    }

    fn run(&self, index: usize, psi0: &[Complex64]) -> Result<TrajectoryRecord> {
        let seed = self.cfg.seed.wrapping_add(index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            loop {
                let r: f64 = rng.random();
                if r > 0.0 {
                    return r;
                }
            }
        };

        let t_final = self.cfg.t_final;
        let mut psi = psi0.to_vec();
        let mut t = 0.0;
        let mut r = draw(&mut rng);
        let mut events = Vec::new();
        let mut jump_states = vec![psi0.to_vec()];
        let mut samples = Vec::with_capacity(self.samples.len());
        let mut next_sample = 0;

        // Samples at t = 0 are taken before any propagation.
        while next_sample < self.samples.len() && self.samples[next_sample] <= 0.0 {
            samples.push(StateSample { time: 0.0, state: psi.clone(), jumps: 0 });
            next_sample += 1;
        }

        loop {
            let done_sampling = next_sample >= self.samples.len();
            if done_sampling {
                if let Some(stop) = self.cfg.stop_after_jumps {
                    if events.len() >= stop {
                        break;
                    }
                }
            }
            let stop_at = if done_sampling { t_final } else { self.samples[next_sample] };
            if stop_at - t <= 1e-12 && t_final - t <= 1e-12 && done_sampling {
                break;
            }
            let remaining = stop_at - t;
            let (h, lands) = if remaining <= self.cfg.dt * (1.0 + 1e-12) {
                (remaining, true)
            } else {
                (self.cfg.dt, false)
            };
            let candidate = if h > 0.0 { self.propagator(h)?.matvec(&psi)? } else { psi.clone() };

            if h > 0.0 && vec_norm_sqr(&candidate) <= r {
                let tau = self.jump_time(&psi, r, h)?;
                let pre = self.heff.scale(-I * tau).expm()?.matvec(&psi)?;
                t += tau;
                let weights: Vec<f64> = self
                    .channels
                    .iter()
                    .map(|(rate, l)| Ok(rate * vec_norm_sqr(&l.matvec(&pre)?)))
                    .collect::<Result<_>>()?;
                let total: f64 = weights.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::Invariant(format!(
                        "trajectory {index}: norm decayed without an active jump channel"
                    )));
                }
                let pick = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut chosen = weights.len() - 1;
                for (j, w) in weights.iter().enumerate() {
                    acc += w;
                    if pick < acc {
                        chosen = j;
                        break;
                    }
                }
                psi = self.channels[chosen].1.matvec(&pre)?;
                normalize(&mut psi);
                events.push(JumpEvent { time: t, channel: chosen });
                if jump_states.len() <= self.cfg.max_captured_jumps {
                    jump_states.push(psi.clone());
                }
                r = draw(&mut rng);
                continue;
            }

            psi = candidate;
            if lands {
                t = stop_at;
                if !done_sampling {
                    let mut state = psi.clone();
                    normalize(&mut state);
                    samples.push(StateSample { time: t, state, jumps: events.len() });
                    next_sample += 1;
                } else {
                    break;
                }
            } else {
                t += h;
            }
        }

        let mut final_state = psi;
        normalize(&mut final_state);
        Ok(TrajectoryRecord {
            index,
            seed,
            jump_events: events,
            final_state,
            samples,
            jump_states,
            t_end: t,
        })
    }
}

/// Monte-Carlo wave-function unraveling with waiting-time jump detection.
///
/// Each trajectory `i` uses its own generator seeded with `seed + i`, so the
/// ensemble is reproducible regardless of how it is scheduled across threads.
pub fn mc_unravel(model: &LindbladModel, psi0: &[Complex64], cfg: &UnravelConfig) -> Result<Vec<TrajectoryRecord>> {
    if psi0.len() != model.dim() {
        return Err(Error::Shape(format!(
            "initial state has length {}, model dimension is {}",
            psi0.len(),
            model.dim()
        )));
    }
    if (vec_norm_sqr(psi0) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument("initial state must be normalized".into()));
    }
    if !(cfg.dt > 0.0) || !(cfg.t_final >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid dt = {} or t_final = {}",
            cfg.dt, cfg.t_final
        )));
    }
    let mut samples = cfg.sample_times.clone();
    if samples.iter().any(|&s| !(0.0..=cfg.t_final).contains(&s)) {
        return Err(Error::InvalidArgument("sample times must lie in [0, t_final]".into()));
    }
    samples.sort_by(|a, b| a.total_cmp(b));
    samples.dedup();

    let heff = build_heff(model);
    let mut decay = ComplexMatrix::zeros(model.dim(), model.dim());
    for ch in model.channels() {
        decay.axpy(Complex64::new(ch.rate, 0.0), &(&ch.op.adjoint() * &ch.op));
    }
    let unraveler = Unraveler {
        step: heff.scale(-I * cfg.dt).expm()?,
        heff,
        decay,
        channels: model
            .channels()
            .iter()
            .filter(|ch| ch.rate > 0.0)
            .map(|ch| (ch.rate, &ch.op))
            .collect(),
        cfg,
        samples,
    };
    (0..cfg.n_traj)
        .into_par_iter()
        .map(|i| unraveler.run(i, psi0))
        .collect()
}

/// Average of `|ψ⟩⟨ψ|` over the states captured right after each
/// trajectory's n-th jump, weighted uniformly over *all* records. Records that
/// never reach n jumps contribute zero, so the unnormalized average carries
/// the probability of reaching n jumps as its trace.
pub fn jump_count_average(records: &[TrajectoryRecord], n: usize, renormalize: bool) -> Result<DensityMatrix> {
    let first = records
        .first()
        .ok_or_else(|| Error::EmptyEnsemble("no trajectory records".into()))?;
    let dim = first.jump_states[0].len();
    let mut acc = ComplexMatrix::zeros(dim, dim);
    let mut reached = 0usize;
    for rec in records {
        if rec.jump_events.len() < n {
            continue;
        }
        let state = rec.jump_states.get(n).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "record {} did not capture its jump #{n}; raise max_captured_jumps",
                rec.index
            ))
        })?;
        acc.axpy(ONE, &ComplexMatrix::projector(state));
        reached += 1;
    }
    if reached == 0 {
        return Err(Error::EmptyEnsemble(format!("no trajectory reached {n} jumps")));
    }
    let avg = DensityMatrix::new_unchecked(acc.scale_real(1.0 / records.len() as f64), false);
    if renormalize {
        avg.normalized_copy()
    } else {
        Ok(avg)
    }
}

/// Fixed-time ensemble average `E|ψ(t)⟩⟨ψ(t)|` at sample `sample_index`.
pub fn sample_average(records: &[TrajectoryRecord], sample_index: usize) -> Result<DensityMatrix> {
    let first = records
        .first()
        .ok_or_else(|| Error::EmptyEnsemble("no trajectory records".into()))?;
    let dim = first.final_state.len();
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for rec in records {
        let s = rec.samples.get(sample_index).ok_or_else(|| {
            Error::InvalidArgument(format!("record {} has no sample #{sample_index}", rec.index))
        })?;
        acc.axpy(ONE, &ComplexMatrix::projector(&s.state));
    }
    Ok(DensityMatrix::new_unchecked(acc.scale_real(1.0 / records.len() as f64), true))
}

/// `histogram[n]` = number of records with exactly `n` jumps by time `t`.
pub fn jump_count_histogram(records: &[TrajectoryRecord], t: f64) -> Vec<usize> {
    let mut hist = Vec::new();
    for rec in records {
        let n = rec.jumps_by(t);
        if hist.len() <= n {
            hist.resize(n + 1, 0);
        }
        hist[n] += 1;
    }
    hist
}
