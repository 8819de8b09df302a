//! Dissipative SSH chain in momentum space.
//!
//! Each momentum sector carries `H(p) = h_x(p) σ_x + h_y(p) σ_y` with
//! `h_x = v + w cos p`, `h_y = −w sin p`, and the collective decay channel
//! `σ_−` with rate `γ`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{Channel, LindbladModel};
use crate::matrix::pauli::{sigma_minus, sigma_x, sigma_y};
use crate::matrix::{ComplexMatrix, I};

/// `|v| − |w|` below this counts as the gap-closing locus.
pub const SINGULAR_TOL: f64 = 1e-9;
/// Smallest admissible denominator of the closed-form propagator.
pub const DENOM_TOL: f64 = 1e-12;
/// Largest accepted distance of a winding estimate from its integer.
pub const WINDING_RESIDUAL_TOL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochParams {
    pub v: f64,
    pub w: f64,
    pub gamma: f64,
}

impl BlochParams {
    pub fn new(v: f64, w: f64, gamma: f64) -> Result<Self> {
        if !v.is_finite() || !w.is_finite() {
            return Err(Error::InvalidArgument(format!("hoppings must be finite (v={v}, w={w})")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("decay rate must be positive, got {gamma}")));
        }
        Ok(Self { v, w, gamma })
    }

    /// `(h_x(p), h_y(p))`.
    pub fn bloch(&self, p: f64) -> (f64, f64) {
        (self.v + self.w * p.cos(), -self.w * p.sin())
    }

    /// `h²(p) = h_x² + h_y²`.
    pub fn h2(&self, p: f64) -> f64 {
        let (hx, hy) = self.bloch(p);
        hx * hx + hy * hy
    }

    pub fn is_singular(&self) -> bool {
        (self.v.abs() - self.w.abs()).abs() <= SINGULAR_TOL
    }

    /// Sublattice Hamiltonian of one momentum sector.
    pub fn hamiltonian(&self, p: f64) -> ComplexMatrix {
        let (hx, hy) = self.bloch(p);
        &sigma_x().scale_real(hx) + &sigma_y().scale_real(hy)
    }

    /// Two-level model of a single momentum sector with the decay channel.
    pub fn sector_model(&self, p: f64) -> LindbladModel {
        LindbladModel::new(self.hamiltonian(p), vec![Channel::new(self.gamma, sigma_minus())])
            .expect("Bloch Hamiltonian is Hermitian by construction")
    }

    /// Two-momentum model `|0⟩⟨0|⊗H(p) + |1⟩⟨1|⊗H(p′)` with `L = 1₂⊗σ_−`.
    pub fn pair_model(&self, pair: MomentumPair) -> LindbladModel {
        let h = &ComplexMatrix::basis_projector(2, 0).kron(&self.hamiltonian(pair.p))
            + &ComplexMatrix::basis_projector(2, 1).kron(&self.hamiltonian(pair.p_prime));
        let l = ComplexMatrix::identity(2).kron(&sigma_minus());
        LindbladModel::new(h, vec![Channel::new(self.gamma, l)]).expect("Hermitian by construction")
    }
}

/// `(h_x(p), h_y(p))` for `params`.
pub fn bloch(params: &BlochParams, p: f64) -> (f64, f64) {
    params.bloch(p)
}

/// Wrap a momentum into `[0, 2π)`.
pub fn wrap_momentum(p: f64) -> f64 {
    let r = p.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumPair {
    pub p: f64,
    pub p_prime: f64,
}

impl MomentumPair {
    /// Both momenta are wrapped into the Brillouin zone.
    pub fn new(p: f64, p_prime: f64) -> Result<Self> {
        if !p.is_finite() || !p_prime.is_finite() {
            return Err(Error::InvalidArgument("momenta must be finite".into()));
        }
        Ok(Self {
            p: wrap_momentum(p),
            p_prime: wrap_momentum(p_prime),
        })
    }

    pub fn diagonal(p: f64) -> Result<Self> {
        Self::new(p, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Winding {
    pub value: i64,
    pub raw: f64,
    pub residual: f64,
}

/// Winding of `(h_x, h_y)` around the origin, summing wrapped phase
/// increments of `h_x + i h_y` over `n_grid` points of the Brillouin zone.
pub fn winding_number(params: &BlochParams, n_grid: usize) -> Result<Winding> {
    if n_grid < 3 {
        return Err(Error::InvalidArgument(format!("n_grid must be ≥ 3, got {n_grid}")));
    }
    if params.is_singular() {
        return Err(Error::Singular(format!(
            "gap closes at v = {}, w = {}: winding undefined",
            params.v, params.w
        )));
    }
    let angle = |k: usize| {
        let (hx, hy) = params.bloch(TAU * k as f64 / n_grid as f64);
        hy.atan2(hx)
    };
    let mut total = 0.0;
    let mut prev = angle(0);
    for k in 1..=n_grid {
        let cur = angle(k % n_grid);
        let mut d = cur - prev;
        if d > PI {
            d -= TAU;
        } else if d < -PI {
            d += TAU;
        }
        total += d;
        prev = cur;
    }
    // h_y = −w sin p runs clockwise for w > v; the convention counts that as +1.
    let raw = -total / TAU;
    let value = raw.round();
    let residual = (raw - value).abs();
    if residual > WINDING_RESIDUAL_TOL {
        return Err(Error::Invariant(format!(
            "winding estimate {raw} is {residual:.3e} from an integer; refine n_grid"
        )));
    }
    Ok(Winding {
        value: value as i64,
        raw,
        residual,
    })
}

/// Closed-form jump-time propagator for the collective decay channel,
/// `2γ² z(p) z(p′)* / (2[h²(p) − h²(p′)]² + γ²[h²(p) + h²(p′)])` with
/// `z = h_x + i h_y`.
pub fn kcc_closed_form(params: &BlochParams, pair: MomentumPair) -> Result<Complex64> {
    kcc_closed_form_at(params, pair.p, pair.p_prime)
}

/// [`kcc_closed_form`] without wrapping the momenta.
pub fn kcc_closed_form_at(params: &BlochParams, p: f64, p_prime: f64) -> Result<Complex64> {
    let (hx, hy) = params.bloch(p);
    let (hx2, hy2) = params.bloch(p_prime);
    let (a, b) = (hx * hx + hy * hy, hx2 * hx2 + hy2 * hy2);
    let g2 = params.gamma * params.gamma;
    let denom = 2.0 * (a - b).powi(2) + g2 * (a + b);
    if denom.abs() < DENOM_TOL {
        return Err(Error::Singular(format!(
            "propagator denominator {denom:.3e} at dark pair (p, p′) = ({p}, {p_prime})"
        )));
    }
    let num = Complex64::new(hx, hy) * Complex64::new(hx2, -hy2) * (2.0 * g2);
    Ok(num / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseOptions {
    /// Offset added to the second momentum of every propagator evaluation.
    pub delta_q: f64,
    /// Drop the `k = N_cir` term, which repeats the `k = 0` point.
    pub corrected_sum: bool,
}

/// Discretized jump-time phase,
/// `T ≈ (i/N) Σ_k [K(p_k + Δp, p_k + Δq) − K(p_k, p_k + Δq)] / Δp`,
/// `p_k = 2πk/N`, `k = 0..=N` (or `0..N` with `corrected_sum`).
///
/// `Re T` is the order parameter; `Im T` is a consistency diagnostic.
pub fn jumptime_phase<F>(kcc: F, n_cir: usize, delta_p: f64, opts: PhaseOptions) -> Result<Complex64>
where
    F: Fn(f64, f64) -> Result<Complex64> + Sync,
{
    if n_cir < 3 {
        return Err(Error::InvalidArgument(format!("n_cir must be ≥ 3, got {n_cir}")));
    }
    if !(delta_p > 0.0 && delta_p.is_finite()) || !opts.delta_q.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "delta_p must be positive and delta_q finite (got {delta_p}, {})",
            opts.delta_q
        )));
    }
    let last = if opts.corrected_sum { n_cir - 1 } else { n_cir };
    let terms: Vec<Complex64> = (0..=last)
        .into_par_iter()
        .map(|k| {
            let p = TAU * k as f64 / n_cir as f64;
            let q = p + opts.delta_q;
            Ok((kcc(p + delta_p, q)? - kcc(p, q)?) / delta_p)
        })
        .collect::<Result<_>>()?;
    let sum: Complex64 = terms.iter().sum();
    Ok(I * sum / n_cir as f64)
}
