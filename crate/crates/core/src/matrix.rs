//! Dense complex matrices for small Hilbert spaces.
//!
//! Everything in this crate lives in at most 12 dimensions
//! (branch ⊗ sublattice ⊗ three-level ancilla), so a plain row-major
//! `Vec<Complex64>` is both the simplest and the fastest representation.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Panics on ragged input; intended for literals.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        let m = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == m), "ragged rows");
        Self {
            rows: n,
            cols: m,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// `|ψ⟩⟨φ|`.
    pub fn outer(psi: &[Complex64], phi: &[Complex64]) -> Self {
        let mut m = Self::zeros(psi.len(), phi.len());
        for (r, a) in psi.iter().enumerate() {
            for (c, b) in phi.iter().enumerate() {
                m[(r, c)] = a * b.conj();
            }
        }
        m
    }

    pub fn projector(psi: &[Complex64]) -> Self {
        Self::outer(psi, psi)
    }

    /// Basis projector `|k⟩⟨k|` in dimension `n`.
    pub fn basis_projector(n: usize, k: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(k, k)] = ONE;
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )))
        }
    }

    fn require_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)];
            }
        }
        out
    }

    pub fn trace(&self) -> Result<Complex64> {
        self.require_square("trace")?;
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    pub fn try_matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "matmul: {}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let lhs_row = &self.data[r * self.cols..(r + 1) * self.cols];
            let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for (k, &a) in lhs_row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.require_same_shape(rhs, "add")?;
        Ok(self.zip_with(rhs, |a, b| a + b))
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.require_same_shape(rhs, "sub")?;
        Ok(self.zip_with(rhs, |a, b| a - b))
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// `self += s * other`, in place.
    pub fn axpy(&mut self, s: Complex64, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "matvec: {}x{} times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let rows = self.rows * rhs.rows;
        let cols = self.cols * rhs.cols;
        let mut out = Self::zeros(rows, cols);
        for ir in 0..self.rows {
            for ic in 0..self.cols {
                let a = self[(ir, ic)];
                if a == ZERO {
                    continue;
                }
                for jr in 0..rhs.rows {
                    for jc in 0..rhs.cols {
                        out[(ir * rhs.rows + jr, ic * rhs.cols + jc)] = a * rhs[(jr, jc)];
                    }
                }
            }
        }
        out
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        self.try_matmul(rhs)?.try_sub(&rhs.try_matmul(self)?)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|A − A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Eigenvalues of the Hermitian part `(A + A†)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        self.require_square("hermitian_eigenvalues")?;
        let n = self.rows;
        let herm = nalgebra::DMatrix::from_fn(n, n, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        });
        let mut eig: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| a.total_cmp(b));
        Ok(eig)
    }

    /// Matrix exponential by scaling and squaring with a truncated Taylor
    /// kernel. The scaled 1-norm is kept below 0.5, where 18 terms leave a
    /// truncation error near 1e-23.
    pub fn expm(&self) -> Result<Self> {
        self.require_square("expm")?;
        if !self.is_finite() {
            return Err(Error::InvalidArgument("expm of non-finite matrix".into()));
        }
        const TERMS: usize = 18;
        let norm = self.one_norm();
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let scaled = self.scale_real(0.5_f64.powi(squarings as i32));

        // Horner: I + A(I + A/2(I + A/3(...)))
        let n = self.rows;
        let eye = Self::identity(n);
        let mut acc = eye.clone();
        for k in (1..=TERMS).rev() {
            let mut next = scaled.try_matmul(&acc)?.scale_real(1.0 / k as f64);
            next.axpy(ONE, &eye);
            acc = next;
        }
        for _ in 0..squarings {
            acc = acc.try_matmul(&acc)?;
        }
        if !acc.is_finite() {
            return Err(Error::Invariant("expm overflowed".into()));
        }
        Ok(acc)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

// Operator impls panic on shape mismatch; the `try_*` methods are the
// fallible versions.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_matmul(rhs).expect("matmul shape mismatch")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_add(rhs).expect("add shape mismatch")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_sub(rhs).expect("sub shape mismatch")
    }
}

/// Trace distance `½‖A − B‖₁` for Hermitian arguments.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let diff = a.try_sub(b)?;
    Ok(0.5 * diff.hermitian_eigenvalues()?.iter().map(|x| x.abs()).sum::<f64>())
}

pub fn vec_norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn normalize(v: &mut [Complex64]) {
    let n = vec_norm_sqr(v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
}

/// Pauli matrices and ladder operators with the convention
/// `σ₋ = |0⟩⟨1|`, `σ_y = [[0, −i], [i, 0]]`.
pub mod pauli {
    use super::*;

    pub fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn sigma_y() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![ZERO, -I], vec![I, ZERO]])
    }

    pub fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    /// Lowering operator `|0⟩⟨1|`; `|0⟩` is the state it annihilates into.
    pub fn sigma_minus() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]])
    }

    pub fn sigma_plus() -> ComplexMatrix {
        sigma_minus().adjoint()
    }
}

#[cfg(test)]
mod tests {
    use super::pauli::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut impl Rng, n: usize, scale: f64) -> ComplexMatrix {
        let data = (0..n * n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
            .collect();
        ComplexMatrix::new(n, n, data).unwrap()
    }

    fn random_hermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        let a = random_matrix(rng, n, 1.0);
        (&a + &a.adjoint()).scale_real(0.5)
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(ComplexMatrix::new(2, 2, vec![ZERO; 3]).is_err());
        assert!(ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
        assert!(ComplexMatrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn kron_identities_and_dims() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(i2.kron(&i2), ComplexMatrix::identity(4));
        let a = ComplexMatrix::zeros(2, 2);
        let b = ComplexMatrix::zeros(3, 3);
        assert_eq!(a.kron(&b).dim(), (6, 6));
    }

    #[test]
    fn kron_block_layout() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = ComplexMatrix::from_real_rows(&[&[0.0, 5.0], &[6.0, 7.0]]);
        let k = a.kron(&b);
        // (a⊗b)[ir*2+jr, ic*2+jc] = a[ir,ic] b[jr,jc]
        assert_eq!(k[(2, 3)], a[(1, 1)] * b[(0, 1)]);
        assert_eq!(k[(1, 2)], a[(0, 1)] * b[(1, 0)]);
    }

    #[test]
    fn kron_mixed_product_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3] {
            for _ in 0..20 {
                let (a, b, cm, d) = (
                    random_matrix(&mut rng, n, 1.0),
                    random_matrix(&mut rng, n, 1.0),
                    random_matrix(&mut rng, n, 1.0),
                    random_matrix(&mut rng, n, 1.0),
                );
                let lhs = &a.kron(&b) * &cm.kron(&d);
                let rhs = (&a * &cm).kron(&(&b * &d));
                assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            }
        }
    }

    #[test]
    fn expm_closed_forms() {
        let z = ComplexMatrix::zeros(3, 3);
        assert!(z.expm().unwrap().max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);

        // exp(−i π/2 σx) = −i σx
        let rot = sigma_x().scale(-I * std::f64::consts::FRAC_PI_2).expm().unwrap();
        assert!(rot.max_abs_diff(&sigma_x().scale(-I)) < 1e-14);

        let d = ComplexMatrix::from_diag(&[c(0.3, 1.0), c(-2.0, 0.5)]);
        let e = d.expm().unwrap();
        let expect = ComplexMatrix::from_diag(&[c(0.3, 1.0).exp(), c(-2.0, 0.5).exp()]);
        assert!(e.max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn expm_large_norm_diagonal_relative_accuracy() {
        let d = ComplexMatrix::from_diag(&[c(-30.0, 40.0), c(10.0, -20.0), c(0.0, 49.0)]);
        let e = d.expm().unwrap();
        for i in 0..3 {
            let exact = d[(i, i)].exp();
            assert!((e[(i, i)] - exact).norm() / exact.norm() < 1e-10);
        }
    }

    #[test]
    fn expm_rejects_nonsquare() {
        assert!(ComplexMatrix::zeros(2, 3).expm().is_err());
    }

    #[test]
    fn expm_inverse_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 4, 2.0);
            let prod = &a.expm().unwrap() * &a.scale_real(-1.0).expm().unwrap();
            assert!(prod.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-9);

            let h = random_hermitian(&mut rng, 4);
            let u = h.scale(-I * 3.7).expm().unwrap();
            let uu = &u.adjoint() * &u;
            assert!(uu.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-9);
        }
    }

    #[test]
    fn trace_and_adjoint_basics() {
        assert_eq!(ComplexMatrix::identity(3).trace().unwrap(), c(3.0, 0.0));
        assert!(ComplexMatrix::zeros(2, 3).trace().is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 3, 1.0);
        let b = random_matrix(&mut rng, 3, 1.0);
        assert_eq!(a.adjoint().adjoint(), a);
        let tab = (&a * &b).trace().unwrap();
        let tba = (&b * &a).trace().unwrap();
        assert!((tab - tba).norm() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(a.try_matmul(&b).is_err());
        assert!(a.try_add(&ComplexMatrix::zeros(3, 2)).is_err());
        assert!(a.matvec(&[ZERO; 2]).is_err());
    }

    #[test]
    fn ladder_convention() {
        let sm = sigma_minus();
        let sp = sigma_plus();
        // σ₊σ₋ = |1⟩⟨1|
        assert_eq!(&sp * &sm, ComplexMatrix::basis_projector(2, 1));
        // (σx − iσy)/2 is the opposite ladder operator in this basis
        let other = (&sigma_x() - &sigma_y().scale(I)).scale_real(0.5);
        assert_eq!(other, sp);
    }

    #[test]
    fn hermitian_eigenvalues_and_trace_distance() {
        let z = sigma_z();
        assert_eq!(z.hermitian_eigenvalues().unwrap(), vec![-1.0, 1.0]);
        let p0 = ComplexMatrix::basis_projector(2, 0);
        let p1 = ComplexMatrix::basis_projector(2, 1);
        assert!((trace_distance(&p0, &p1).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance(&p0, &p0).unwrap() < 1e-14);
    }

    proptest! {
        #[test]
        fn adjoint_reverses_products(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 3, 1.0);
            let b = random_matrix(&mut rng, 3, 1.0);
            let lhs = (&a * &b).adjoint();
            let rhs = &b.adjoint() * &a.adjoint();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        #[test]
        fn expm_of_antihermitian_is_unitary(seed in any::<u64>(), t in 0.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(&mut rng, 3);
            let u = h.scale(-I * t).expm().unwrap();
            prop_assert!((&u.adjoint() * &u).max_abs_diff(&ComplexMatrix::identity(3)) < 1e-9);
        }
    }
}
