//! Dense complex matrices with Hilbert–Schmidt geometry.
//!
//! Every operator in the crate (Hamiltonians, control generators, observables,
//! density matrices, Lie algebra elements) is a [`ComplexMatrix`]. Lie algebras
//! and other real subspaces of skew-Hermitian matrices are carried by
//! [`OperatorSpan`], an orthonormal basis under `<X, Y> = Re Tr(X^† Y)`.
//!
//! Spans are real vector spaces: a skew-Hermitian `X` and `i X` (which is
//! Hermitian) are never mixed, so `dim su(n) = n^2 - 1` comes out of the
//! Gram–Schmidt count directly.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Default relative dependence tolerance for [`OperatorSpan::insert`].
pub const DEFAULT_SPAN_TOL: f64 = 1e-9;

/// Square dense complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{:?}", self.0)
    }
}

impl ComplexMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(n, n, f))
    }

    /// Builds a matrix from row-major rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "ragged rows");
        Self::from_fn(n, |i, j| rows[i][j])
    }

    pub fn from_diagonal(d: &[C64]) -> Self {
        let n = d.len();
        Self::from_fn(n, |i, j| if i == j { d[i] } else { C64::new(0.0, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub(crate) fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn norm(&self) -> f64 {
        self.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Complex Hilbert–Schmidt product `Tr(self^† other)`.
    pub fn inner_complex(&self, other: &Self) -> C64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Real Hilbert–Schmidt product `Re Tr(self^† other)`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    /// `‖X - X^†‖`, zero for Hermitian matrices.
    pub fn hermitian_deviation(&self) -> f64 {
        (&self.0 - self.0.adjoint()).norm()
    }

    /// `‖X + X^†‖`, zero for skew-Hermitian matrices.
    pub fn skew_deviation(&self) -> f64 {
        (&self.0 + self.0.adjoint()).norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn is_skew_hermitian(&self, tol: f64) -> bool {
        self.skew_deviation() <= tol
    }

    pub fn is_traceless(&self, tol: f64) -> bool {
        self.trace().norm() <= tol
    }

    /// `(X + X^†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// `(X - X^†) / 2`.
    pub fn skew_part(&self) -> Self {
        Self((&self.0 - self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Eigenvalues of a Hermitian matrix in ascending order. The input is
    /// symmetrized first, so small Hermitian defects are ignored.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = self.hermitian_part();
        let mut ev: Vec<f64> = SymmetricEigen::new(h.0).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.0.clone().singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 -= &rhs.0;
    }
}

impl ComplexMatrix {
    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &Self) {
        for (a, b) in self.0.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *a += s * b;
        }
    }

    /// `self += s * other` with a real coefficient.
    pub fn axpy_re(&mut self, s: f64, other: &Self) {
        for (a, b) in self.0.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *a += b * s;
        }
    }
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(D::Error::custom("matrix must be a non-empty square array of rows"));
        }
        let m = DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1]));
        ComplexMatrix::new(m).map_err(D::Error::custom)
    }
}

/// `XY - YX`.
pub fn commutator(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<ComplexMatrix> {
    x.check_same_dim(y)?;
    Ok(bracket(x, y))
}

/// `XY + YX`.
pub fn anticommutator(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<ComplexMatrix> {
    x.check_same_dim(y)?;
    Ok(anti_bracket(x, y))
}

// Unchecked versions for inner loops where dimensions are known to agree.
pub(crate) fn bracket(x: &ComplexMatrix, y: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(&x.0 * &y.0 - &y.0 * &x.0)
}

pub(crate) fn anti_bracket(x: &ComplexMatrix, y: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(&x.0 * &y.0 + &y.0 * &x.0)
}

/// Kronecker product, `(X ⊗ Y)[(i m + k), (j m + l)] = X[i, j] Y[k, l]` with `m = dim Y`.
pub fn tensor(x: &ComplexMatrix, y: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(x.0.kronecker(&y.0))
}

/// Kronecker product of a sequence of factors, left to right.
pub fn tensor_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    let mut it = factors.into_iter();
    let first = it.next().expect("tensor_all needs at least one factor").clone();
    it.fold(first, |acc, f| tensor(&acc, f))
}

/// Exponential of a skew-Hermitian matrix.
///
/// Diagonalizes the Hermitian matrix `H = iX` and returns
/// `V diag(exp(-i λ)) V^†`, which is unitary to machine precision. The skew
/// check is relative: `‖X + X^†‖ ≤ 1e-10 · max(1, ‖X‖)`.
pub fn expm_skew(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let deviation = x.skew_deviation();
    if deviation > 1e-10 * x.norm().max(1.0) {
        return Err(Error::NotSkewHermitian { deviation });
    }
    let h = x.scale(I).hermitian_part();
    let eig = SymmetricEigen::new(h.0);
    let v = &eig.eigenvectors;
    let phases = eig.eigenvalues.map(|l| C64::from_polar(1.0, -l));
    let mut vd = v.clone();
    for (j, p) in phases.iter().enumerate() {
        let mut col = vd.column_mut(j);
        col *= *p;
    }
    Ok(ComplexMatrix(vd * v.adjoint()))
}

/// Matrix of independent standard complex Gaussians (real and imaginary parts N(0, 1)).
pub fn random_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Random skew-Hermitian matrix `(G - G^†) / 2`.
pub fn random_skew_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    random_gaussian(n, rng).skew_part()
}

/// Random traceless skew-Hermitian matrix.
pub fn random_su<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let mut x = random_skew_hermitian(n, rng);
    let shift = x.trace() / n as f64;
    for k in 0..n {
        x.0[(k, k)] -= shift;
    }
    x
}

/// Orthonormal basis (under `Re Tr(X^† Y)`) of a real subspace of skew-Hermitian
/// `n x n` matrices.
#[derive(Clone, Debug)]
pub struct OperatorSpan {
    ambient_dim: usize,
    basis: Vec<ComplexMatrix>,
}

impl OperatorSpan {
    pub fn new(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: Vec::new(),
        }
    }

    /// Span of `items`, inserted in order with tolerance `tol`.
    pub fn from_matrices<'a>(
        ambient_dim: usize,
        items: impl IntoIterator<Item = &'a ComplexMatrix>,
        tol: f64,
    ) -> Result<Self> {
        let mut span = Self::new(ambient_dim);
        for x in items {
            span.insert(x, tol)?;
        }
        Ok(span)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// Component of `x` orthogonal to the span (real coefficients).
    pub fn residual(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut r = x.clone();
        for b in &self.basis {
            let c = b.inner(&r);
            r.axpy_re(-c, b);
        }
        r
    }

    fn residual_two_pass(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let r = self.residual(x);
        self.residual(&r)
    }

    /// Real coordinates `Re Tr(b_k^† x)`.
    pub fn coordinates(&self, x: &ComplexMatrix) -> Vec<f64> {
        self.basis.iter().map(|b| b.inner(x)).collect()
    }

    /// Orthogonal projection extended complex-linearly: `Σ_k Tr(b_k^† x) b_k`.
    ///
    /// For skew-Hermitian `x` this is the real projection; for Hermitian `x`
    /// it projects onto `i · span`. The basis is orthonormal under the complex
    /// product too, since `Tr(b_j^† b_k)` is real for skew-Hermitian pairs.
    pub fn project(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut p = ComplexMatrix::zeros(x.dim());
        for b in &self.basis {
            let c = b.inner_complex(x);
            p.axpy(c, b);
        }
        p
    }

    /// Norm of the complex projection onto the span.
    pub fn projection_norm(&self, x: &ComplexMatrix) -> f64 {
        self.basis
            .iter()
            .map(|b| b.inner_complex(x).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Norm of the part of skew-Hermitian `x` lying outside the span.
    pub fn distance(&self, x: &ComplexMatrix) -> f64 {
        self.residual_two_pass(x).norm()
    }

    pub fn contains(&self, x: &ComplexMatrix, tol: f64) -> bool {
        self.distance(x) <= tol * x.norm().max(1.0)
    }

    /// Two-pass Gram–Schmidt insertion. Returns whether `x` enlarged the span.
    ///
    /// `x` is accepted when its residual exceeds `tol · max(1, ‖x‖)`.
    pub fn insert(&mut self, x: &ComplexMatrix, tol: f64) -> Result<bool> {
        if x.dim() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                left: self.ambient_dim,
                right: x.dim(),
            });
        }
        let nrm = x.norm();
        let deviation = x.skew_deviation();
        if deviation > 1e-10 * nrm.max(1.0) {
            return Err(Error::NotSkewHermitian { deviation });
        }
        Ok(self.insert_unchecked(x, nrm, tol))
    }

    pub(crate) fn insert_unchecked(&mut self, x: &ComplexMatrix, nrm: f64, tol: f64) -> bool {
        let r = self.residual_two_pass(x);
        let rn = r.norm();
        if rn > tol * nrm.max(1.0) {
            self.basis.push(r.scale_re(1.0 / rn));
            true
        } else {
            false
        }
    }

    /// Largest `|<b_i, b_j> - δ_ij|` over basis pairs.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.inner(b) - target).abs());
            }
        }
        worst
    }

    /// Orthogonal complement of `self` inside `whole`.
    pub fn complement_in(&self, whole: &OperatorSpan, tol: f64) -> OperatorSpan {
        let mut joint = self.clone();
        let start = joint.dimension();
        for b in &whole.basis {
            joint.insert_unchecked(b, b.norm(), tol);
        }
        OperatorSpan {
            ambient_dim: self.ambient_dim,
            basis: joint.basis.split_off(start),
        }
    }

    /// Hermitian versions `-i b_k` of the basis elements.
    pub fn hermitian_basis(&self) -> Vec<ComplexMatrix> {
        self.basis.iter().map(|b| b.scale(-I)).collect()
    }
}

/// Functional form of [`OperatorSpan::insert`].
pub fn span_insert(
    mut span: OperatorSpan,
    x: &ComplexMatrix,
    tol: f64,
) -> Result<(OperatorSpan, bool)> {
    let accepted = span.insert(x, tol)?;
    Ok((span, accepted))
}

/// Orthonormal basis of `su(n)`: off-diagonal symmetric/antisymmetric pairs
/// plus normalized diagonal Gell-Mann-type generators, all multiplied by `i`.
pub fn su_basis(n: usize) -> OperatorSpan {
    let mut span = OperatorSpan::new(n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..n {
        for k in (j + 1)..n {
            let mut a = ComplexMatrix::zeros(n);
            a.0[(j, k)] = C64::new(s, 0.0);
            a.0[(k, j)] = C64::new(-s, 0.0);
            span.basis.push(a);
            let mut b = ComplexMatrix::zeros(n);
            b.0[(j, k)] = C64::new(0.0, s);
            b.0[(k, j)] = C64::new(0.0, s);
            span.basis.push(b);
        }
    }
    for l in 1..n {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut d = ComplexMatrix::zeros(n);
        for k in 0..l {
            d.0[(k, k)] = C64::new(0.0, 1.0 / norm);
        }
        d.0[(l, l)] = C64::new(0.0, -(l as f64) / norm);
        span.basis.push(d);
    }
    span
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn commutator_rejects_mismatched_dims() {
        let a = ComplexMatrix::identity(2);
        let b = ComplexMatrix::identity(3);
        assert!(matches!(commutator(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(anticommutator(&a, &b).is_err());
    }

    #[test]
    fn self_commutator_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_gaussian(4, &mut rng);
        assert_eq!(commutator(&x, &x).unwrap().max_abs(), 0.0);
        let z = ComplexMatrix::zeros(4);
        assert_eq!(anticommutator(&x, &z).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn identity_tensor_identity() {
        let i3 = ComplexMatrix::identity(3);
        assert_eq!(tensor(&i3, &i3), ComplexMatrix::identity(9));
    }

    #[test]
    fn tensor_index_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_gaussian(2, &mut rng);
        let y = random_gaussian(3, &mut rng);
        let t = tensor(&x, &y);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..3 {
                    for l in 0..3 {
                        assert_eq!(t.get(i * 3 + k, j * 3 + l), x.get(i, j) * y.get(k, l));
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = random_gaussian(3, &mut rng);
            let y = random_gaussian(3, &mut rng);
            let w = random_gaussian(3, &mut rng);
            let z = random_gaussian(3, &mut rng);
            let lhs = &tensor(&x, &y) * &tensor(&w, &z);
            let rhs = tensor(&(&x * &w), &(&y * &z));
            assert!((&lhs - &rhs).norm() <= 1e-12, "{}", (&lhs - &rhs).norm());
        }
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm_skew(&ComplexMatrix::zeros(5)).unwrap();
        assert!((&e - &ComplexMatrix::identity(5)).norm() < 1e-15);
    }

    #[test]
    fn expm_diagonal() {
        let pi = std::f64::consts::PI;
        let x = ComplexMatrix::from_diagonal(&[c(0.0, -pi), c(0.0, 0.0), c(0.0, pi)]);
        let e = expm_skew(&x).unwrap();
        let expected = ComplexMatrix::from_diagonal(&[c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]);
        assert!((&e - &expected).norm() < 1e-14);
    }

    #[test]
    fn expm_inverse_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [2, 3, 9, 27] {
            let x = random_skew_hermitian(n, &mut rng).scale_re(3.0);
            let e = expm_skew(&x).unwrap();
            let einv = expm_skew(&(-&x)).unwrap();
            let id = ComplexMatrix::identity(n);
            assert!((&(&e * &einv) - &id).norm() <= 1e-10);
            for s in e.singular_values() {
                assert!((s - 1.0).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn expm_agrees_with_taylor_series() {
        // Independent route: truncated power series with scaling and squaring.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_skew_hermitian(4, &mut rng);
        let scaled = x.scale_re(1.0 / 1024.0);
        let mut term = ComplexMatrix::identity(4);
        let mut sum = ComplexMatrix::identity(4);
        for k in 1..20 {
            term = (&term * &scaled).scale_re(1.0 / k as f64);
            sum += &term;
        }
        for _ in 0..10 {
            sum = &sum * &sum;
        }
        let e = expm_skew(&x).unwrap();
        assert!((&e - &sum).norm() < 1e-11, "{}", (&e - &sum).norm());
    }

    #[test]
    fn expm_rejects_hermitian_input() {
        let h = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        assert!(matches!(expm_skew(&h), Err(Error::NotSkewHermitian { .. })));
    }

    #[test]
    fn span_insert_basic() {
        let x = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, 1.0), c(0.0, 0.0)],
        ]);
        let (span, accepted) = span_insert(OperatorSpan::new(2), &x, DEFAULT_SPAN_TOL).unwrap();
        assert!(accepted);
        assert_eq!(span.dimension(), 1);
        let doubled = span.basis()[0].scale_re(2.0);
        let (span, accepted) = span_insert(span, &doubled, DEFAULT_SPAN_TOL).unwrap();
        assert!(!accepted);
        assert_eq!(span.dimension(), 1);
    }

    #[test]
    fn span_insert_rejects_hermitian() {
        let mut span = OperatorSpan::new(2);
        let h = ComplexMatrix::identity(2);
        assert!(span.insert(&h, DEFAULT_SPAN_TOL).is_err());
        let wrong = ComplexMatrix::zeros(3);
        assert!(matches!(
            span.insert(&wrong, DEFAULT_SPAN_TOL),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn su_basis_is_orthonormal_and_complete() {
        for n in [2, 3, 9] {
            let b = su_basis(n);
            assert_eq!(b.dimension(), n * n - 1);
            assert!(b.orthonormality_defect() < 1e-14);
            assert!(b.basis().iter().all(|x| x.is_skew_hermitian(1e-15) && x.is_traceless(1e-14)));
        }
    }

    #[test]
    fn complement_dimensions_add_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let whole = su_basis(3);
        let mut part = OperatorSpan::new(3);
        for _ in 0..3 {
            part.insert(&random_su(3, &mut rng), DEFAULT_SPAN_TOL).unwrap();
        }
        let comp = part.complement_in(&whole, DEFAULT_SPAN_TOL);
        assert_eq!(part.dimension() + comp.dimension(), 8);
        for a in part.basis() {
            for b in comp.basis() {
                assert!(a.inner(b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matrix_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_gaussian(3, &mut rng);
        let s = serde_json::to_string(&x).unwrap();
        let y: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(x, y);
        assert!(serde_json::from_str::<ComplexMatrix>("[[[1,0],[0,0]]]").is_err());
        assert!(serde_json::from_str::<ComplexMatrix>("[]").is_err());
    }
}
