//! Driven Heisenberg dimer of two spin-1 particles.
//!
//! With `σ̄_v` the skew-Hermitian spin-1 matrices, the drift and control
//! generators are
//!
//! ```text
//! A   = -i J12 Σ_j σ̄_j ⊗ σ̄_j
//! B_v = γ1 σ̄_v ⊗ 𝟏 + γ2 𝟏 ⊗ σ̄_v
//! H(u) = i (A + Σ_v u_v B_v)
//! ```
//!
//! `A` and `B_v` come out skew-Hermitian exactly as written, so `H` is
//! Hermitian and the state obeys `dρ/dt = -i[H, ρ] = [A + Σ u_v B_v, ρ]`.
//!
//! Outputs use the Hermitian spin operators `j_v = -i σ̄_v`: the measured
//! total magnetization is `M_v = Tr((j_v ⊗ 𝟏 + 𝟏 ⊗ j_v) ρ)`, which is real.
//! Note that `j_z = -diag(1, 0, -1)`, so the `+1` eigenvector of `j_z` is the
//! last standard basis vector.

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{expm_skew, random_gaussian, tensor, ComplexMatrix, C64, I};
use crate::su3::build_su3_basis;

/// Dimension of the two-spin Hilbert space.
pub const DIM: usize = 9;

/// Tolerance for Hermiticity, trace and positivity of states.
pub const STATE_TOL: f64 = 1e-10;

/// States closer than this (Frobenius) to `𝟏/9` count as scalar.
pub const SCALAR_TOL: f64 = 1e-8;

/// Gyromagnetic ratios and exchange constant (`ħ = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(rename = "J12")]
    pub j12: f64,
}

impl Couplings {
    pub fn new(gamma1: f64, gamma2: f64, j12: f64) -> Self {
        Self { gamma1, gamma2, j12 }
    }

    pub fn is_finite(&self) -> bool {
        self.gamma1.is_finite() && self.gamma2.is_finite() && self.j12.is_finite()
    }

    /// Same ratios, exchange constant negated.
    pub fn with_flipped_exchange(&self) -> Self {
        Self {
            j12: -self.j12,
            ..*self
        }
    }
}

/// Unit-trace, positive semidefinite Hermitian `9 x 9` matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        if mat.dim() != DIM {
            return Err(Error::DimensionMismatch {
                left: DIM,
                right: mat.dim(),
            });
        }
        let herm = mat.hermitian_deviation();
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = mat.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = mat.hermitian_eigenvalues()[0];
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (minimum eigenvalue {min:.3e})"
            )));
        }
        Ok(Self { mat })
    }

    /// Wraps a matrix known to be a state up to roundoff (e.g. a unitary image
    /// of a validated state), symmetrizing it.
    pub(crate) fn from_trusted(mat: &ComplexMatrix) -> Self {
        Self {
            mat: mat.hermitian_part(),
        }
    }

    /// `𝟏/9`.
    pub fn maximally_mixed() -> Self {
        Self {
            mat: ComplexMatrix::identity(DIM).scale_re(1.0 / DIM as f64),
        }
    }

    /// Projector onto a standard basis vector.
    pub fn basis_state(index: usize) -> Self {
        assert!(index < DIM);
        let mut d = vec![C64::new(0.0, 0.0); DIM];
        d[index] = C64::new(1.0, 0.0);
        Self {
            mat: ComplexMatrix::from_diagonal(&d),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.mat.hermitian_eigenvalues()
    }

    /// Distance of the state from `𝟏/9`.
    pub fn distance_from_scalar(&self) -> f64 {
        traceless_part(&self.mat).norm()
    }

    pub fn is_scalar(&self) -> bool {
        self.distance_from_scalar() <= SCALAR_TOL
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mat = ComplexMatrix::deserialize(d)?;
        DensityMatrix::new(mat).map_err(serde::de::Error::custom)
    }
}

/// `X - Tr(X)/n · 𝟏`.
pub fn traceless_part(x: &ComplexMatrix) -> ComplexMatrix {
    let n = x.dim();
    let shift = x.trace() / n as f64;
    let mut out = x.clone();
    out.axpy(-shift, &ComplexMatrix::identity(n));
    out
}

/// Couplings plus initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinPairModel {
    pub couplings: Couplings,
    pub rho0: DensityMatrix,
}

impl SpinPairModel {
    /// Rejects non-finite couplings and scalar initial states (whose output is
    /// identically zero for every model).
    pub fn new(couplings: Couplings, rho0: DensityMatrix) -> Result<Self> {
        if !couplings.is_finite() {
            return Err(Error::InvalidState("non-finite couplings".into()));
        }
        if rho0.is_scalar() {
            return Err(Error::InvalidState(
                "initial state is (numerically) the maximally mixed state".into(),
            ));
        }
        Ok(Self { couplings, rho0 })
    }
}

/// `A = -i J12 Σ_j σ̄_j ⊗ σ̄_j`.
pub fn build_drift(c: &Couplings) -> ComplexMatrix {
    let b = build_su3_basis();
    let mut sum = ComplexMatrix::zeros(DIM);
    for s in b.sbars() {
        sum += &tensor(s, s);
    }
    sum.scale(-I * c.j12)
}

/// `B_v = γ1 σ̄_v ⊗ 𝟏 + γ2 𝟏 ⊗ σ̄_v` for `v = x, y, z`.
pub fn build_controls(c: &Couplings) -> [ComplexMatrix; 3] {
    let b = build_su3_basis();
    let id = &b.identity;
    b.sbars().map(|s| {
        let mut out = tensor(s, id).scale_re(c.gamma1);
        out.axpy_re(c.gamma2, &tensor(id, s));
        out
    })
}

/// Skew-Hermitian generator `A + Σ_v u_v B_v` of the Liouville flow.
pub fn generator_at(c: &Couplings, u: [f64; 3]) -> ComplexMatrix {
    let mut g = build_drift(c);
    for (b, uv) in build_controls(c).iter().zip(u) {
        g.axpy_re(uv, b);
    }
    g
}

/// Hermitian `H = i(A + Σ_v u_v B_v)`.
pub fn hamiltonian_at(c: &Couplings, u: [f64; 3]) -> ComplexMatrix {
    generator_at(c, u).scale(I)
}

/// Total spin operators on the pair.
#[derive(Clone, Debug)]
pub struct ObservableSet {
    /// Hermitian `j_v ⊗ 𝟏 + 𝟏 ⊗ j_v`.
    pub s_tot: [ComplexMatrix; 3],
}

impl ObservableSet {
    pub fn new() -> Self {
        let b = build_su3_basis();
        let id = &b.identity;
        let s_tot = b.spin_operators().map(|j| {
            let mut out = tensor(&j, id);
            out += &tensor(id, &j);
            out
        });
        Self { s_tot }
    }

    /// Skew-Hermitian collective generators `σ̄_v ⊗ 𝟏 + 𝟏 ⊗ σ̄_v = i · s_tot[v]`.
    pub fn collective_generators(&self) -> [ComplexMatrix; 3] {
        self.s_tot.clone().map(|s| s.scale(I))
    }

    /// `(Re Tr(S_x ρ), Re Tr(S_y ρ), Re Tr(S_z ρ))` for any Hermitian `ρ`.
    pub fn expectations(&self, rho: &ComplexMatrix) -> [f64; 3] {
        // Tr(S ρ) = Σ_ij S_ij ρ_ji = Tr(S^† ρ) for Hermitian S.
        [0, 1, 2].map(|v| self.s_tot[v].inner(rho))
    }
}

impl Default for ObservableSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Total magnetization `(M_x, M_y, M_z)` of a state.
pub fn magnetization(rho: &DensityMatrix) -> [f64; 3] {
    ObservableSet::new().expectations(rho.matrix())
}

/// `G G^† / Tr(G G^†)` with `G` a seeded `9 x 9` complex Gaussian matrix.
pub fn random_density_matrix(seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_gaussian(DIM, &mut rng);
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    let mat = gg.scale_re(1.0 / tr).hermitian_part();
    DensityMatrix { mat }
}

/// Gibbs state `exp(-β H) / Z` of the Hamiltonian with unit field along `z`.
pub fn thermal_state(c: &Couplings, beta: f64) -> Result<DensityMatrix> {
    let h = hamiltonian_at(c, [0.0, 0.0, 1.0]).hermitian_part();
    let eig = SymmetricEigen::new(h.into_matrix());
    let emin = eig.eigenvalues.min();
    let weights = eig.eigenvalues.map(|e| (-beta * (e - emin)).exp());
    let z: f64 = weights.sum();
    let v = &eig.eigenvectors;
    let mut vd = v.clone();
    for (j, w) in weights.iter().enumerate() {
        let mut col = vd.column_mut(j);
        col *= C64::new(w / z, 0.0);
    }
    let mat = ComplexMatrix::new(vd * v.adjoint())?.hermitian_part();
    DensityMatrix::new(mat)
}

/// `U ρ U^†` for the constant-control propagator over `dt`.
pub fn evolve_constant(c: &Couplings, u: [f64; 3], dt: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let prop = expm_skew(&generator_at(c, u).scale_re(dt))?;
    Ok(&(&prop * rho) * &prop.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::commutator;

    fn cp(g1: f64, g2: f64, j: f64) -> Couplings {
        Couplings::new(g1, g2, j)
    }

    #[test]
    fn zero_exchange_gives_zero_drift() {
        assert_eq!(build_drift(&cp(1.0, 2.0, 0.0)).max_abs(), 0.0);
    }

    #[test]
    fn drift_commutes_with_controls_for_equal_ratios() {
        let c = cp(1.0, 1.0, 1.0);
        let a = build_drift(&c);
        for b in build_controls(&c) {
            assert!(commutator(&a, &b).unwrap().norm() <= 1e-12);
        }
    }

    #[test]
    fn generators_skew_and_traceless() {
        for c in [cp(1.0, 2.0, 0.5), cp(-0.3, 4.0, -2.0), cp(0.0, 0.0, 0.0)] {
            let a = build_drift(&c);
            assert!(a.is_skew_hermitian(1e-14) && a.is_traceless(1e-14));
            for b in build_controls(&c) {
                assert!(b.is_skew_hermitian(1e-14) && b.is_traceless(1e-14));
            }
        }
    }

    #[test]
    fn drift_commutes_with_collective_rotations() {
        let c = cp(1.3, 0.4, 0.9);
        let a = build_drift(&c);
        for s in ObservableSet::new().collective_generators() {
            assert!(commutator(&a, &s).unwrap().norm() <= 1e-12);
        }
    }

    #[test]
    fn equal_unit_ratios_give_kronecker_sum_diagonal() {
        let c = cp(1.0, 1.0, 0.0);
        let bz = &build_controls(&c)[2];
        let m = [1.0, 0.0, -1.0];
        for a in 0..3 {
            for b in 0..3 {
                let k = a * 3 + b;
                assert_eq!(bz.get(k, k), C64::new(0.0, -(m[a] + m[b])));
            }
        }
        assert!(bz.as_matrix().iter().enumerate().all(|(idx, z)| idx % 10 == 0 || *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn vanishing_second_ratio() {
        let c = cp(1.7, 0.0, 0.3);
        let b = build_su3_basis();
        let controls = build_controls(&c);
        for (bv, s) in controls.iter().zip(b.sbars()) {
            let expected = tensor(s, &b.identity).scale_re(1.7);
            assert!((bv - &expected).norm() == 0.0);
        }
    }

    #[test]
    fn hamiltonian_properties() {
        let c = cp(1.0, 2.0, 0.5);
        let h0 = hamiltonian_at(&c, [0.0; 3]);
        assert_eq!(h0, build_drift(&c).scale(I));
        for u in [[0.3, -1.0, 2.0], [5.0, 0.0, -0.1]] {
            let h = hamiltonian_at(&c, u);
            assert!(h.is_hermitian(1e-13));
            assert!(h.trace().norm() <= 1e-13);
        }
    }

    #[test]
    fn maximally_mixed_has_zero_magnetization() {
        let m = magnetization(&DensityMatrix::maximally_mixed());
        assert!(m.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn both_spins_up_along_z() {
        // j_z = -diag(1, 0, -1): the m = +1 state of each spin is basis index 2.
        let up_up = DensityMatrix::basis_state(2 * 3 + 2);
        assert!((magnetization(&up_up)[2] - 2.0).abs() < 1e-15);
        let down_down = DensityMatrix::basis_state(0);
        assert!((magnetization(&down_down)[2] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn random_state_is_valid_and_deterministic() {
        let a = random_density_matrix(11);
        let b = random_density_matrix(11);
        assert_eq!(a, b);
        assert!((a.matrix().trace().re - 1.0).abs() < 1e-12);
        assert!(a.eigenvalues()[0] >= -1e-12);
        assert!(!a.is_scalar());
        assert!(DensityMatrix::new(a.matrix().clone()).is_ok());
        assert_ne!(random_density_matrix(12), a);
    }

    #[test]
    fn magnetization_is_linear() {
        let r1 = random_density_matrix(1);
        let r2 = random_density_matrix(2);
        let alpha = 0.3;
        let mut mix = r1.matrix().scale_re(alpha);
        mix.axpy_re(1.0 - alpha, r2.matrix());
        let mixed = DensityMatrix::new(mix).unwrap();
        let (m1, m2, m) = (magnetization(&r1), magnetization(&r2), magnetization(&mixed));
        for v in 0..3 {
            assert!((m[v] - (alpha * m1[v] + (1.0 - alpha) * m2[v])).abs() < 1e-14);
        }
    }

    #[test]
    fn state_validation() {
        let not_psd = ComplexMatrix::from_diagonal(
            &[2.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0].map(|x| C64::new(x, 0.0)),
        );
        assert!(DensityMatrix::new(not_psd).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::identity(9)).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::identity(3).scale_re(1.0 / 3.0)).is_err());
        let scalar = DensityMatrix::maximally_mixed();
        assert!(scalar.is_scalar());
        assert!(SpinPairModel::new(cp(1.0, 2.0, 0.5), scalar).is_err());
        assert!(SpinPairModel::new(cp(f64::NAN, 2.0, 0.5), random_density_matrix(0)).is_err());
    }

    #[test]
    fn thermal_state_is_valid() {
        let rho = thermal_state(&cp(1.0, 2.0, 0.5), 0.5).unwrap();
        assert!(!rho.is_scalar());
        assert!(rho.matrix().is_hermitian(1e-14));
    }
}
