//! Dense complex linear algebra on small bipartite Hilbert spaces.
//!
//! Composite index convention: `|e_i> ⊗ |f_j>` sits at `i * dim_b + j`, so the
//! two-qubit basis order is `|00>, |01>, |10>, |11>`.

mod eigen;
mod matrix;
mod random;

pub use eigen::{eig_hermitian, eigenvalues_hermitian, eigh, EigenOrder, Spectrum, DEGENERACY_TOL};
pub use matrix::{ComplexMatrix, C64, ONE, ZERO};
pub use random::{
    random_density, random_hermitian_matrix, random_local_unitary, random_pure_state,
    random_state_vector, random_unitary,
};

use crate::error::{BatteryError, Result};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Self-adjoint operator (Hamiltonians, observables).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(BatteryError::DimensionMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", matrix.rows(), matrix.cols()),
            });
        }
        let dev = matrix.hermitian_deviation();
        if dev > HERMITIAN_TOL * matrix.max_abs().max(1.0) {
            return Err(BatteryError::NotHermitian { deviation: dev });
        }
        Ok(Self { matrix })
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self {
            matrix: ComplexMatrix::from_real_diag(diag),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Largest entry modulus, used to make tolerances scale-free.
    pub fn norm_max(&self) -> f64 {
        self.matrix.max_abs()
    }

    pub fn spectrum(&self, order: EigenOrder) -> Spectrum {
        eig_hermitian(self, order)
    }
}

/// Hermitian, positive semidefinite, unit-trace operator on `H_A ⊗ H_B`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    dim_a: usize,
    dim_b: usize,
    matrix: ComplexMatrix,
}

impl DensityOperator {
    pub fn new(dim_a: usize, dim_b: usize, matrix: ComplexMatrix) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(BatteryError::InvalidInput(
                "subsystem dimensions must be positive".into(),
            ));
        }
        let n = dim_a * dim_b;
        if matrix.rows() != n || matrix.cols() != n {
            return Err(BatteryError::DimensionMismatch {
                expected: format!("{n}x{n}"),
                found: format!("{}x{}", matrix.rows(), matrix.cols()),
            });
        }
        let dev = matrix.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(BatteryError::NotHermitian { deviation: dev });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(BatteryError::TraceNotOne { trace: tr.re });
        }
        let min = eigenvalues_hermitian(&matrix)[0];
        if min < -PSD_TOL {
            return Err(BatteryError::NotPositive {
                min_eigenvalue: min,
            });
        }
        Ok(Self {
            dim_a,
            dim_b,
            matrix,
        })
    }

    /// Wraps a matrix already known to be a valid state.
    pub(crate) fn from_trusted(dim_a: usize, dim_b: usize, matrix: ComplexMatrix) -> Self {
        debug_assert_eq!(matrix.rows(), dim_a * dim_b);
        Self {
            dim_a,
            dim_b,
            matrix,
        }
    }

    /// Single-system state, stored with a trivial second factor.
    pub fn single(matrix: ComplexMatrix) -> Result<Self> {
        let d = matrix.rows();
        Self::new(d, 1, matrix)
    }

    pub fn pure(dim_a: usize, dim_b: usize, amplitudes: &[C64]) -> Result<Self> {
        if amplitudes.len() != dim_a * dim_b {
            return Err(BatteryError::DimensionMismatch {
                expected: format!("{} amplitudes", dim_a * dim_b),
                found: format!("{} amplitudes", amplitudes.len()),
            });
        }
        let norm_sq: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > TRACE_TOL {
            return Err(BatteryError::NotNormalized { norm_sq });
        }
        Ok(Self::from_trusted(
            dim_a,
            dim_b,
            ComplexMatrix::projector(amplitudes),
        ))
    }

    pub fn maximally_mixed(dim_a: usize, dim_b: usize) -> Self {
        let n = dim_a * dim_b;
        Self::from_trusted(
            dim_a,
            dim_b,
            ComplexMatrix::identity(n).scale_real(1.0 / n as f64),
        )
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn spectrum(&self, order: EigenOrder) -> Spectrum {
        eig_hermitian(
            &HermitianOperator {
                matrix: self.matrix.clone(),
            },
            order,
        )
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v = eigenvalues_hermitian(&self.matrix);
        v.reverse();
        v
    }

    /// U ρ U†; unitary conjugation preserves validity.
    pub fn evolve(&self, u: &UnitaryOperator) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(BatteryError::DimensionMismatch {
                expected: format!("{}-dimensional unitary", self.dim()),
                found: format!("{}-dimensional unitary", u.dim()),
            });
        }
        Ok(Self::from_trusted(
            self.dim_a,
            self.dim_b,
            self.matrix.conjugate_by(u.matrix()),
        ))
    }

    /// ρ_A ⊗ ρ_B for single-system factors.
    pub fn product(a: &DensityOperator, b: &DensityOperator) -> Self {
        Self::from_trusted(a.dim(), b.dim(), a.matrix.kron(&b.matrix))
    }

    /// (1 - t) self + t other.
    pub fn mix(&self, other: &DensityOperator, t: f64) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        let m = &self.matrix.scale_real(1.0 - t) + &other.matrix.scale_real(t);
        Self::from_trusted(self.dim_a, self.dim_b, m)
    }

    pub fn reduced(&self, keep: Subsystem) -> DensityOperator {
        let m = partial_trace(self, keep);
        let d = m.rows();
        DensityOperator::from_trusted(d, 1, m)
    }
}

/// Operator with U U† = I.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOperator {
    matrix: ComplexMatrix,
}

impl UnitaryOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(BatteryError::DimensionMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", matrix.rows(), matrix.cols()),
            });
        }
        let n = matrix.rows();
        let dev = (&matrix * &matrix.adjoint()).max_abs_diff(&ComplexMatrix::identity(n));
        if dev > UNITARY_TOL {
            return Err(BatteryError::NotUnitary { deviation: dev });
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn kron(&self, other: &UnitaryOperator) -> UnitaryOperator {
        UnitaryOperator {
            matrix: self.matrix.kron(&other.matrix),
        }
    }

    pub fn unitarity_error(&self) -> f64 {
        (&self.matrix * &self.matrix.adjoint()).max_abs_diff(&ComplexMatrix::identity(self.dim()))
    }
}

pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

pub fn partial_trace(rho: &DensityOperator, keep: Subsystem) -> ComplexMatrix {
    partial_trace_matrix(rho.matrix(), rho.dim_a(), rho.dim_b(), keep)
        .expect("density operator dimensions are consistent")
}

/// Partial trace of an arbitrary operator on `C^{dim_a} ⊗ C^{dim_b}`.
pub fn partial_trace_matrix(
    m: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    keep: Subsystem,
) -> Result<ComplexMatrix> {
    let n = dim_a * dim_b;
    if m.rows() != n || m.cols() != n {
        return Err(BatteryError::DimensionMismatch {
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    Ok(match keep {
        Subsystem::A => {
            let mut out = ComplexMatrix::zeros(dim_a, dim_a);
            for i in 0..dim_a {
                for k in 0..dim_a {
                    out[(i, k)] = (0..dim_b).map(|j| m[(i * dim_b + j, k * dim_b + j)]).sum();
                }
            }
            out
        }
        Subsystem::B => {
            let mut out = ComplexMatrix::zeros(dim_b, dim_b);
            for j in 0..dim_b {
                for l in 0..dim_b {
                    out[(j, l)] = (0..dim_a).map(|i| m[(i * dim_b + j, i * dim_b + l)]).sum();
                }
            }
            out
        }
    })
}

pub fn partial_transpose(rho: &DensityOperator, on: Subsystem) -> ComplexMatrix {
    partial_transpose_matrix(rho.matrix(), rho.dim_a(), rho.dim_b(), on)
        .expect("density operator dimensions are consistent")
}

/// Entry `(ij, kl)` maps to `(il, kj)` when transposing B, `(kj, il)` for A.
pub fn partial_transpose_matrix(
    m: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    on: Subsystem,
) -> Result<ComplexMatrix> {
    let n = dim_a * dim_b;
    if m.rows() != n || m.cols() != n {
        return Err(BatteryError::DimensionMismatch {
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..dim_a {
        for j in 0..dim_b {
            for k in 0..dim_a {
                for l in 0..dim_b {
                    out[(i * dim_b + j, k * dim_b + l)] = match on {
                        Subsystem::B => m[(i * dim_b + l, k * dim_b + j)],
                        Subsystem::A => m[(k * dim_b + j, i * dim_b + l)],
                    };
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn bell() -> DensityOperator {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        DensityOperator::pure(2, 2, &[c(r), ZERO, ZERO, c(r)]).unwrap()
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_real_diag(&[1.0, -1.0])
    }

    #[test]
    fn kron_identity_and_sigma_z() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(tensor_product(&i2, &i2), ComplexMatrix::identity(4));
        assert_eq!(
            tensor_product(&sigma_z(), &i2),
            ComplexMatrix::from_real_diag(&[1.0, 1.0, -1.0, -1.0])
        );
        let ha = ComplexMatrix::from_real_diag(&[2.0, -2.0]);
        let hb = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
        let h = &tensor_product(&ha, &i2) + &tensor_product(&i2, &hb);
        assert_eq!(h, ComplexMatrix::from_real_diag(&[3.0, 1.0, -1.0, -3.0]));
    }

    #[test]
    fn partial_trace_examples() {
        let ket00 = DensityOperator::pure(2, 2, &[ONE, ZERO, ZERO, ZERO]).unwrap();
        assert_eq!(
            partial_trace(&ket00, Subsystem::A),
            ComplexMatrix::from_real_diag(&[1.0, 0.0])
        );
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        assert!(partial_trace(&bell(), Subsystem::A).max_abs_diff(&half) < 1e-15);
        assert!(partial_trace(&bell(), Subsystem::B).max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn partial_trace_of_c0_c3_state() {
        // |c0|^2 = 0.8, |c3|^2 = 0.2 with a complex relative phase.
        let c0 = C64::from_polar(0.8_f64.sqrt(), 0.3);
        let c3 = C64::from_polar(0.2_f64.sqrt(), -1.1);
        let rho = DensityOperator::pure(2, 2, &[c0, ZERO, ZERO, c3]).unwrap();
        // Tr_B by hand: <0|ρ_A|0> = |c0|^2, <1|ρ_A|1> = |c3|^2, coherence needs equal B index.
        let expected = ComplexMatrix::from_real_diag(&[0.8, 0.2]);
        assert!(partial_trace(&rho, Subsystem::A).max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn partial_transpose_examples() {
        let pt = partial_transpose(&bell(), Subsystem::B);
        let mut ev = eigenvalues_hermitian(&pt);
        ev.sort_by(f64::total_cmp);
        let expected = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        let diag = DensityOperator::new(2, 2, ComplexMatrix::from_real_diag(&[0.1, 0.2, 0.3, 0.4]))
            .unwrap();
        assert_eq!(&partial_transpose(&diag, Subsystem::B), diag.matrix());
    }

    #[test]
    fn partial_transpose_of_product_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_density(2, 1, &mut rng);
        let b = random_density(3, 1, &mut rng);
        let prod = DensityOperator::product(&a, &b);
        let pt = partial_transpose(&prod, Subsystem::B);
        let expected = a.matrix().kron(&b.matrix().transpose());
        assert!(pt.max_abs_diff(&expected) < 1e-15);
        assert!(eigenvalues_hermitian(&pt)[0] > -1e-12);
    }

    #[test]
    fn density_validation() {
        let not_unit = ComplexMatrix::from_real_diag(&[0.5, 0.2, 0.1, 0.1]);
        assert!(matches!(
            DensityOperator::new(2, 2, not_unit),
            Err(BatteryError::TraceNotOne { .. })
        ));
        let negative = ComplexMatrix::from_real_diag(&[1.2, -0.2, 0.0, 0.0]);
        assert!(matches!(
            DensityOperator::new(2, 2, negative),
            Err(BatteryError::NotPositive { .. })
        ));
        assert!(matches!(
            DensityOperator::new(2, 3, ComplexMatrix::identity(4).scale_real(0.25)),
            Err(BatteryError::DimensionMismatch { .. })
        ));
        let mut skew = ComplexMatrix::identity(2).scale_real(0.5);
        skew[(0, 1)] = C64::new(0.0, 0.1);
        assert!(matches!(
            DensityOperator::new(2, 1, skew),
            Err(BatteryError::NotHermitian { .. })
        ));
    }

    #[test]
    fn unitary_validation() {
        assert!(UnitaryOperator::new(ComplexMatrix::identity(3)).is_ok());
        assert!(matches!(
            UnitaryOperator::new(ComplexMatrix::from_real_diag(&[1.0, 2.0])),
            Err(BatteryError::NotUnitary { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn partial_trace_preserves_trace(seed in any::<u64>(), da in 2usize..4, db in 2usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(da, db, &mut rng);
            for keep in [Subsystem::A, Subsystem::B] {
                let tr = partial_trace(&rho, keep).trace();
                prop_assert!((tr.re - 1.0).abs() < 1e-12 && tr.im.abs() < 1e-12);
            }
        }

        #[test]
        fn partial_transpose_is_involution(seed in any::<u64>(), da in 2usize..4, db in 2usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(da, db, &mut rng);
            for on in [Subsystem::A, Subsystem::B] {
                let once = partial_transpose(&rho, on);
                let twice = partial_transpose_matrix(&once, da, db, on).unwrap();
                prop_assert_eq!(&twice, rho.matrix());
                prop_assert!(once.hermitian_deviation() < 1e-15);
            }
        }

        #[test]
        fn eigh_reconstructs_random_4x4(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian_matrix(4, &mut rng);
            let s = eigh(&h, EigenOrder::Descending).unwrap();
            prop_assert!(s.reconstruct().max_abs_diff(&h) < 1e-10);
        }

        #[test]
        fn random_unitary_is_unitary(seed in any::<u64>(), n in 2usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            prop_assert!(random_unitary(n, &mut rng).unitarity_error() < 1e-10);
        }
    }
}
