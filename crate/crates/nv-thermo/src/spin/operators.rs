//! Spin-1 operator algebra on complex Hermitian matrices.
//!
//! Basis convention: m = (+1, 0, -1) for both the electronic spin S = 1 and
//! the 14N nuclear spin I = 1. Product-space operators are ordered
//! electron (x) nucleus, so a 9x9 index is 3*i_e + i_n.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = nalgebra::DVector<Complex64>;

const SQRT2_INV: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Which spin-1 species an operator acts on. Both share the same matrices;
/// the tag only documents intent at call sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    /// Electronic spin S = 1.
    S1,
    /// 14N nuclear spin I = 1.
    I1,
}

/// Complex square matrix tagged as Hermitian, with the spin-space dimension
/// it lives in (3 for one spin-1, 9 for electron (x) nucleus).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinMatrix {
    mat: CMatrix,
}

impl SpinMatrix {
    /// Relative Hermiticity tolerance enforced on construction.
    pub const HERMITICITY_RTOL: f64 = 1e-12;

    /// Wrap a matrix, checking squareness and Hermiticity.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Config(format!(
                "spin matrix must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let asym = max_asymmetry(&mat);
        let scale = max_abs(&mat).max(f64::MIN_POSITIVE);
        if asym > Self::HERMITICITY_RTOL * scale {
            return Err(Error::NonHermitian {
                max_asymmetry: asym,
                tolerance: Self::HERMITICITY_RTOL * scale,
            });
        }
        Ok(Self { mat })
    }

    /// Wrap a matrix that is Hermitian by construction.
    pub(crate) fn new_unchecked(mat: CMatrix) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }

    pub fn from_rows(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Config(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(CMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Largest |H - H^dag| entry.
    pub fn max_asymmetry(&self) -> f64 {
        max_asymmetry(&self.mat)
    }

    /// Largest |entry|.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.mat)
    }

    /// A * B on equal dimensions (not Hermitian in general, so this returns
    /// the raw matrix).
    pub fn mul(&self, other: &SpinMatrix) -> CMatrix {
        &self.mat * &other.mat
    }

    /// Real expectation value <state| M |state>.
    pub fn expectation(&self, state: &CVector) -> f64 {
        let v = &self.mat * state;
        state.dotc(&v).re
    }

    /// Kronecker product, ordered self (x) other.
    pub fn kron(&self, other: &SpinMatrix) -> SpinMatrix {
        SpinMatrix::new_unchecked(self.mat.kronecker(&other.mat))
    }

    /// Linear combination helper: self + c * other.
    pub fn add_scaled(&self, other: &SpinMatrix, c: f64) -> SpinMatrix {
        SpinMatrix::new_unchecked(&self.mat + &other.mat * Complex64::new(c, 0.0))
    }

    pub fn scale(&self, c: f64) -> SpinMatrix {
        SpinMatrix::new_unchecked(&self.mat * Complex64::new(c, 0.0))
    }
}

fn max_asymmetry(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn im(x: f64) -> Complex64 {
    Complex64::new(0.0, x)
}

/// Standard spin-1 angular-momentum matrices (Sx, Sy, Sz) in the
/// m = (+1, 0, -1) basis, in units of hbar.
pub fn spin_operators(_spin: Spin) -> (SpinMatrix, SpinMatrix, SpinMatrix) {
    let z = re(0.0);
    let sx = SpinMatrix::new_unchecked(CMatrix::from_row_slice(
        3,
        3,
        &[
            z,
            re(SQRT2_INV),
            z,
            re(SQRT2_INV),
            z,
            re(SQRT2_INV),
            z,
            re(SQRT2_INV),
            z,
        ],
    ));
    let sy = SpinMatrix::new_unchecked(CMatrix::from_row_slice(
        3,
        3,
        &[
            z,
            im(-SQRT2_INV),
            z,
            im(SQRT2_INV),
            z,
            im(-SQRT2_INV),
            z,
            im(SQRT2_INV),
            z,
        ],
    ));
    let sz = SpinMatrix::new_unchecked(CMatrix::from_row_slice(
        3,
        3,
        &[re(1.0), z, z, z, z, z, z, z, re(-1.0)],
    ));
    (sx, sy, sz)
}

/// 3x3 identity.
pub fn identity3() -> SpinMatrix {
    SpinMatrix::new_unchecked(CMatrix::identity(3, 3))
}

/// Basis-change matrix from the m = (+1, 0, -1) basis to the
/// {|0>, |->, |+>} basis with |+-> = (|+1> +- |-1>)/sqrt(2).
///
/// Rows of the returned matrix are the new basis vectors expressed in the m
/// basis, so H_new = U H U^dag.
pub fn zero_minus_plus_basis() -> CMatrix {
    let z = re(0.0);
    CMatrix::from_row_slice(
        3,
        3,
        &[
            z,
            re(1.0),
            z, // |0>
            re(SQRT2_INV),
            z,
            re(-SQRT2_INV), // |->
            re(SQRT2_INV),
            z,
            re(SQRT2_INV), // |+>
        ],
    )
}

/// Transform a Hamiltonian from the m basis to the {|0>, |->, |+>} basis.
pub fn to_zero_minus_plus(h: &SpinMatrix) -> SpinMatrix {
    let u = zero_minus_plus_basis();
    SpinMatrix::new_unchecked(&u * h.matrix() * u.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sz_is_diagonal_plus_zero_minus() {
        let (_, _, sz) = spin_operators(Spin::S1);
        let m = sz.matrix();
        assert_relative_eq!(m[(0, 0)].re, 1.0);
        assert_relative_eq!(m[(1, 1)].re, 0.0);
        assert_relative_eq!(m[(2, 2)].re, -1.0);
    }

    #[test]
    fn commutator_sx_sy_is_i_sz() {
        let (sx, sy, sz) = spin_operators(Spin::S1);
        let comm = sx.mul(&sy) - sy.mul(&sx);
        let expected = sz.matrix() * Complex64::new(0.0, 1.0);
        for (a, b) in comm.iter().zip(expected.iter()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn sx_eigenvalues_are_minus1_0_plus1() {
        let (sx, _, _) = spin_operators(Spin::S1);
        let eig = crate::spin::eigensolve(&sx).unwrap();
        assert_relative_eq!(eig.values[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(eig.values[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(eig.values[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sz_squared_is_diag_1_0_1() {
        let (_, _, sz) = spin_operators(Spin::S1);
        let sz2 = sz.mul(&sz);
        for i in 0..3 {
            let want = if i == 1 { 0.0 } else { 1.0 };
            assert_relative_eq!(sz2[(i, i)].re, want);
        }
    }

    #[test]
    fn all_operators_hermitian() {
        for spin in [Spin::S1, Spin::I1] {
            let (sx, sy, sz) = spin_operators(spin);
            for op in [&sx, &sy, &sz] {
                assert!(op.max_asymmetry() < 1e-15);
            }
        }
    }

    #[test]
    fn non_hermitian_rejected_with_diagnostic() {
        let z = Complex64::new(0.0, 0.0);
        let bad = CMatrix::from_row_slice(
            2,
            2,
            &[z, Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0), z],
        );
        match SpinMatrix::new(bad) {
            Err(Error::NonHermitian { max_asymmetry, .. }) => {
                assert_relative_eq!(max_asymmetry, 0.5, epsilon = 1e-15);
            }
            other => panic!("expected NonHermitian, got {other:?}"),
        }
    }

    #[test]
    fn basis_change_is_unitary() {
        let u = zero_minus_plus_basis();
        let prod = &u * u.adjoint();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }
}
