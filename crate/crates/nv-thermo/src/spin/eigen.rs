//! Hermitian eigendecomposition with a deterministic ordering convention.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::operators::{CMatrix, CVector, SpinMatrix};
use crate::error::{Error, Result};

/// Eigenvalues (real, Hz, ascending) and column-aligned orthonormal
/// eigenvectors of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvector for the k-th (ascending) eigenvalue.
    pub fn vector(&self, k: usize) -> CVector {
        CVector::from_column_slice(self.vectors.column(k).as_slice())
    }

    /// Residual max_k ||H v_k - lambda_k v_k||.
    pub fn max_residual(&self, h: &SpinMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.dim() {
            let v = self.vector(k);
            let r = h.matrix() * &v - &v * Complex64::new(self.values[k], 0.0);
            worst = worst.max(r.norm());
        }
        worst
    }
}

/// Diagonalize a Hermitian matrix.
///
/// Eigenvalues come back ascending. Each eigenvector's global phase is fixed
/// by making its largest-magnitude component (lowest index on near-ties)
/// real and positive, so repeated runs and degenerate subspaces produce
/// reproducible vectors.
pub fn eigensolve(h: &SpinMatrix) -> Result<EigenSystem> {
    // SpinMatrix enforces Hermiticity on construction, but h may have been
    // assembled through unchecked arithmetic; re-check so the error carries
    // the asymmetry diagnostic.
    let asym = h.max_asymmetry();
    let tol = SpinMatrix::HERMITICITY_RTOL * h.max_abs().max(f64::MIN_POSITIVE);
    if asym > tol {
        return Err(Error::NonHermitian {
            max_asymmetry: asym,
            tolerance: tol,
        });
    }

    let eig = h.matrix().clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("eigenvalues are finite")
    });

    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut col: Vec<Complex64> = eig.eigenvectors.column(src).iter().cloned().collect();
        fix_phase(&mut col);
        for (i, z) in col.iter().enumerate() {
            vectors[(i, dst)] = *z;
        }
    }
    Ok(EigenSystem { values, vectors })
}

/// Rotate the global phase so the largest-magnitude component (lowest index
/// within a 1e-12 relative tie window) is real and positive.
fn fix_phase(col: &mut [Complex64]) {
    let mut best = 0;
    let mut best_norm = 0.0_f64;
    for (i, z) in col.iter().enumerate() {
        let n = z.norm();
        if n > best_norm * (1.0 + 1e-12) {
            best = i;
            best_norm = n;
        }
    }
    if best_norm == 0.0 {
        return;
    }
    let phase = col[best] / Complex64::new(best_norm, 0.0);
    let rot = phase.conj();
    for z in col.iter_mut() {
        *z *= rot;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::operators::{spin_operators, Spin};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn random_hermitian(dim: usize, seed: u64) -> SpinMatrix {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let mut m = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in (i + 1)..dim {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        SpinMatrix::new(m).unwrap()
    }

    #[test]
    fn diagonal_matrix_recovered() {
        let d = 2.87e9;
        let m = SpinMatrix::from_rows(
            3,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(d, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(d, 0.0),
            ],
        )
        .unwrap();
        let eig = eigensolve(&m).unwrap();
        assert_relative_eq!(eig.values[0], 0.0);
        assert_relative_eq!(eig.values[1], d);
        assert_relative_eq!(eig.values[2], d);
        // identity vectors with the deterministic phase convention
        for k in 0..3 {
            let v = eig.vector(k);
            let mut found = 0;
            for i in 0..3 {
                if v[i].norm() > 0.5 {
                    found += 1;
                    assert!(v[i].re > 0.0 && v[i].im.abs() < 1e-14);
                }
            }
            assert_eq!(found, 1);
        }
    }

    /// Eq.-4-shaped matrix: closed-form roots of the {|0>, |+>} block are
    /// (D -+ sqrt(D^2 + 4 b^2)) / 2.
    #[test]
    fn two_level_block_matches_closed_form() {
        let d = 2.87e9;
        let b = 168.2e6;
        let z = Complex64::new(0.0, 0.0);
        let m = SpinMatrix::from_rows(
            3,
            &[
                z,
                z,
                Complex64::new(b, 0.0),
                z,
                Complex64::new(d, 0.0),
                z,
                Complex64::new(b, 0.0),
                z,
                Complex64::new(d, 0.0),
            ],
        )
        .unwrap();
        let eig = eigensolve(&m).unwrap();
        let disc = (d * d + 4.0 * b * b).sqrt();
        let lo = 0.5 * (d - disc);
        let hi = 0.5 * (d + disc);
        assert_relative_eq!(eig.values[0], lo, max_relative = 1e-12);
        assert_relative_eq!(eig.values[1], d, max_relative = 1e-12);
        assert_relative_eq!(eig.values[2], hi, max_relative = 1e-12);
        // second-order check from the spec of the perturbative regime:
        // lowest eigenvalue ~ -(168.2 MHz)^2 / 2870 MHz ~ -9.86 MHz
        let second_order = -b * b / d;
        assert!((eig.values[0] - second_order).abs() < 4e4); // quartic remainder ~34 kHz
    }

    #[test]
    fn random_hermitian_reconstruction() {
        for seed in 0..4 {
            let h = random_hermitian(9, seed);
            let eig = eigensolve(&h).unwrap();
            // || V L V^dag - H || < 1e-9 ||H||
            let mut vl = eig.vectors.clone();
            for k in 0..9 {
                let lam = Complex64::new(eig.values[k], 0.0);
                for i in 0..9 {
                    vl[(i, k)] *= lam;
                }
            }
            let recon = &vl * eig.vectors.adjoint();
            let diff = (&recon - h.matrix()).norm();
            assert!(diff < 1e-9 * h.matrix().norm());
            assert!(eig.max_residual(&h) < 1e-9 * h.matrix().norm());

            // orthonormality to 1e-10
            let gram = eig.vectors.adjoint() * &eig.vectors;
            for i in 0..9 {
                for j in 0..9 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let (sx, sy, _) = spin_operators(Spin::S1);
        // sx * sy is not Hermitian
        let bad = SpinMatrix::new_unchecked(sx.mul(&sy));
        match eigensolve(&bad) {
            Err(Error::NonHermitian { max_asymmetry, .. }) => assert!(max_asymmetry > 0.1),
            other => panic!("expected NonHermitian, got {other:?}"),
        }
    }
}
