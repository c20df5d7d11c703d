//! NV ground-state Hamiltonians in frequency units (Hz).

use super::operators::{identity3, spin_operators, Spin, SpinMatrix};
use crate::params::{MagneticField, NvParameters};

/// 3x3 electronic Hamiltonian in the m = (+1, 0, -1) basis:
///
/// H = D Sz^2 + (g mu_B / h) (Bx Sx + By Sy + Bz Sz)
pub fn build_electron_hamiltonian(p: &NvParameters, b: &MagneticField) -> SpinMatrix {
    let (sx, sy, sz) = spin_operators(Spin::S1);
    let gamma = p.gamma_hz_per_t();
    let sz2 = SpinMatrix::new_unchecked(sz.mul(&sz));
    sz2.scale(p.d_hz)
        .add_scaled(&sx, gamma * b.bx_t)
        .add_scaled(&sy, gamma * b.by_t)
        .add_scaled(&sz, gamma * b.bz_t)
}

/// 9x9 electron (x) 14N-nucleus Hamiltonian:
///
/// H = H_el (x) 1 + 1 (x) Q Iz^2 + A_par Sz(x)Iz + A_perp (Sx(x)Ix + Sy(x)Iy)
///
/// The nuclear Zeeman term (~3 kHz/mT) is omitted; it sits far below the
/// MHz-scale couplings and the 1.1 MHz optical linewidth this model feeds.
pub fn build_full_hamiltonian(p: &NvParameters, b: &MagneticField) -> SpinMatrix {
    let h_el = build_electron_hamiltonian(p, b);
    let (sx, sy, sz) = spin_operators(Spin::S1);
    let (ix, iy, iz) = spin_operators(Spin::I1);
    let id = identity3();

    let iz2 = SpinMatrix::new_unchecked(iz.mul(&iz));

    h_el.kron(&id)
        .add_scaled(&id.kron(&iz2), p.q_hz)
        .add_scaled(&sz.kron(&iz), p.a_par_hz)
        .add_scaled(&sx.kron(&ix), p.a_perp_hz)
        .add_scaled(&sy.kron(&iy), p.a_perp_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::eigensolve;
    use crate::spin::operators::to_zero_minus_plus;
    use approx::assert_relative_eq;

    #[test]
    fn zero_field_eigenvalues_are_0_d_d() {
        let p = NvParameters::default();
        let h = build_electron_hamiltonian(&p, &MagneticField::ZERO);
        let eig = eigensolve(&h).unwrap();
        assert!(eig.values[0].abs() < 1e-9 * p.d_hz);
        assert_relative_eq!(eig.values[1], p.d_hz, max_relative = 1e-9);
        assert_relative_eq!(eig.values[2], p.d_hz, max_relative = 1e-9);
    }

    #[test]
    fn axial_zeeman_splits_upper_levels() {
        let p = NvParameters::default();
        let bz = asserted_field(1e-3);
        let h = build_electron_hamiltonian(&p, &MagneticField::axial(bz));
        let eig = eigensolve(&h).unwrap();
        let gb = p.gamma_hz_per_t() * bz;
        assert!(eig.values[0].abs() < 1e-6);
        assert_relative_eq!(eig.values[1], p.d_hz - gb, max_relative = 1e-12);
        assert_relative_eq!(eig.values[2], p.d_hz + gb, max_relative = 1e-12);
    }

    fn asserted_field(b: f64) -> f64 {
        MagneticField::axial(b).validate().unwrap();
        b
    }

    /// Transverse field in the {|0>, |->, |+>} basis reproduces the
    /// textbook pattern: |0> couples only to |+> with element g mu_B B / h.
    #[test]
    fn transverse_matrix_in_zero_minus_plus_basis() {
        let p = NvParameters::default();
        let bx = 6e-3;
        let h = build_electron_hamiltonian(&p, &MagneticField::transverse(bx));
        let b = p.gamma_hz_per_t() * bx;
        assert_relative_eq!(b, 168.2e6, max_relative = 1e-3);

        // m basis: |0> couples to |+1> and |-1> with b / sqrt(2)
        let m = h.matrix();
        assert_relative_eq!(m[(0, 1)].re, b / 2.0_f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(m[(2, 1)].re, b / 2.0_f64.sqrt(), max_relative = 1e-12);

        let t = to_zero_minus_plus(&h);
        let t = t.matrix();
        // rows/cols ordered |0>, |->, |+>
        let d = p.d_hz;
        let expect = [
            [0.0, 0.0, b],
            [0.0, d, 0.0],
            [b, 0.0, d],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (t[(i, j)].re - expect[i][j]).abs() < 1e-4 * d.max(b),
                    "entry ({i},{j}) = {} want {}",
                    t[(i, j)].re,
                    expect[i][j]
                );
                assert!(t[(i, j)].im.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn decoupled_full_hamiltonian_is_threefold_degenerate() {
        let mut p = NvParameters::default();
        p.a_par_hz = f64::MIN_POSITIVE; // validate() wants > 0; negligible
        p.a_perp_hz = 0.0;
        p.q_hz = 0.0;
        let h = build_full_hamiltonian(&p, &MagneticField::ZERO);
        let eig = eigensolve(&h).unwrap();
        for k in 0..3 {
            assert!(eig.values[k].abs() < 1e-3);
        }
        for k in 3..9 {
            assert_relative_eq!(eig.values[k], p.d_hz, max_relative = 1e-12);
        }
    }

    /// Axial field: the m_s = 0 -> +1 transition group splits into three
    /// hyperfine lines separated by A_par.
    #[test]
    fn axial_field_hyperfine_triplet() {
        let p = NvParameters::default();
        let h = build_full_hamiltonian(&p, &MagneticField::axial(2e-3));
        let eig = eigensolve(&h).unwrap();
        // lower manifold: three m_s = 0 states near zero energy
        let lower: Vec<f64> = eig.values[0..3].to_vec();
        // upper 0->+1 group: the top three levels
        let upper: Vec<f64> = eig.values[6..9].to_vec();
        let mut lines: Vec<f64> = upper.iter().map(|u| u - lower[1]).collect();
        lines.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s1 = lines[1] - lines[0];
        let s2 = lines[2] - lines[1];
        assert_relative_eq!(s1, p.a_par_hz, max_relative = 0.01);
        assert_relative_eq!(s2, p.a_par_hz, max_relative = 0.01);
    }

    #[test]
    fn assembled_hamiltonians_are_hermitian() {
        let p = NvParameters::default();
        for b in [
            MagneticField::ZERO,
            MagneticField::transverse(6e-3),
            MagneticField::axial(2e-3),
            MagneticField::new(1e-3, 2e-3, -3e-3),
        ] {
            let h3 = build_electron_hamiltonian(&p, &b);
            let h9 = build_full_hamiltonian(&p, &b);
            assert!(h3.max_asymmetry() <= 1e-12 * h3.max_abs());
            assert!(h9.max_asymmetry() <= 1e-12 * h9.max_abs());
        }
    }
}
