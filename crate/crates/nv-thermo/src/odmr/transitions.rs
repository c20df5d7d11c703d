//! Microwave transition enumeration from the 9x9 exact eigensystem.

use num_complex::Complex64;

use crate::error::Result;
use crate::params::{MagneticField, NvParameters};
use crate::spin::{
    build_full_hamiltonian, eigensolve, identity3, spin_operators, CVector, Spin, Transition,
    TransitionLabel, TransitionSet,
};

use super::orientation::{LabVector, OrientationSet};

/// Amplitudes below this fraction of the strongest line are dropped from
/// the returned set; they carry no spectral weight.
const AMPLITUDE_FLOOR: f64 = 1e-9;

/// Enumerate all m_s 0 -> +-1 electronic transitions of the 9x9 Hamiltonian
/// in one NV frame.
///
/// The three lowest eigenstates form the m_s = 0-like manifold (equally
/// populated in CW operation); transitions connect them to the six upper
/// states. Drive amplitudes use the unpolarized in-plane operator
/// |<f|Sx|i>|^2 + |<f|Sy|i>|^2, which represents a microwave field of
/// unspecified polarization in the NV transverse plane. Amplitudes are not
/// normalized here so per-orientation sets can be combined first.
pub fn transitions_for_field(p: &NvParameters, b: &MagneticField) -> Result<TransitionSet> {
    p.validate()?;
    b.validate()?;
    let h = build_full_hamiltonian(p, b);
    let eig = eigensolve(&h)?;

    let (sx, sy, sz) = spin_operators(Spin::S1);
    let id = identity3();
    let sx9 = sx.kron(&id);
    let sy9 = sy.kron(&id);
    let sz9 = sz.kron(&id);
    let (_, _, iz) = spin_operators(Spin::I1);
    let iz9 = id.kron(&iz);

    // m_s = 0 character: <Sz^2> close to 0 marks the lower manifold.
    let sz2_9 = crate::spin::SpinMatrix::new_unchecked(sz9.mul(&sz9));
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for k in 0..9 {
        let v = eig.vector(k);
        if sz2_9.expectation(&v) < 0.5 {
            lower.push(k);
        } else {
            upper.push(k);
        }
    }

    let transverse_dominant = b.perp_t() >= b.bz_t.abs();
    let mut transitions = Vec::new();
    for &i in &lower {
        let vi = eig.vector(i);
        for &j in &upper {
            let vj = eig.vector(j);
            let ax = drive_element(&sx9, &vi, &vj);
            let ay = drive_element(&sy9, &vi, &vj);
            let amplitude = ax + ay;
            let frequency_hz = eig.values[j] - eig.values[i];
            let label = classify(
                &vj,
                &vi,
                &sz9,
                &iz9,
                transverse_dominant,
            );
            transitions.push(Transition {
                frequency_hz,
                amplitude,
                label,
            });
        }
    }
    let max_amp = transitions.iter().fold(0.0_f64, |m, t| m.max(t.amplitude));
    transitions.retain(|t| t.amplitude > AMPLITUDE_FLOOR * max_amp);
    Ok(TransitionSet::new(transitions))
}

fn drive_element(op: &crate::spin::SpinMatrix, vi: &CVector, vj: &CVector) -> f64 {
    let w = op.matrix() * vi;
    vj.dotc(&w).norm_sqr()
}

/// Label a transition by the character of its states.
///
/// Transverse-dominant field: the upper state is sorted into the
/// |->-like (DegPairLow) or |+>-like (DegPairHigh) branch by its overlap
/// with the |-> (x) nuclear subspace. Axial-dominant field: the conserved
/// nuclear projection <Iz> of the pair names the hyperfine line.
fn classify(
    upper: &CVector,
    lower: &CVector,
    sz9: &crate::spin::SpinMatrix,
    iz9: &crate::spin::SpinMatrix,
    transverse_dominant: bool,
) -> TransitionLabel {
    if transverse_dominant {
        // |<-,m | psi>|^2 summed over nuclear m: |-> = (|+1> - |-1>)/sqrt(2)
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut p_minus = 0.0;
        for m in 0..3 {
            // electron index 0 = m_s +1, 2 = m_s -1; nuclear index m
            let amp = upper[m] * Complex64::new(s, 0.0)
                - upper[6 + m] * Complex64::new(s, 0.0);
            p_minus += amp.norm_sqr();
        }
        if p_minus > 0.5 {
            TransitionLabel::DegPairLow
        } else if p_minus < 0.5 {
            TransitionLabel::DegPairHigh
        } else {
            TransitionLabel::Other
        }
    } else {
        let mi_upper = iz9.expectation(upper);
        let mi_lower = iz9.expectation(lower);
        // nuclear projection must be conserved for a clean hyperfine label
        if (mi_upper - mi_lower).abs() > 0.1 || sz9.expectation(upper).abs() < 0.5 {
            return TransitionLabel::Other;
        }
        match mi_upper.round() as i8 {
            -1 => TransitionLabel::HyperfineMm1,
            0 => TransitionLabel::HyperfineM0,
            1 => TransitionLabel::HyperfineMp1,
            _ => TransitionLabel::Other,
        }
    }
}

/// Transitions for a lab-frame field over a set of NV orientations.
///
/// The field is decomposed into each NV frame; per-frame transition sets
/// are weighted by orientation population and merged, then normalized so
/// the strongest line has amplitude 1.
pub fn transitions_for_lab_field(
    p: &NvParameters,
    b_lab: &LabVector,
    orientations: &OrientationSet,
) -> Result<TransitionSet> {
    orientations.validate()?;
    let mut all = Vec::new();
    for (frame, &w) in orientations.frames.iter().zip(orientations.weights.iter()) {
        if w == 0.0 {
            continue;
        }
        let b_nv = frame.to_nv_frame(b_lab);
        let set = transitions_for_field(p, &b_nv)?;
        for mut t in set.transitions {
            t.amplitude *= w;
            all.push(t);
        }
    }
    Ok(TransitionSet::new(all).normalized())
}
