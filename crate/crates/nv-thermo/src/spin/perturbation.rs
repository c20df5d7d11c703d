//! Second-order degenerate perturbation theory for a transverse field.
//!
//! With B perpendicular to the NV axis (taken along x), the zero-field
//! eigenstates {|0>, |->, |+>} mix into
//!
//!   |1> = (|0> - eps |+>) / sqrt(1 + eps^2)      E1 = -delta
//!   |2> = |->                                    E2 = D
//!   |3> = (eps |0> + |+>) / sqrt(1 + eps^2)      E3 = D + delta
//!
//! with eps = (g mu_B / h) B_perp / D and delta = eps^2 D. Both microwave
//! transitions from |1> shift upward: D + delta and D + 2 delta.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operators::{spin_operators, CVector, Spin};
use crate::error::{Error, Result};
use crate::params::NvParameters;

/// Validity guard for the perturbative formulas.
pub const PERTURBATIVE_RATIO_LIMIT: f64 = 0.1;

/// Classification of a spectral line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionLabel {
    /// Lower transition of the transverse-field pair (to the |2> = |->-like state).
    DegPairLow,
    /// Upper transition of the transverse-field pair (to the |3>-like state).
    DegPairHigh,
    /// Axial-regime hyperfine line with nuclear projection m_I = -1.
    HyperfineMm1,
    /// Axial-regime hyperfine line with m_I = 0.
    HyperfineM0,
    /// Axial-regime hyperfine line with m_I = +1.
    HyperfineMp1,
    Other,
}

/// One microwave transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub frequency_hz: f64,
    /// Relative drive amplitude, normalized to 1 for the strongest line of a set.
    pub amplitude: f64,
    pub label: TransitionLabel,
}

/// A set of transitions, sorted by frequency.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionSet {
    pub transitions: Vec<Transition>,
}

impl TransitionSet {
    pub fn new(mut transitions: Vec<Transition>) -> Self {
        transitions.sort_by(|a, b| a.frequency_hz.partial_cmp(&b.frequency_hz).unwrap());
        Self { transitions }
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.frequency_hz).collect()
    }

    pub fn min_frequency(&self) -> Option<f64> {
        self.transitions.first().map(|t| t.frequency_hz)
    }

    pub fn max_frequency(&self) -> Option<f64> {
        self.transitions.last().map(|t| t.frequency_hz)
    }

    /// Rescale amplitudes so the strongest is 1.
    pub fn normalized(mut self) -> Self {
        let max = self
            .transitions
            .iter()
            .fold(0.0_f64, |m, t| m.max(t.amplitude));
        if max > 0.0 {
            for t in &mut self.transitions {
                t.amplitude /= max;
            }
        }
        self
    }

    /// Transitions carrying a given label.
    pub fn with_label(&self, label: TransitionLabel) -> Vec<Transition> {
        self.transitions
            .iter()
            .copied()
            .filter(|t| t.label == label)
            .collect()
    }

    /// Frequency spread (max - min) of the strongest `n` lines with the
    /// given label.
    pub fn spread_of_strongest(&self, label: TransitionLabel, n: usize) -> Option<f64> {
        let mut group = self.with_label(label);
        if group.is_empty() {
            return None;
        }
        group.sort_by(|a, b| b.amplitude.partial_cmp(&a.amplitude).unwrap());
        group.truncate(n);
        let lo = group
            .iter()
            .map(|t| t.frequency_hz)
            .fold(f64::INFINITY, f64::min);
        let hi = group
            .iter()
            .map(|t| t.frequency_hz)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(hi - lo)
    }

    /// Amplitude-weighted mean frequency of the lines with a given label.
    pub fn centroid(&self, label: TransitionLabel) -> Option<f64> {
        let group = self.with_label(label);
        let w: f64 = group.iter().map(|t| t.amplitude).sum();
        if w <= 0.0 {
            return None;
        }
        Some(group.iter().map(|t| t.frequency_hz * t.amplitude).sum::<f64>() / w)
    }
}

fn guard(p: &NvParameters, b_perp_t: f64) -> Result<f64> {
    let eps = p.gamma_hz_per_t() * b_perp_t.abs() / p.d_hz;
    if eps >= PERTURBATIVE_RATIO_LIMIT {
        return Err(Error::PerturbativeGuard {
            ratio: eps,
            limit: PERTURBATIVE_RATIO_LIMIT,
        });
    }
    Ok(eps)
}

/// Second-order level shift delta = ((g mu_B / h) B_perp)^2 / D.
pub fn perturbative_shift(p: &NvParameters, b_perp_t: f64) -> Result<f64> {
    let eps = guard(p, b_perp_t)?;
    Ok(eps * eps * p.d_hz)
}

/// Perturbed energies (E1, E2, E3) = (-delta, D, D + delta) in Hz.
pub fn perturbative_levels(p: &NvParameters, b_perp_t: f64) -> Result<(f64, f64, f64)> {
    let delta = perturbative_shift(p, b_perp_t)?;
    Ok((-delta, p.d_hz, p.d_hz + delta))
}

/// Perturbed eigenstates (|1>, |2>, |3>) in the m = (+1, 0, -1) basis.
pub fn perturbative_states(p: &NvParameters, b_perp_t: f64) -> Result<[CVector; 3]> {
    let eps = guard(p, b_perp_t)?;
    let norm = 1.0 / (1.0 + eps * eps).sqrt();
    let re = |x: f64| Complex64::new(x, 0.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // basis vectors in m = (+1, 0, -1) ordering
    let zero = [re(0.0), re(1.0), re(0.0)];
    let plus = [re(s), re(0.0), re(s)];
    let minus = [re(s), re(0.0), re(-s)];

    let mix = |a: &[Complex64; 3], ca: f64, b: &[Complex64; 3], cb: f64| {
        CVector::from_iterator(
            3,
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x * re(ca) + y * re(cb)),
        )
    };

    let one = mix(&zero, norm, &plus, -eps * norm);
    let two = CVector::from_row_slice(&minus);
    let three = mix(&zero, eps * norm, &plus, norm);
    Ok([one, two, three])
}

/// The two microwave transitions from |1>: D + delta and D + 2 delta, with
/// equal unit amplitudes.
pub fn transition_frequencies(p: &NvParameters, b_perp_t: f64) -> Result<TransitionSet> {
    let delta = perturbative_shift(p, b_perp_t)?;
    Ok(TransitionSet::new(vec![
        Transition {
            frequency_hz: p.d_hz + delta,
            amplitude: 1.0,
            label: TransitionLabel::DegPairLow,
        },
        Transition {
            frequency_hz: p.d_hz + 2.0 * delta,
            amplitude: 1.0,
            label: TransitionLabel::DegPairHigh,
        },
    ]))
}

/// Spin component axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Expectation value <state| S_axis |state> for a normalized 3-component state.
pub fn spin_expectation(state: &CVector, axis: Axis) -> Result<f64> {
    if state.len() != 3 {
        return Err(Error::Config(format!(
            "spin_expectation expects a 3-component electronic state, got {}",
            state.len()
        )));
    }
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "state must be normalized, |state| = {norm:.6}"
        )));
    }
    let (sx, sy, sz) = spin_operators(Spin::S1);
    let op = match axis {
        Axis::X => sx,
        Axis::Y => sy,
        Axis::Z => sz,
    };
    Ok(op.expectation(state))
}

/// Expectation of the hyperfine Hamiltonian
/// A_par Sz Iz + A_perp (Sx Ix + Sy Iy) on the product state
/// |electronic> (x) |I_z = m_i>, in Hz.
pub fn hyperfine_expectation(
    electronic: &CVector,
    m_i: i8,
    p: &NvParameters,
) -> Result<f64> {
    if !matches!(m_i, -1 | 0 | 1) {
        return Err(Error::Config(format!("m_i must be -1, 0 or +1, got {m_i}")));
    }
    let sz_e = spin_expectation(electronic, Axis::Z)?;
    let sx_e = spin_expectation(electronic, Axis::X)?;
    let sy_e = spin_expectation(electronic, Axis::Y)?;
    // <I_z = m | Iz | I_z = m> = m; <I_z = m | Ix,y | I_z = m> = 0.
    let iz_n = m_i as f64;
    Ok(p.a_par_hz * sz_e * iz_n + p.a_perp_hz * (sx_e * 0.0 + sy_e * 0.0))
}

/// Transverse field needed for the degenerate-pair splitting delta to reach
/// the hyperfine splitting A_par: B = (h / g mu_B) sqrt(A_par * D).
pub fn min_transverse_field(p: &NvParameters) -> f64 {
    (p.a_par_hz * p.d_hz).sqrt() / p.gamma_hz_per_t()
}
