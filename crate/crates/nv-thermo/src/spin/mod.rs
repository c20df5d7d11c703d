//! NV ground-state spin system: operators, Hamiltonians, exact
//! diagonalization and the transverse-field perturbation theory.

mod eigen;
mod hamiltonian;
pub mod operators;
mod perturbation;

pub use eigen::{eigensolve, EigenSystem};
pub use hamiltonian::{build_electron_hamiltonian, build_full_hamiltonian};
pub use operators::{
    identity3, spin_operators, to_zero_minus_plus, zero_minus_plus_basis, CMatrix, CVector, Spin,
    SpinMatrix,
};
pub use perturbation::{
    hyperfine_expectation, min_transverse_field, perturbative_levels, perturbative_shift,
    perturbative_states, spin_expectation, transition_frequencies, Axis, Transition,
    TransitionLabel, TransitionSet, PERTURBATIVE_RATIO_LIMIT,
};
