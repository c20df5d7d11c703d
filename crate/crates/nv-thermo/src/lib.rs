//! Numerical toolkit for NV-center thermometry in the transverse-field regime.
//!
//! The crate models the full measurement chain of a continuous-wave,
//! frequency-modulated NV thermometer:
//!
//! - ground-state spin Hamiltonians (3x3 electronic, 9x9 with the 14N
//!   nucleus), exact diagonalization and the transverse-field perturbation
//!   theory ([`spin`]);
//! - ODMR spectra for arbitrary field orientations over the four NV axes,
//!   with single-tone and two-tone (simultaneous hyperfine driving)
//!   responses ([`odmr`]);
//! - frequency-modulated photocurrent traces and digital lock-in
//!   demodulation ([`lockin`]);
//! - physical noise injection, Welch amplitude spectral densities and
//!   shot-noise sensitivity limits ([`noise`], [`asd`]);
//! - calibration, temperature readout and regime-comparison experiments
//!   ([`thermometry`]).
//!
//! Conventions: Hamiltonians and couplings are in frequency units (Hz),
//! magnetic fields in Tesla, photocurrents in detected photons per second.
//! Every stochastic routine takes an explicit seed and is bit-reproducible.
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `nv-thermo` binary for the batch CLI.

pub mod asd;
pub mod error;
pub mod lockin;
pub mod noise;
pub mod odmr;
pub mod params;
pub mod pipeline;
pub mod spin;
pub mod thermometry;

pub use error::{Error, Result};
pub use params::{MagneticField, NvParameters, MU_B_OVER_H};
