//! Physical parameters of the NV ground-state spin system.
//!
//! All Hamiltonians in this crate are expressed in frequency units (Hz), so
//! every coupling constant below is a frequency and the Zeeman interaction
//! enters as (g mu_B / h) * B. Working in Hz keeps level differences and
//! microwave frequencies in the same unit with no h bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bohr magneton over Planck constant, Hz/T (CODATA 2018).
pub const MU_B_OVER_H: f64 = 1.399_624_493_61e10;

/// Physical constants of one NV species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NvParameters {
    /// Zero-field splitting D, Hz.
    pub d_hz: f64,
    /// Electron Lande g-factor, dimensionless.
    pub g_factor: f64,
    /// Parallel hyperfine coupling to the 14N nucleus, Hz.
    pub a_par_hz: f64,
    /// Transverse hyperfine coupling, Hz. No published value is adopted
    /// here; the default equals `a_par_hz` as a placeholder and scans over
    /// it are supported wherever it matters.
    pub a_perp_hz: f64,
    /// Nuclear quadrupole coupling, Hz. Default 0: the quadrupole shifts
    /// whole nuclear manifolds and drops out of the electronic dip
    /// positions at first order. Set it when the sub-linewidth structure
    /// of the transverse-field dips matters.
    pub q_hz: f64,
    /// Thermal shift of the zero-field splitting dD/dT, Hz/K (negative).
    pub c_tau_hz_per_k: f64,
}

impl Default for NvParameters {
    fn default() -> Self {
        Self {
            d_hz: 2.87e9,
            g_factor: 2.003,
            a_par_hz: 2.16e6,
            a_perp_hz: 2.16e6,
            q_hz: 0.0,
            c_tau_hz_per_k: -74.2e3,
        }
    }
}

impl NvParameters {
    /// Zeeman conversion g * mu_B / h in Hz/T.
    pub fn gamma_hz_per_t(&self) -> f64 {
        self.g_factor * MU_B_OVER_H
    }

    /// Check the type invariants: D > 0, A_par > 0, c_tau < 0, all finite.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.d_hz,
            self.g_factor,
            self.a_par_hz,
            self.a_perp_hz,
            self.q_hz,
            self.c_tau_hz_per_k,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("NvParameters contains non-finite value".into()));
        }
        if self.d_hz <= 0.0 {
            return Err(Error::Config(format!("d_hz must be > 0, got {}", self.d_hz)));
        }
        if self.a_par_hz <= 0.0 {
            return Err(Error::Config(format!(
                "a_par_hz must be > 0, got {}",
                self.a_par_hz
            )));
        }
        if self.c_tau_hz_per_k >= 0.0 {
            return Err(Error::Config(format!(
                "c_tau_hz_per_k must be < 0, got {}",
                self.c_tau_hz_per_k
            )));
        }
        Ok(())
    }
}

/// Static magnetic field in the NV frame (z along the NV axis), Tesla.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagneticField {
    pub bx_t: f64,
    pub by_t: f64,
    pub bz_t: f64,
}

impl MagneticField {
    pub const ZERO: MagneticField = MagneticField {
        bx_t: 0.0,
        by_t: 0.0,
        bz_t: 0.0,
    };

    pub fn new(bx_t: f64, by_t: f64, bz_t: f64) -> Self {
        Self { bx_t, by_t, bz_t }
    }

    /// Purely transverse field of the given magnitude (along x).
    pub fn transverse(b_t: f64) -> Self {
        Self::new(b_t, 0.0, 0.0)
    }

    /// Purely axial field of the given magnitude.
    pub fn axial(b_t: f64) -> Self {
        Self::new(0.0, 0.0, b_t)
    }

    pub fn magnitude_t(&self) -> f64 {
        (self.bx_t * self.bx_t + self.by_t * self.by_t + self.bz_t * self.bz_t).sqrt()
    }

    /// Transverse (in-plane) component magnitude.
    pub fn perp_t(&self) -> f64 {
        (self.bx_t * self.bx_t + self.by_t * self.by_t).sqrt()
    }

    /// Components must be finite and the magnitude below 0.1 T; the
    /// perturbative-regime guard is a separate check.
    pub fn validate(&self) -> Result<()> {
        if ![self.bx_t, self.by_t, self.bz_t].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("MagneticField contains non-finite component".into()));
        }
        if self.magnitude_t() >= 0.1 {
            return Err(Error::Config(format!(
                "|B| = {:.3e} T exceeds the 0.1 T model range",
                self.magnitude_t()
            )));
        }
        Ok(())
    }
}
