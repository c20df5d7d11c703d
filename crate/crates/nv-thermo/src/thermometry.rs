//! Calibration and temperature readout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lockin::TimeTrace;
use crate::params::NvParameters;

/// Temperature-controlled chamber range, K.
pub const CHAMBER_MIN_K: f64 = 293.15;
pub const CHAMBER_MAX_K: f64 = 318.15;

/// Thermocouple reference precision (one sigma), K.
pub const THERMOCOUPLE_SIGMA_K: f64 = 5e-3;

/// Zero-field splitting at temperature T under the local linear model,
/// D(T) = D_ref + c_tau (T - T_ref). Valid within +-30 K of the reference;
/// outside that the curvature of D(T) is not negligible.
pub fn zfs_at_temperature(p: &NvParameters, t_k: f64, t_ref_k: f64, d_ref_hz: f64) -> Result<f64> {
    if (t_k - t_ref_k).abs() > 30.0 {
        return Err(Error::Config(format!(
            "|T - T_ref| = {:.1} K exceeds the 30 K linear-model range",
            (t_k - t_ref_k).abs()
        )));
    }
    Ok(d_ref_hz + p.c_tau_hz_per_k * (t_k - t_ref_k))
}

/// Result of a zero-crossing-versus-temperature calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Fitted thermal slope of the operating resonance, Hz/K.
    pub c_tau_fit_hz_per_k: f64,
    /// Fitted resonance position at the reference temperature, Hz.
    pub d0_hz: f64,
    /// Reference temperature (mean of the calibration points), K.
    pub reference_t_k: f64,
    /// Per-point fit residuals, Hz.
    pub residuals_hz: Vec<f64>,
    /// RMS of the residuals, Hz.
    pub residual_rms_hz: f64,
}

impl CalibrationResult {
    /// Check the fitted slope against a nominal value.
    pub fn check_against(&self, nominal_hz_per_k: f64, rel_tol: f64) -> Result<()> {
        let rel = (self.c_tau_fit_hz_per_k - nominal_hz_per_k).abs() / nominal_hz_per_k.abs();
        if rel > rel_tol {
            return Err(Error::Numerical(format!(
                "fitted c_tau {:.4e} Hz/K deviates {:.2}% from nominal {:.4e}",
                self.c_tau_fit_hz_per_k,
                rel * 100.0,
                nominal_hz_per_k
            )));
        }
        Ok(())
    }
}

/// Least-squares line fit of zero-crossing frequency versus thermocouple
/// temperature. Needs at least 3 points spanning at least 2 K.
pub fn calibrate(points: &[(f64, f64)]) -> Result<CalibrationResult> {
    if points.len() < 3 {
        return Err(Error::Config(format!(
            "calibration needs >= 3 points, got {}",
            points.len()
        )));
    }
    let t_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if t_max - t_min < 2.0 {
        return Err(Error::Config(format!(
            "calibration span {:.3} K is below the 2 K minimum",
            t_max - t_min
        )));
    }
    let n = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let f_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("degenerate temperature spread".into()));
    }
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - t_mean) * (p.1 - f_mean))
        .sum();
    let slope = sxy / sxx;
    let residuals_hz: Vec<f64> = points
        .iter()
        .map(|p| p.1 - (f_mean + slope * (p.0 - t_mean)))
        .collect();
    let residual_rms_hz =
        (residuals_hz.iter().map(|r| r * r).sum::<f64>() / residuals_hz.len() as f64).sqrt();
    Ok(CalibrationResult {
        c_tau_fit_hz_per_k: slope,
        d0_hz: f_mean,
        reference_t_k: t_mean,
        residuals_hz,
        residual_rms_hz,
    })
}

/// Convert a lock-in output trace to temperature:
///
///   T(t) = t_base + lia(t) / (response_slope * c_tau_fit)
///
/// `response_slope` is the lock-in output change per Hz of resonance
/// shift at the operating point (the negative of the swept-carrier
/// slope). Includes the 1 s boxcar averaging stage: the output is sampled
/// at 1 Hz.
pub fn temperature_readout(
    lia: &TimeTrace,
    response_slope_per_hz: f64,
    cal: &CalibrationResult,
    t_base_k: f64,
) -> Result<TimeTrace> {
    if response_slope_per_hz == 0.0 {
        return Err(Error::Config("zero response slope".into()));
    }
    let gain = 1.0 / (response_slope_per_hz * cal.c_tau_fit_hz_per_k);
    let per_second = lia.fs_hz.round() as usize;
    if per_second == 0 {
        return Err(Error::Config("lock-in trace must be sampled at >= 1 Hz".into()));
    }
    let averaged = lia.decimate_mean(per_second);
    let samples = averaged.samples.iter().map(|y| t_base_k + y * gain).collect();
    TimeTrace::new(1.0, samples)
}

/// Chamber temperature program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalScenario {
    pub waveform: Waveform,
    /// Cycle period, s.
    pub period_s: f64,
    /// Peak-to-peak temperature variation, K (1.0 means +-0.5 K).
    pub amplitude_k: f64,
    /// Baseline chamber temperature, K.
    pub base_t_k: f64,
    /// Total duration, s.
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    Square,
    Sine,
}

impl Default for ThermalScenario {
    fn default() -> Self {
        Self {
            waveform: Waveform::Square,
            period_s: 1800.0,
            amplitude_k: 1.0,
            base_t_k: 300.0,
            duration_s: 3600.0,
        }
    }
}

impl ThermalScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.period_s > 0.0) || !(self.duration_s > 0.0) || self.amplitude_k < 0.0 {
            return Err(Error::Config(format!("invalid thermal scenario {self:?}")));
        }
        let lo = self.base_t_k - 0.5 * self.amplitude_k;
        let hi = self.base_t_k + 0.5 * self.amplitude_k;
        if lo < CHAMBER_MIN_K || hi > CHAMBER_MAX_K {
            return Err(Error::Config(format!(
                "program [{lo:.2}, {hi:.2}] K leaves the chamber range [{CHAMBER_MIN_K}, {CHAMBER_MAX_K}] K"
            )));
        }
        Ok(())
    }

    /// Set temperature at time t.
    pub fn set_temperature_k(&self, t_s: f64) -> f64 {
        let phase = std::f64::consts::TAU * t_s / self.period_s;
        let x = match self.waveform {
            Waveform::Square => {
                if phase.sin() >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Waveform::Sine => phase.sin(),
        };
        self.base_t_k + 0.5 * self.amplitude_k * x
    }
}
