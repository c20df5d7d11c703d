//! CW ODMR spectrum synthesis and drive-response models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::TransitionSet;

/// Lorentzian line parameters shared by every transition of a set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lineshape {
    /// Full width at half maximum, Hz.
    pub width_hz: f64,
    /// Fractional PL dip depth per unit-amplitude transition.
    pub contrast: f64,
}

impl Default for Lineshape {
    fn default() -> Self {
        Self {
            width_hz: 1.1e6,
            contrast: 0.64e-2,
        }
    }
}

impl Lineshape {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_hz > 0.0) {
            return Err(Error::Config(format!(
                "lineshape width must be > 0, got {}",
                self.width_hz
            )));
        }
        if !(self.contrast > 0.0 && self.contrast < 1.0) {
            return Err(Error::Config(format!(
                "lineshape contrast must lie in (0, 1), got {}",
                self.contrast
            )));
        }
        Ok(())
    }
}

/// Microwave drive topology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    pub mode: DriveMode,
    /// Sideband offset for two-tone (simultaneous hyperfine) driving, Hz.
    pub shfd_offset_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    SingleTone,
    Shfd,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            mode: DriveMode::SingleTone,
            shfd_offset_hz: 2.16e6,
        }
    }
}

impl DriveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode == DriveMode::Shfd && !(self.shfd_offset_hz > 0.0) {
            return Err(Error::Config(
                "shfd_offset_hz must be > 0 in SHfD mode".into(),
            ));
        }
        Ok(())
    }
}

/// Uniform frequency grid specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
}

impl FrequencyGrid {
    pub fn new(start_hz: f64, stop_hz: f64, points: usize) -> Result<Self> {
        if !(stop_hz > start_hz) || points < 2 {
            return Err(Error::Config(format!(
                "grid requires stop > start and >= 2 points, got [{start_hz}, {stop_hz}] x {points}"
            )));
        }
        Ok(Self {
            start_hz,
            stop_hz,
            points,
        })
    }

    pub fn step_hz(&self) -> f64 {
        (self.stop_hz - self.start_hz) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let step = self.step_hz();
        (0..self.points)
            .map(|i| self.start_hz + step * i as f64)
            .collect()
    }

    /// Grid spanning all transitions of a set with the given margin.
    pub fn covering(set: &TransitionSet, margin_hz: f64, step_hz: f64) -> Result<Self> {
        let lo = set
            .min_frequency()
            .ok_or_else(|| Error::Config("cannot build a grid over an empty transition set".into()))?;
        let hi = set.max_frequency().unwrap();
        let start = lo - margin_hz;
        let stop = hi + margin_hz;
        let points = ((stop - start) / step_hz).ceil() as usize + 1;
        Self::new(start, stop, points.max(2))
    }
}

/// Normalized photoluminescence versus microwave frequency (1 = off resonance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSpectrum {
    pub freqs_hz: Vec<f64>,
    pub pl: Vec<f64>,
}

impl OdmrSpectrum {
    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    pub fn start_hz(&self) -> f64 {
        self.freqs_hz[0]
    }

    pub fn stop_hz(&self) -> f64 {
        *self.freqs_hz.last().unwrap()
    }

    pub fn step_hz(&self) -> f64 {
        (self.stop_hz() - self.start_hz()) / (self.len() - 1) as f64
    }

    /// Linear interpolation; frequencies outside the grid read as 1
    /// (off-resonance PL).
    pub fn pl_at(&self, f_hz: f64) -> f64 {
        let step = self.step_hz();
        let x = (f_hz - self.start_hz()) / step;
        if x < 0.0 || x > (self.len() - 1) as f64 {
            return 1.0;
        }
        let i = (x.floor() as usize).min(self.len() - 2);
        let frac = x - i as f64;
        self.pl[i] * (1.0 - frac) + self.pl[i + 1] * frac
    }

    /// Frequency of the deepest point.
    pub fn min_position_hz(&self) -> f64 {
        let mut best = 0;
        for i in 1..self.len() {
            if self.pl[i] < self.pl[best] {
                best = i;
            }
        }
        self.freqs_hz[best]
    }

    pub fn require_coverage(&self, lo_hz: f64, hi_hz: f64) -> Result<()> {
        if lo_hz < self.start_hz() || hi_hz > self.stop_hz() {
            return Err(Error::GridCoverage {
                have_lo: self.start_hz(),
                have_hi: self.stop_hz(),
                need_lo: lo_hz,
                need_hi: hi_hz,
            });
        }
        Ok(())
    }
}

/// Superpose Lorentzian dips for every transition:
///
/// pl(f) = 1 - sum_i C a_i (w/2)^2 / ((f - f_i)^2 + (w/2)^2)
///
/// Dip depths add linearly; stacked degenerate lines deepen the composite
/// dip accordingly. The grid must cover every transition by at least five
/// linewidths so no dip is truncated.
pub fn synthesize_spectrum(
    set: &TransitionSet,
    line: &Lineshape,
    grid: &FrequencyGrid,
) -> Result<OdmrSpectrum> {
    line.validate()?;
    let freqs_hz = grid.values();
    if !set.is_empty() {
        let need_lo = set.min_frequency().unwrap() - 5.0 * line.width_hz;
        let need_hi = set.max_frequency().unwrap() + 5.0 * line.width_hz;
        if grid.start_hz > need_lo || grid.stop_hz < need_hi {
            return Err(Error::GridCoverage {
                have_lo: grid.start_hz,
                have_hi: grid.stop_hz,
                need_lo,
                need_hi,
            });
        }
    }
    let half = 0.5 * line.width_hz;
    let half2 = half * half;
    let pl: Vec<f64> = freqs_hz
        .iter()
        .map(|&f| {
            let mut dip = 0.0;
            for t in &set.transitions {
                let df = f - t.frequency_hz;
                dip += line.contrast * t.amplitude * half2 / (df * df + half2);
            }
            1.0 - dip
        })
        .collect();
    if let Some(min) = pl.iter().cloned().reduce(f64::min) {
        if min <= 0.0 {
            return Err(Error::Config(format!(
                "stacked dip depths drive PL to {min:.3e} <= 0; lower the contrast"
            )));
        }
    }
    Ok(OdmrSpectrum { freqs_hz, pl })
}

/// Maximum |dPL/df| of a spectrum and the frequency where it occurs,
/// from centered finite differences.
pub fn spectrum_slope(s: &OdmrSpectrum) -> Result<(f64, f64)> {
    if s.len() < 3 {
        return Err(Error::Config("spectrum_slope needs at least 3 grid points".into()));
    }
    let step = s.step_hz();
    let mut best = (0.0_f64, s.freqs_hz[1]);
    for i in 1..s.len() - 1 {
        let d = (s.pl[i + 1] - s.pl[i - 1]) / (2.0 * step);
        if d.abs() > best.0 {
            best = (d.abs(), s.freqs_hz[i]);
        }
    }
    Ok(best)
}

/// Response of the spectrum to the configured drive.
///
/// Single tone: identity. SHfD: the carrier response at f is the sum of
/// the dip responses probed by the two sidebands at f -+ offset,
///
///   pl'(f) = 1 - [(1 - pl(f - off)) + (1 - pl(f + off))]
///
/// clamped to (0, 1]. Sideband positions outside the grid read as
/// off-resonance (pl = 1).
pub fn effective_drive_spectrum(s: &OdmrSpectrum, drive: &DriveConfig) -> Result<OdmrSpectrum> {
    drive.validate()?;
    match drive.mode {
        DriveMode::SingleTone => Ok(s.clone()),
        DriveMode::Shfd => {
            let off = drive.shfd_offset_hz;
            let pl: Vec<f64> = s
                .freqs_hz
                .iter()
                .map(|&f| {
                    let dip = (1.0 - s.pl_at(f - off)) + (1.0 - s.pl_at(f + off));
                    (1.0 - dip).clamp(f64::MIN_POSITIVE, 1.0)
                })
                .collect();
            Ok(OdmrSpectrum {
                freqs_hz: s.freqs_hz.clone(),
                pl,
            })
        }
    }
}
