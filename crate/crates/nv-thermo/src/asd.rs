//! Amplitude spectral densities and sensitivity figures.

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lockin::TimeTrace;

/// Max-slope prefactor of a Lorentzian dip: the CW sensitivity constant
/// K = 4 / (3 sqrt(3)) that follows from max|dPL/df| = (3 sqrt(3) / 4) C / width.
pub const SENSITIVITY_PREFACTOR_LORENTZIAN: f64 = 0.769_800_358_919_501_1;

/// Empirical prefactor quoted for the reference sensor's lineshape
/// (K = 0.31). It is not derivable from a Lorentzian model, which gives
/// 4 / (3 sqrt(3)) ~ 0.77; both values are kept so reports can show the gap.
pub const SENSITIVITY_PREFACTOR_EMPIRICAL: f64 = 0.31;

/// One-sided RMS amplitude spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsdCurve {
    pub freqs_hz: Vec<f64>,
    /// Input units per sqrt(Hz).
    pub values: Vec<f64>,
}

impl AsdCurve {
    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    /// Bin spacing, Hz.
    pub fn df_hz(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        self.freqs_hz[1] - self.freqs_hz[0]
    }

    /// Integral of ASD^2 over the one-sided band (excluding DC).
    pub fn power_integral(&self) -> f64 {
        let df = self.df_hz();
        self.values
            .iter()
            .enumerate()
            .skip(1)
            .map(|(_, v)| v * v * df)
            .sum()
    }

    /// Value at the bin closest to `f_hz`.
    pub fn value_at(&self, f_hz: f64) -> f64 {
        let df = self.df_hz();
        if df <= 0.0 {
            return f64::NAN;
        }
        let idx = ((f_hz - self.freqs_hz[0]) / df).round() as isize;
        let idx = idx.clamp(0, self.len() as isize - 1) as usize;
        self.values[idx]
    }

    /// Peak value within `f_hz` +- `half_window_hz`, with the local
    /// background (median of the surrounding bins) subtracted in power.
    pub fn peak_above_background(&self, f_hz: f64, half_window_hz: f64) -> f64 {
        let df = self.df_hz();
        let lo = ((f_hz - half_window_hz - self.freqs_hz[0]) / df).floor() as isize;
        let hi = ((f_hz + half_window_hz - self.freqs_hz[0]) / df).ceil() as isize;
        let lo = lo.max(1) as usize;
        let hi = (hi.max(0) as usize).min(self.len() - 1);
        if lo > hi {
            return 0.0;
        }
        let peak = self.values[lo..=hi]
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max);
        // background from flanking windows of the same width
        let w = hi - lo + 1;
        let mut bg: Vec<f64> = Vec::new();
        for i in lo.saturating_sub(3 * w)..lo.saturating_sub(w) {
            if i >= 1 {
                bg.push(self.values[i]);
            }
        }
        for i in (hi + w)..(hi + 3 * w).min(self.len()) {
            bg.push(self.values[i]);
        }
        let floor = median(&mut bg).unwrap_or(0.0);
        (peak * peak - floor * floor).max(0.0).sqrt()
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Welch-averaged one-sided RMS amplitude spectral density with a Hann
/// window.
///
/// Segments of `segment_len` samples overlap by `overlap` (0.5 = 50%).
/// Each segment is windowed and periodogram-averaged with window power
/// compensation, so white noise of variance v reads sqrt(2 v / fs) per
/// bin. The trace mean is removed first; the DC bin carries whatever
/// residual leaks through the window.
pub fn asd(t: &TimeTrace, segment_len: usize, overlap: f64) -> Result<AsdCurve> {
    if segment_len < 8 {
        return Err(Error::Config("segment_len must be >= 8".into()));
    }
    if segment_len > t.len() {
        return Err(Error::Config(format!(
            "segment_len {segment_len} exceeds trace length {}",
            t.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Config(format!("overlap must be in [0, 1), got {overlap}")));
    }
    let n = segment_len;
    let hop = ((1.0 - overlap) * n as f64).round().max(1.0) as usize;
    let mean = t.mean();

    // periodic Hann window
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / n as f64).cos()))
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);

    let n_bins = n / 2 + 1;
    let mut psd = vec![0.0_f64; n_bins];
    let mut segments = 0usize;
    let mut buf: Vec<Complex64> = vec![Complex64::default(); n];
    let mut start = 0usize;
    while start + n <= t.len() {
        for i in 0..n {
            buf[i] = Complex64::new((t.samples[start + i] - mean) * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in psd.iter_mut().enumerate() {
            let mag2 = buf[k].norm_sqr();
            // one-sided: double every bin except DC and Nyquist
            let scale = if k == 0 || (n % 2 == 0 && k == n / 2) {
                1.0
            } else {
                2.0
            };
            *p += scale * mag2 / (t.fs_hz * window_power);
        }
        segments += 1;
        start += hop;
    }
    if segments == 0 {
        return Err(Error::Numerical("no full segment fits the trace".into()));
    }
    let freqs_hz = (0..n_bins).map(|k| k as f64 * t.fs_hz / n as f64).collect();
    let values = psd
        .iter()
        .map(|p| (p / segments as f64).sqrt())
        .collect();
    Ok(AsdCurve { freqs_hz, values })
}

/// Welch settings used throughout: 8 segments at 50% overlap.
pub fn asd_default(t: &TimeTrace) -> Result<AsdCurve> {
    // 8 segments at 50% overlap: seg = 2 N / 9, rounded down to a power of
    // two for FFT speed on long traces
    let raw = (2 * t.len()) / 9;
    let seg = if raw >= 64 {
        1usize << (raw.ilog2())
    } else {
        raw.max(8)
    };
    asd(t, seg.min(t.len()), 0.5)
}

/// Median-based plateau fit over a frequency band.
///
/// Returns (floor, uncertainty): the median of the band's bins and a
/// robust standard error, 1.4826 MAD / sqrt(bins).
pub fn sensitivity_floor(a: &AsdCurve, band_lo_hz: f64, band_hi_hz: f64) -> Result<(f64, f64)> {
    let mut vals: Vec<f64> = a
        .freqs_hz
        .iter()
        .zip(a.values.iter())
        .filter(|(f, _)| **f >= band_lo_hz && **f <= band_hi_hz && **f > 0.0)
        .map(|(_, v)| *v)
        .collect();
    if vals.is_empty() {
        return Err(Error::Config(format!(
            "band [{band_lo_hz}, {band_hi_hz}] Hz contains no ASD bins"
        )));
    }
    let m = median(&mut vals).unwrap();
    let mut dev: Vec<f64> = vals.iter().map(|v| (v - m).abs()).collect();
    let mad = median(&mut dev).unwrap();
    let unc = 1.4826 * mad / (vals.len() as f64).sqrt();
    Ok((m, unc))
}

/// Analytic CW shot-noise-limited temperature sensitivity,
///
///   eta = K * width / (|c_tau| sqrt(i0) contrast)
///
/// in K/sqrt(Hz), divided by sqrt(2) when `lockin_factor` is set (both
/// maximum-slope points probed: signal x2, noise x sqrt(2)).
pub fn cw_shot_noise_limit(
    c_tau_hz_per_k: f64,
    width_hz: f64,
    contrast: f64,
    i0: f64,
    prefactor: f64,
    lockin_factor: bool,
) -> f64 {
    let base = prefactor * width_hz / (c_tau_hz_per_k.abs() * i0.sqrt() * contrast);
    if lockin_factor {
        base / 2.0_f64.sqrt()
    } else {
        base
    }
}

/// Ensemble sensitivity for N emitters:
///
///   eta = width / (|c_tau| contrast sqrt(i0_per_center) sqrt(n))
///
/// Returns infinity when the contrast (or any rate) vanishes.
pub fn ensemble_sensitivity(
    c_tau_hz_per_k: f64,
    width_hz: f64,
    contrast: f64,
    i0_per_center: f64,
    n: u64,
) -> f64 {
    if contrast <= 0.0 || i0_per_center <= 0.0 || n == 0 {
        return f64::INFINITY;
    }
    width_hz / (c_tau_hz_per_k.abs() * contrast * i0_per_center.sqrt() * (n as f64).sqrt())
}

/// Floor contribution of one noise source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub source: String,
    pub floor_k_per_sqrt_hz: f64,
}

/// Sensitivity analysis of one simulated acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// Temperature-equivalent ASD.
    pub asd_k_per_sqrt_hz: AsdCurve,
    /// Fitted plateau, K/sqrt(Hz).
    pub floor_k_per_sqrt_hz: f64,
    pub floor_uncertainty: f64,
    /// Band used for the plateau fit, Hz.
    pub fit_band_hz: (f64, f64),
    /// Analytic shot limit with the empirical prefactor (no lock-in factor).
    pub shot_limit_empirical: f64,
    /// Analytic shot limit with the Lorentzian prefactor (no lock-in factor).
    pub shot_limit_lorentzian: f64,
    /// Same limits with the sqrt(2) lock-in factor applied.
    pub shot_limit_empirical_lockin: f64,
    pub shot_limit_lorentzian_lockin: f64,
    /// Per-source plateau contributions.
    pub budget: Vec<BudgetEntry>,
}
