//! Frequency-modulated probing and digital lock-in demodulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::odmr::OdmrSpectrum;

/// Frequency-modulation settings for the microwave carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FmConfig {
    /// Modulation frequency, Hz.
    pub f_mod_hz: f64,
    /// Peak frequency deviation, Hz.
    pub depth_hz: f64,
    /// Carrier (center) frequency, Hz.
    pub carrier_hz: f64,
}

impl Default for FmConfig {
    fn default() -> Self {
        Self {
            f_mod_hz: 1009.0,
            depth_hz: 0.6e6,
            carrier_hz: 2.87e9,
        }
    }
}

impl FmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_mod_hz > 0.0 && self.depth_hz > 0.0 && self.carrier_hz > 0.0) {
            return Err(Error::Config(format!(
                "FM config requires positive f_mod, depth and carrier, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Instantaneous probe frequency at time t.
    pub fn probe_frequency_hz(&self, t_s: f64) -> f64 {
        self.carrier_hz + self.depth_hz * (std::f64::consts::TAU * self.f_mod_hz * t_s).sin()
    }
}

/// Uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    /// Sample rate, Hz.
    pub fs_hz: f64,
    pub samples: Vec<f64>,
}

impl TimeTrace {
    pub fn new(fs_hz: f64, samples: Vec<f64>) -> Result<Self> {
        if !(fs_hz > 0.0) {
            return Err(Error::Config(format!("sample rate must be > 0, got {fs_hz}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("time trace contains non-finite samples".into()));
        }
        Ok(Self { fs_hz, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.fs_hz
    }

    pub fn mean(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    pub fn variance(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.len() as f64
    }

    /// Decimate by averaging consecutive blocks of `factor` samples. The
    /// block mean's sinc response nulls exactly at multiples of the output
    /// rate, which keeps noise folding negligible for plateau estimates.
    pub fn decimate_mean(&self, factor: usize) -> TimeTrace {
        if factor <= 1 {
            return self.clone();
        }
        let n_out = self.len() / factor;
        let mut samples = Vec::with_capacity(n_out);
        for k in 0..n_out {
            let block = &self.samples[k * factor..(k + 1) * factor];
            samples.push(block.iter().sum::<f64>() / factor as f64);
        }
        TimeTrace {
            fs_hz: self.fs_hz / factor as f64,
            samples,
        }
    }
}

/// Lock-in output filter settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LockInConfig {
    /// Output filter time constant, s.
    pub tau_s: f64,
    /// Number of cascaded single-pole sections.
    pub filter_order: usize,
    /// Demodulation phase, rad.
    pub phase_rad: f64,
}

impl Default for LockInConfig {
    fn default() -> Self {
        Self {
            tau_s: 10e-3,
            filter_order: 1,
            phase_rad: 0.0,
        }
    }
}

impl LockInConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s > 0.0) || self.filter_order < 1 {
            return Err(Error::Config(format!(
                "lock-in needs tau > 0 and filter_order >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Cascade of identical single-pole IIR low-pass sections,
/// y[n] = a y[n-1] + (1 - a) x[n] with a = exp(-dt / tau).
///
/// Order 1 has noise-equivalent bandwidth 1 / (4 tau).
#[derive(Debug, Clone)]
pub struct LowPassChain {
    a: f64,
    state: Vec<f64>,
}

impl LowPassChain {
    pub fn new(tau_s: f64, order: usize, fs_hz: f64) -> Self {
        let a = (-1.0 / (tau_s * fs_hz)).exp();
        Self {
            a,
            state: vec![0.0; order.max(1)],
        }
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let mut v = x;
        for s in self.state.iter_mut() {
            *s = self.a * *s + (1.0 - self.a) * v;
            v = *s;
        }
        v
    }

    /// Preload every section so a constant input passes with no settling.
    pub fn preload(&mut self, y: f64) {
        for s in self.state.iter_mut() {
            *s = y;
        }
    }
}

/// Noiseless mean photocurrent (photons/s) of an FM-probed spectrum.
///
/// The instantaneous probe frequency is carrier + depth sin(2 pi f_mod t)
/// and the detected rate is i0 * pl(f(t)) via linear interpolation on the
/// spectrum grid. The grid must cover carrier +- depth and the sample rate
/// must resolve the modulation (fs >= 20 f_mod).
pub fn fm_mean_photocurrent(
    s: &OdmrSpectrum,
    fm: &FmConfig,
    duration_s: f64,
    fs_hz: f64,
    i0: f64,
) -> Result<TimeTrace> {
    let n = (duration_s * fs_hz).round() as usize;
    fm_mean_photocurrent_block(s, fm, 0.0, n, fs_hz, i0)
}

/// Block form of [`fm_mean_photocurrent`] starting at an absolute time, so
/// long acquisitions can be generated chunk by chunk with coherent
/// modulation phase.
pub fn fm_mean_photocurrent_block(
    s: &OdmrSpectrum,
    fm: &FmConfig,
    start_time_s: f64,
    n_samples: usize,
    fs_hz: f64,
    i0: f64,
) -> Result<TimeTrace> {
    fm.validate()?;
    if fs_hz < 20.0 * fm.f_mod_hz {
        return Err(Error::Config(format!(
            "fs = {fs_hz} Hz under-resolves f_mod = {} Hz (need fs >= 20 f_mod)",
            fm.f_mod_hz
        )));
    }
    s.require_coverage(fm.carrier_hz - fm.depth_hz, fm.carrier_hz + fm.depth_hz)?;
    let dt = 1.0 / fs_hz;
    let samples = (0..n_samples)
        .map(|k| i0 * s.pl_at(fm.probe_frequency_hz(start_time_s + k as f64 * dt)))
        .collect();
    TimeTrace::new(fs_hz, samples)
}

/// Streaming phase-sensitive demodulator: multiply by 2 sin(2 pi f_ref t
/// + phase) and low-pass filter. Holds filter state so traces can be
/// processed block by block.
#[derive(Debug, Clone)]
pub struct Demodulator {
    chain: LowPassChain,
    /// Samples per reference period when fs / f_ref is an integer; the
    /// reference is then evaluated from the exact sample phase and never
    /// drifts over long runs.
    period_samples: Option<u64>,
    w_per_sample: f64,
    phase_rad: f64,
    k: u64,
}

impl Demodulator {
    pub fn new(f_ref_hz: f64, cfg: &LockInConfig, fs_hz: f64) -> Result<Self> {
        cfg.validate()?;
        if fs_hz <= 2.0 * f_ref_hz {
            return Err(Error::Config(format!(
                "fs = {fs_hz} Hz cannot demodulate f_ref = {f_ref_hz} Hz"
            )));
        }
        let ratio = fs_hz / f_ref_hz;
        let period_samples = if (ratio - ratio.round()).abs() < 1e-9 {
            Some(ratio.round() as u64)
        } else {
            None
        };
        Ok(Self {
            chain: LowPassChain::new(cfg.tau_s, cfg.filter_order, fs_hz),
            period_samples,
            w_per_sample: std::f64::consts::TAU * f_ref_hz / fs_hz,
            phase_rad: cfg.phase_rad,
            k: 0,
        })
    }

    fn reference(&self) -> f64 {
        let arg = match self.period_samples {
            Some(m) => {
                std::f64::consts::TAU * (self.k % m) as f64 / m as f64 + self.phase_rad
            }
            None => self.w_per_sample * self.k as f64 + self.phase_rad,
        };
        arg.sin()
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.chain.step(2.0 * x * self.reference());
        self.k += 1;
        y
    }
}

/// Phase-sensitive demodulation at f_ref:
///
///   y(t) = lowpass(2 x(t) sin(2 pi f_ref t + phase))
///
/// so a pure input A sin(2 pi f_ref t + phase) settles to output A. The
/// output keeps the input sample rate.
pub fn demodulate(t: &TimeTrace, f_ref_hz: f64, cfg: &LockInConfig) -> Result<TimeTrace> {
    let mut demod = Demodulator::new(f_ref_hz, cfg, t.fs_hz)?;
    let samples = t.samples.iter().map(|&x| demod.process(x)).collect();
    TimeTrace::new(t.fs_hz, samples)
}

/// A swept lock-in response curve: steady-state first-harmonic output
/// versus carrier frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiaCurve {
    pub carriers_hz: Vec<f64>,
    pub outputs: Vec<f64>,
}

/// Sweep the carrier over `carriers_hz` and record the noiseless
/// steady-state demodulated output at each point.
///
/// Each point runs the time-domain chain: FM photocurrent, demodulation,
/// settling discard, then a mean over an integer number of modulation
/// periods. Twenty-five time constants are discarded: the mixer ripple at
/// f_ref starts at twice the full photocurrent, and its settling tail must
/// decay below 1e-6 of the first-harmonic signal for the curve's
/// antisymmetry contract. For depth << linewidth the curve is proportional
/// to i0 * depth * dPL/df.
pub fn lia_sweep(
    s: &OdmrSpectrum,
    fm: &FmConfig,
    carriers_hz: &[f64],
    cfg: &LockInConfig,
    i0: f64,
) -> Result<LiaCurve> {
    use rayon::prelude::*;
    cfg.validate()?;
    fm.validate()?;
    let fs_hz = 99.0 * fm.f_mod_hz;
    let settle_s = 25.0 * cfg.tau_s;
    // average over >= 50 whole modulation periods after settling
    let avg_periods = 50usize;
    let samples_per_period = 99usize;

    let outputs: Result<Vec<f64>> = carriers_hz
        .par_iter()
        .map(|&carrier| {
            let fm_c = FmConfig {
                carrier_hz: carrier,
                ..*fm
            };
            let settle_periods = (settle_s * fm.f_mod_hz).ceil() as usize + 1;
            let total_periods = settle_periods + avg_periods;
            let duration = total_periods as f64 / fm.f_mod_hz;
            let trace = fm_mean_photocurrent(s, &fm_c, duration, fs_hz, i0)?;
            let demod = demodulate(&trace, fm.f_mod_hz, cfg)?;
            let start = settle_periods * samples_per_period;
            let tail = &demod.samples[start..start + avg_periods * samples_per_period];
            Ok(tail.iter().sum::<f64>() / tail.len() as f64)
        })
        .collect();
    Ok(LiaCurve {
        carriers_hz: carriers_hz.to_vec(),
        outputs: outputs?,
    })
}

/// Zero crossing of a swept curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCrossing {
    /// Interpolated crossing frequency, Hz.
    pub frequency_hz: f64,
    /// Local finite-difference slope at the crossing, output units per Hz.
    pub slope_per_hz: f64,
    /// Number of sign changes found in the curve.
    pub crossings_found: usize,
}

/// Locate the zero crossing of a swept curve by linear interpolation
/// between the bracketing points. With several crossings the steepest one
/// wins and the count is reported.
pub fn find_zero_crossing(curve: &LiaCurve) -> Result<ZeroCrossing> {
    let n = curve.outputs.len();
    if n < 2 {
        return Err(Error::Numerical("curve too short for a zero crossing".into()));
    }
    let mut best: Option<ZeroCrossing> = None;
    let mut count = 0;
    for i in 0..n - 1 {
        let (y0, y1) = (curve.outputs[i], curve.outputs[i + 1]);
        if y0 == 0.0 && y1 == 0.0 {
            continue;
        }
        if y0 * y1 <= 0.0 && (y0 != 0.0 || y1 != 0.0) {
            // skip duplicated zeros: only count crossings entering from nonzero
            if y1 == 0.0 && i + 2 < n && curve.outputs[i + 2] == 0.0 {
                continue;
            }
            count += 1;
            let (f0, f1) = (curve.carriers_hz[i], curve.carriers_hz[i + 1]);
            let slope = (y1 - y0) / (f1 - f0);
            let f_cross = if y1 != y0 { f0 - y0 / slope } else { f0 };
            let cand = ZeroCrossing {
                frequency_hz: f_cross,
                slope_per_hz: slope,
                crossings_found: 0,
            };
            match &best {
                Some(b) if b.slope_per_hz.abs() >= slope.abs() => {}
                _ => best = Some(cand),
            }
        }
    }
    match best {
        Some(mut b) => {
            b.crossings_found = count;
            Ok(b)
        }
        None => Err(Error::Numerical("no sign change in the swept curve".into())),
    }
}

/// Finite-difference slope of the curve at its zero crossing, in output
/// units per Hz. This is the frequency-to-signal conversion factor used by
/// the temperature readout.
pub fn slope_at_zero(curve: &LiaCurve) -> Result<f64> {
    Ok(find_zero_crossing(curve)?.slope_per_hz)
}
