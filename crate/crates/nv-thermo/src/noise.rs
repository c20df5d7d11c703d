//! Physical noise sources for simulated photodetector traces.
//!
//! Sources compose in physical order: magnetic field noise shifts the
//! resonance (moving the spectrum under the probe), laser intensity noise
//! multiplies the detected rate, photon shot noise resamples each bin, and
//! electronic noise adds on top of the readout. Every source draws from its
//! own counter-based RNG stream, so enabling one source never changes the
//! samples another produces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lockin::{FmConfig, TimeTrace};
use crate::odmr::{transitions_for_field, LabVector, NvFrame, OdmrSpectrum};
use crate::params::{MagneticField, NvParameters};
use crate::spin::TransitionLabel;

/// Below this mean count per sample bin, shot noise samples an exact
/// Poisson distribution instead of its Gaussian limit.
pub const POISSON_CROSSOVER_COUNTS: f64 = 50.0;

/// A single oscillating magnetic interference tone, defined in the lab
/// (crystal) frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticTone {
    pub frequency_hz: f64,
    pub amplitude_t: f64,
    pub direction: LabVector,
}

/// Which noise sources act on a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Photon shot noise on the detected rate.
    pub shot: bool,
    /// Laser relative-intensity-noise amplitude spectral density,
    /// 1/sqrt(Hz), one-sided, white. 0 disables.
    pub laser_rin_per_sqrt_hz: f64,
    /// Electronic noise, detected-signal-equivalent white ASD in
    /// (photons/s)/sqrt(Hz), one-sided. 0 disables.
    pub electronic_floor: f64,
    /// Oscillating magnetic interference tones.
    pub magnetic_tones: Vec<MagneticTone>,
    /// Random-walk field drift amplitude, Tesla/sqrt(s). 0 disables.
    pub magnetic_drift_t_per_sqrt_s: f64,
    /// Lab-frame direction of the drift.
    pub magnetic_drift_direction: LabVector,
    /// Validation path: re-diagonalize the spin system at every sample
    /// instead of using the per-scenario linearization. Slow; intended for
    /// short traces.
    pub exact_field_remap: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            shot: false,
            laser_rin_per_sqrt_hz: 0.0,
            electronic_floor: 0.0,
            magnetic_tones: Vec::new(),
            magnetic_drift_t_per_sqrt_s: 0.0,
            magnetic_drift_direction: [1.0, 0.0, 0.0],
            exact_field_remap: false,
        }
    }
}

impl NoiseConfig {
    pub fn shot_only() -> Self {
        Self {
            shot: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.laser_rin_per_sqrt_hz < 0.0
            || self.electronic_floor < 0.0
            || self.magnetic_drift_t_per_sqrt_s < 0.0
        {
            return Err(Error::Config("noise amplitudes must be nonnegative".into()));
        }
        for t in &self.magnetic_tones {
            if t.frequency_hz <= 0.0 || t.amplitude_t < 0.0 {
                return Err(Error::Config(format!("invalid magnetic tone {t:?}")));
            }
        }
        Ok(())
    }

    pub fn has_magnetic(&self) -> bool {
        !self.magnetic_tones.is_empty() || self.magnetic_drift_t_per_sqrt_s > 0.0
    }
}

/// Which spectral line the scenario probes, for the field-to-frequency
/// mapping. The line is identified by its label and a frequency window
/// around the operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbedLine {
    pub label: TransitionLabel,
    pub window_center_hz: f64,
    pub window_half_width_hz: f64,
}

/// Maps lab-frame field perturbations to shifts of the probed transition.
///
/// Coefficients are central differences of the probed line's
/// amplitude-weighted centroid, taken through the full 9x9
/// diagonalization. They are refreshed whenever the accumulated field
/// excursion exceeds 1% of the bias field magnitude.
#[derive(Debug, Clone)]
pub struct FieldFrequencyMap {
    params: NvParameters,
    frame: NvFrame,
    bias_nv: MagneticField,
    probed: ProbedLine,
    /// One coefficient per tone direction, Hz per Tesla along it.
    pub tone_coeffs_hz_per_t: Vec<f64>,
    /// Coefficient for the drift direction.
    pub drift_coeff_hz_per_t: f64,
    /// Reference line position at the bias field, Hz.
    pub line_at_bias_hz: f64,
    /// Lab-frame offset around which the linearization was taken.
    linearized_at_lab_t: LabVector,
    /// Probed-line frequency at the linearization point (cached so the
    /// per-sample path never re-diagonalizes).
    line_at_linearization_hz: f64,
    /// Scalar drift value at the last linearization.
    drift_at_linearization_t: f64,
}

/// Step used for the numerical field derivatives, Tesla.
const DERIVATIVE_STEP_T: f64 = 1e-6;

impl FieldFrequencyMap {
    pub fn new(
        params: &NvParameters,
        frame: &NvFrame,
        bias_nv: &MagneticField,
        probed: ProbedLine,
        tone_directions: &[LabVector],
        drift_direction: &LabVector,
    ) -> Result<Self> {
        let mut map = Self {
            params: *params,
            frame: *frame,
            bias_nv: *bias_nv,
            probed,
            tone_coeffs_hz_per_t: Vec::new(),
            drift_coeff_hz_per_t: 0.0,
            line_at_bias_hz: 0.0,
            linearized_at_lab_t: [0.0; 3],
            line_at_linearization_hz: 0.0,
            drift_at_linearization_t: 0.0,
        };
        map.line_at_bias_hz = map.line_frequency(&[0.0; 3])?;
        map.relinearize([0.0; 3], 0.0, tone_directions, drift_direction)?;
        Ok(map)
    }

    /// Probed-line frequency with a lab-frame field offset added to the bias.
    pub fn line_frequency(&self, offset_lab_t: &LabVector) -> Result<f64> {
        let extra = self.frame.to_nv_frame(offset_lab_t);
        let b = MagneticField {
            bx_t: self.bias_nv.bx_t + extra.bx_t,
            by_t: self.bias_nv.by_t + extra.by_t,
            bz_t: self.bias_nv.bz_t + extra.bz_t,
        };
        let set = transitions_for_field(&self.params, &b)?;
        let lo = self.probed.window_center_hz - self.probed.window_half_width_hz;
        let hi = self.probed.window_center_hz + self.probed.window_half_width_hz;
        let mut num = 0.0;
        let mut den = 0.0;
        for t in &set.transitions {
            if t.label == self.probed.label && t.frequency_hz >= lo && t.frequency_hz <= hi {
                num += t.frequency_hz * t.amplitude;
                den += t.amplitude;
            }
        }
        if den <= 0.0 {
            return Err(Error::Numerical(format!(
                "no {:?} transition inside [{lo:.3e}, {hi:.3e}] Hz",
                self.probed.label
            )));
        }
        Ok(num / den)
    }

    fn directional_derivative(&self, at: &LabVector, dir: &LabVector) -> Result<f64> {
        let h = DERIVATIVE_STEP_T;
        let plus = [at[0] + h * dir[0], at[1] + h * dir[1], at[2] + h * dir[2]];
        let minus = [at[0] - h * dir[0], at[1] - h * dir[1], at[2] - h * dir[2]];
        Ok((self.line_frequency(&plus)? - self.line_frequency(&minus)?) / (2.0 * h))
    }

    fn relinearize(
        &mut self,
        at: LabVector,
        drift_scalar_t: f64,
        tone_directions: &[LabVector],
        drift_direction: &LabVector,
    ) -> Result<()> {
        self.tone_coeffs_hz_per_t = tone_directions
            .iter()
            .map(|d| self.directional_derivative(&at, d))
            .collect::<Result<_>>()?;
        self.drift_coeff_hz_per_t = self.directional_derivative(&at, drift_direction)?;
        self.linearized_at_lab_t = at;
        self.line_at_linearization_hz = self.line_frequency(&at)?;
        self.drift_at_linearization_t = drift_scalar_t;
        Ok(())
    }

    fn excursion_exceeds_refresh_limit(&self, offset_lab_t: &LabVector) -> bool {
        let d = [
            offset_lab_t[0] - self.linearized_at_lab_t[0],
            offset_lab_t[1] - self.linearized_at_lab_t[1],
            offset_lab_t[2] - self.linearized_at_lab_t[2],
        ];
        let excursion = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let bias = self.bias_nv.magnitude_t();
        excursion > 0.01 * bias
    }
}

/// Everything apply_noise needs beyond the mean trace itself.
pub struct NoiseContext<'a> {
    /// Spectrum the probe reads (already shifted for the scenario's
    /// temperature, if any).
    pub spectrum: &'a OdmrSpectrum,
    /// Probe modulation; defines the per-sample instantaneous frequency.
    pub fm: FmConfig,
    /// Mean detected rate off resonance, photons/s.
    pub i0: f64,
    /// Field-to-frequency mapping; required when magnetic noise is enabled.
    pub mapping: Option<&'a mut FieldFrequencyMap>,
    /// Absolute start time of this trace segment (tone phases and drift
    /// continue coherently across block-wise generation).
    pub start_time_s: f64,
}

/// Independent RNG streams, one per noise source, plus the drift state.
/// Stream separation keeps each source's draw sequence fixed no matter
/// which other sources are enabled.
pub struct NoiseStreams {
    shot: ChaCha12Rng,
    rin: ChaCha12Rng,
    electronic: ChaCha12Rng,
    drift: ChaCha12Rng,
    /// Accumulated random-walk field, Tesla.
    pub drift_value_t: f64,
}

impl NoiseStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            shot: stream(1),
            rin: stream(2),
            electronic: stream(3),
            drift: stream(4),
            drift_value_t: 0.0,
        }
    }
}

/// Apply the configured noise sources to a mean photocurrent trace.
///
/// Without magnetic noise the input samples are taken as the per-sample
/// mean rates. With magnetic noise the mean is re-evaluated per sample as
/// i0 * pl(f_probe(t) - df(t)), where df is the tone/drift-induced shift
/// of the probed line mapped through the scenario linearization (or exact
/// re-diagonalization when `exact_field_remap` is set).
pub fn apply_noise(
    mean_trace: &TimeTrace,
    cfg: &NoiseConfig,
    ctx: &mut NoiseContext<'_>,
    seed: u64,
) -> Result<TimeTrace> {
    let mut streams = NoiseStreams::new(seed);
    apply_noise_streamed(mean_trace, cfg, ctx, &mut streams)
}

/// Same as [`apply_noise`] but with caller-held RNG streams, for block-wise
/// trace generation.
pub fn apply_noise_streamed(
    mean_trace: &TimeTrace,
    cfg: &NoiseConfig,
    ctx: &mut NoiseContext<'_>,
    streams: &mut NoiseStreams,
) -> Result<TimeTrace> {
    cfg.validate()?;
    let fs = mean_trace.fs_hz;
    let dt = 1.0 / fs;
    let n = mean_trace.len();
    let root_half_fs = (fs / 2.0).sqrt();
    let drift_step = cfg.magnetic_drift_t_per_sqrt_s * dt.sqrt();

    if cfg.has_magnetic() && ctx.mapping.is_none() {
        return Err(Error::Config(
            "magnetic noise configured but the context has no field mapping".into(),
        ));
    }

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = ctx.start_time_s + k as f64 * dt;

        // magnetic sources -> probed-line shift
        let mut mean = if cfg.has_magnetic() {
            let mapping = ctx.mapping.as_mut().expect("checked above");
            if cfg.magnetic_drift_t_per_sqrt_s > 0.0 {
                let g: f64 = streams.drift.sample(StandardNormal);
                streams.drift_value_t += drift_step * g;
            }
            let df = if cfg.exact_field_remap {
                let mut offset = [0.0f64; 3];
                for tone in &cfg.magnetic_tones {
                    let a = tone.amplitude_t
                        * (std::f64::consts::TAU * tone.frequency_hz * t).sin();
                    for (o, d) in offset.iter_mut().zip(tone.direction.iter()) {
                        *o += a * d;
                    }
                }
                if cfg.magnetic_drift_t_per_sqrt_s > 0.0 {
                    for (o, d) in offset
                        .iter_mut()
                        .zip(cfg.magnetic_drift_direction.iter())
                    {
                        *o += streams.drift_value_t * d;
                    }
                }
                mapping.line_frequency(&offset)? - mapping.line_at_bias_hz
            } else {
                // refresh the tangent if the drift walked too far
                if cfg.magnetic_drift_t_per_sqrt_s > 0.0 {
                    let offset = [
                        streams.drift_value_t * cfg.magnetic_drift_direction[0],
                        streams.drift_value_t * cfg.magnetic_drift_direction[1],
                        streams.drift_value_t * cfg.magnetic_drift_direction[2],
                    ];
                    if mapping.excursion_exceeds_refresh_limit(&offset) {
                        let dirs: Vec<LabVector> =
                            cfg.magnetic_tones.iter().map(|t| t.direction).collect();
                        mapping.relinearize(
                            offset,
                            streams.drift_value_t,
                            &dirs,
                            &cfg.magnetic_drift_direction,
                        )?;
                    }
                }
                let mut df = mapping.line_at_linearization_hz - mapping.line_at_bias_hz;
                for (tone, kci) in cfg
                    .magnetic_tones
                    .iter()
                    .zip(mapping.tone_coeffs_hz_per_t.iter())
                {
                    df += kci
                        * tone.amplitude_t
                        * (std::f64::consts::TAU * tone.frequency_hz * t).sin();
                }
                df += mapping.drift_coeff_hz_per_t
                    * (streams.drift_value_t - mapping.drift_at_linearization_t);
                df
            };
            let f_probe = ctx.fm.probe_frequency_hz(t);
            ctx.i0 * ctx.spectrum.pl_at(f_probe - df)
        } else {
            mean_trace.samples[k]
        };

        // laser RIN: multiplicative white noise on the detected rate
        if cfg.laser_rin_per_sqrt_hz > 0.0 {
            let g: f64 = streams.rin.sample(StandardNormal);
            mean *= 1.0 + cfg.laser_rin_per_sqrt_hz * root_half_fs * g;
            mean = mean.max(0.0);
        }

        // photon shot noise: Gaussian above the crossover, Poisson below
        let mut v = if cfg.shot {
            let counts = mean * dt;
            if counts >= POISSON_CROSSOVER_COUNTS {
                let g: f64 = streams.shot.sample(StandardNormal);
                (mean + (mean * fs).sqrt() * g).max(0.0)
            } else if counts > 0.0 {
                let p = Poisson::new(counts)
                    .map_err(|e| Error::Numerical(format!("poisson: {e}")))?;
                let c: f64 = streams.shot.sample(p);
                c * fs
            } else {
                0.0
            }
        } else {
            mean
        };

        // electronic noise: additive on the detected-signal equivalent
        if cfg.electronic_floor > 0.0 {
            let g: f64 = streams.electronic.sample(StandardNormal);
            v += cfg.electronic_floor * root_half_fs * g;
        }

        out.push(v);
    }
    TimeTrace::new(fs, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odmr::{
        synthesize_spectrum, FrequencyGrid, Lineshape, OrientationSet,
    };
    use crate::spin::{Transition, TransitionSet};
    use approx::assert_relative_eq;

    fn flat_spectrum() -> OdmrSpectrum {
        let grid = FrequencyGrid::new(2.8e9, 2.9e9, 1001).unwrap();
        synthesize_spectrum(&TransitionSet::default(), &Lineshape::default(), &grid).unwrap()
    }

    fn flat_context(s: &OdmrSpectrum, i0: f64) -> NoiseContext<'_> {
        NoiseContext {
            spectrum: s,
            fm: FmConfig {
                carrier_hz: 2.85e9,
                ..FmConfig::default()
            },
            i0,
            mapping: None,
            start_time_s: 0.0,
        }
    }

    #[test]
    fn all_noise_off_is_identity() {
        let s = flat_spectrum();
        let i0 = 3.03e10;
        let trace = TimeTrace::new(25225.0, vec![i0; 1000]).unwrap();
        let mut ctx = flat_context(&s, i0);
        let out = apply_noise(&trace, &NoiseConfig::default(), &mut ctx, 42).unwrap();
        assert_eq!(out, trace);
    }

    #[test]
    fn shot_noise_variance_matches_rate() {
        let s = flat_spectrum();
        let i0 = 3.03e10;
        let fs = 25225.0;
        let n = 200_000;
        let trace = TimeTrace::new(fs, vec![i0; n]).unwrap();
        let mut ctx = flat_context(&s, i0);
        let out = apply_noise(&trace, &NoiseConfig::shot_only(), &mut ctx, 7).unwrap();
        // per-sample variance i0 * fs; one-sided ASD sqrt(2 i0)
        assert_relative_eq!(out.mean(), i0, max_relative = 1e-3);
        assert_relative_eq!(out.variance(), i0 * fs, max_relative = 0.02);
    }

    #[test]
    fn poisson_branch_small_rates() {
        let s = flat_spectrum();
        let i0 = 2e4; // 0.79 counts per bin at 25225 Hz
        let fs = 25225.0;
        let n = 400_000;
        let trace = TimeTrace::new(fs, vec![i0; n]).unwrap();
        let mut ctx = flat_context(&s, i0);
        let out = apply_noise(&trace, &NoiseConfig::shot_only(), &mut ctx, 11).unwrap();
        assert_relative_eq!(out.mean(), i0, max_relative = 0.01);
        assert_relative_eq!(out.variance(), i0 * fs, max_relative = 0.02);
        // samples are integer multiples of fs
        for v in out.samples.iter().take(100) {
            let counts = v / fs;
            assert!((counts - counts.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn rin_scales_with_mean() {
        let s = flat_spectrum();
        let i0 = 1e9;
        let fs = 20000.0;
        let rin = 3e-6;
        let trace = TimeTrace::new(fs, vec![i0; 300_000]).unwrap();
        let cfg = NoiseConfig {
            laser_rin_per_sqrt_hz: rin,
            ..NoiseConfig::default()
        };
        let mut ctx = flat_context(&s, i0);
        let out = apply_noise(&trace, &cfg, &mut ctx, 13).unwrap();
        let expected_var = (i0 * rin).powi(2) * fs / 2.0;
        assert_relative_eq!(out.variance(), expected_var, max_relative = 0.02);
    }

    #[test]
    fn electronic_floor_is_additive_white() {
        let s = flat_spectrum();
        let i0 = 1e9;
        let fs = 20000.0;
        let e = 5e4;
        let trace = TimeTrace::new(fs, vec![i0; 300_000]).unwrap();
        let cfg = NoiseConfig {
            electronic_floor: e,
            ..NoiseConfig::default()
        };
        let mut ctx = flat_context(&s, i0);
        let out = apply_noise(&trace, &cfg, &mut ctx, 17).unwrap();
        assert_relative_eq!(out.variance(), e * e * fs / 2.0, max_relative = 0.02);
        assert_relative_eq!(out.mean(), i0, max_relative = 1e-4);
    }

    #[test]
    fn identical_seeds_identical_traces() {
        let s = flat_spectrum();
        let i0 = 3.03e10;
        let trace = TimeTrace::new(25225.0, vec![i0; 5000]).unwrap();
        let cfg = NoiseConfig {
            shot: true,
            laser_rin_per_sqrt_hz: 8e-9,
            electronic_floor: 6e4,
            ..NoiseConfig::default()
        };
        let mut ctx1 = flat_context(&s, i0);
        let a = apply_noise(&trace, &cfg, &mut ctx1, 99).unwrap();
        let mut ctx2 = flat_context(&s, i0);
        let b = apply_noise(&trace, &cfg, &mut ctx2, 99).unwrap();
        assert_eq!(a, b);
        let mut ctx3 = flat_context(&s, i0);
        let c = apply_noise(&trace, &cfg, &mut ctx3, 100).unwrap();
        assert_ne!(a, c);
    }

    /// Enabling an extra source must not change the draw sequence of the
    /// others (stream separation).
    #[test]
    fn stream_separation() {
        let s = flat_spectrum();
        let i0 = 3.03e10;
        let fs = 25225.0;
        let trace = TimeTrace::new(fs, vec![i0; 2000]).unwrap();
        let shot_only = {
            let mut ctx = flat_context(&s, i0);
            apply_noise(&trace, &NoiseConfig::shot_only(), &mut ctx, 5).unwrap()
        };
        let shot_plus_elec = {
            let cfg = NoiseConfig {
                shot: true,
                electronic_floor: 1e3,
                ..NoiseConfig::default()
            };
            let mut ctx = flat_context(&s, i0);
            apply_noise(&trace, &cfg, &mut ctx, 5).unwrap()
        };
        // the shot contribution is identical; the difference is pure electronics
        let diff = TimeTrace::new(
            fs,
            shot_plus_elec
                .samples
                .iter()
                .zip(shot_only.samples.iter())
                .map(|(a, b)| a - b)
                .collect(),
        )
        .unwrap();
        assert_relative_eq!(diff.variance(), 1e3 * 1e3 * fs / 2.0, max_relative = 0.1);
    }

    /// Axial bias: a (100)-direction tone shifts the probed hyperfine line
    /// at first order by gamma * projection = gamma / sqrt(3) per Tesla.
    #[test]
    fn axial_tone_coefficient_full_first_order() {
        let p = NvParameters::default();
        let orientations = OrientationSet::tetrahedral();
        let frame = orientations.frames[0];
        let bias = MagneticField::axial(2e-3);
        let gz = p.gamma_hz_per_t() * 2e-3;
        let probed = ProbedLine {
            label: TransitionLabel::HyperfineM0,
            window_center_hz: p.d_hz + gz,
            window_half_width_hz: 3.0 * p.a_par_hz,
        };
        let dir = [1.0, 0.0, 0.0];
        let map = FieldFrequencyMap::new(&p, &frame, &bias, probed, &[dir], &dir).unwrap();
        let expected = p.gamma_hz_per_t() / 3.0_f64.sqrt();
        assert_relative_eq!(map.tone_coeffs_hz_per_t[0], expected, max_relative = 1e-3);
        // 100 nT -> ~1.6 kHz
        assert_relative_eq!(map.tone_coeffs_hz_per_t[0] * 100e-9, 1.62e3, max_relative = 0.01);
    }

    /// Transverse bias: the same (100) tone couples only through its
    /// projection on the bias axis, suppressed to ~2 delta / B_perp.
    #[test]
    fn transverse_tone_coefficient_suppressed() {
        let p = NvParameters::default();
        let orientations = OrientationSet::tetrahedral();
        let frame = orientations.frames[0];
        let bias = MagneticField::transverse(6e-3);
        let delta = crate::spin::perturbative_shift(&p, 6e-3).unwrap();
        let probed = ProbedLine {
            label: TransitionLabel::DegPairLow,
            window_center_hz: p.d_hz + delta,
            window_half_width_hz: 3.0 * p.a_par_hz,
        };
        let dir = [1.0, 0.0, 0.0];
        let map = FieldFrequencyMap::new(&p, &frame, &bias, probed, &[dir], &dir).unwrap();
        // d(D + delta)/dB_perp = 2 delta / B_perp, times the (100) tone's
        // projection on the in-plane bias axis (1/sqrt(6))
        let expected = 2.0 * delta / 6e-3 / 6.0_f64.sqrt();
        assert_relative_eq!(map.tone_coeffs_hz_per_t[0], expected, max_relative = 0.03);
        // an order of magnitude below the axial-regime coefficient
        let axial_coeff = p.gamma_hz_per_t() / 3.0_f64.sqrt();
        assert!(map.tone_coeffs_hz_per_t[0] < axial_coeff / 10.0);
    }

    /// Axial coefficient vanishes at a pure transverse bias (second-order
    /// field immunity): the derivative along the NV axis is < 5% of gamma.
    #[test]
    fn axial_derivative_suppressed_at_transverse_bias() {
        let p = NvParameters::default();
        let orientations = OrientationSet::tetrahedral();
        let frame = orientations.frames[0];
        let bias = MagneticField::transverse(6e-3);
        let delta = crate::spin::perturbative_shift(&p, 6e-3).unwrap();
        let probed = ProbedLine {
            label: TransitionLabel::DegPairLow,
            window_center_hz: p.d_hz + delta,
            window_half_width_hz: 3.0 * p.a_par_hz,
        };
        // tone along the NV axis of this orientation
        let dir = frame.axis;
        let map = FieldFrequencyMap::new(&p, &frame, &bias, probed, &[dir], &dir).unwrap();
        assert!(
            map.tone_coeffs_hz_per_t[0].abs() < 0.05 * p.gamma_hz_per_t(),
            "axial slope {:.3e} Hz/T",
            map.tone_coeffs_hz_per_t[0]
        );
    }

    /// The linearized magnetic path agrees with exact per-sample
    /// re-diagonalization for a realistic tone.
    #[test]
    fn linearized_remap_matches_exact() {
        let p = NvParameters::default();
        let orientations = OrientationSet::tetrahedral();
        let frame = orientations.frames[0];
        let bias = MagneticField::axial(2e-3);
        let gz = p.gamma_hz_per_t() * 2e-3;
        let probed = ProbedLine {
            label: TransitionLabel::HyperfineM0,
            window_center_hz: p.d_hz + gz,
            window_half_width_hz: 3.0 * p.a_par_hz,
        };
        let tone = MagneticTone {
            frequency_hz: 25.0,
            amplitude_t: 100e-9,
            direction: [1.0, 0.0, 0.0],
        };

        // spectrum: single line at the probed frequency
        let f0 = p.d_hz + gz;
        let set = TransitionSet::new(vec![Transition {
            frequency_hz: f0,
            amplitude: 1.0,
            label: TransitionLabel::HyperfineM0,
        }]);
        let grid = FrequencyGrid::new(f0 - 20e6, f0 + 20e6, 40_001).unwrap();
        let s = synthesize_spectrum(&set, &Lineshape::default(), &grid).unwrap();
        let fm = FmConfig {
            carrier_hz: f0 + 0.3e6, // on the slope so shifts move the mean
            f_mod_hz: 1009.0,
            depth_hz: 0.6e6,
        };
        let fs = 25225.0;
        let i0 = 3.03e10;
        let n = 1500;
        let mean = TimeTrace::new(fs, vec![0.0; n]).unwrap(); // recomputed internally

        let run = |exact: bool| {
            let mut map = FieldFrequencyMap::new(
                &p,
                &frame,
                &bias,
                probed,
                &[tone.direction],
                &[0.0, 0.0, 1.0],
            )
            .unwrap();
            let cfg = NoiseConfig {
                magnetic_tones: vec![tone],
                exact_field_remap: exact,
                ..NoiseConfig::default()
            };
            let mut ctx = NoiseContext {
                spectrum: &s,
                fm,
                i0,
                mapping: Some(&mut map),
                start_time_s: 0.0,
            };
            apply_noise(&mean, &cfg, &mut ctx, 1).unwrap()
        };
        let lin = run(false);
        let exact = run(true);
        let scale = i0 * 0.0064; // full dip depth in rate units
        for (a, b) in lin.samples.iter().zip(exact.samples.iter()) {
            assert!(
                (a - b).abs() < 2e-4 * scale,
                "linearized {a} vs exact {b}"
            );
        }
        // and the tone actually modulates the rate
        let swing = lin
            .samples
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            - lin.samples.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(swing > 1e-5 * scale);
    }

    #[test]
    fn magnetic_noise_requires_mapping() {
        let s = flat_spectrum();
        let trace = TimeTrace::new(25225.0, vec![1e9; 10]).unwrap();
        let cfg = NoiseConfig {
            magnetic_tones: vec![MagneticTone {
                frequency_hz: 25.0,
                amplitude_t: 1e-7,
                direction: [1.0, 0.0, 0.0],
            }],
            ..NoiseConfig::default()
        };
        let mut ctx = flat_context(&s, 1e9);
        assert!(apply_noise(&trace, &cfg, &mut ctx, 1).is_err());
    }
}
