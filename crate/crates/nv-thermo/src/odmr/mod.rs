//! ODMR spectra: transition enumeration over NV orientations, Lorentzian
//! synthesis and drive-response models.

mod orientation;
mod spectrum;
mod transitions;

pub use orientation::{unit, LabVector, NvFrame, OrientationSet, DIR_100};
pub use spectrum::{
    effective_drive_spectrum, spectrum_slope, synthesize_spectrum, DriveConfig, DriveMode,
    FrequencyGrid, Lineshape, OdmrSpectrum,
};
pub use transitions::{transitions_for_field, transitions_for_lab_field};
