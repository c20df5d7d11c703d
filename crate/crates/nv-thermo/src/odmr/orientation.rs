//! The four NV crystallographic orientations and lab-frame field mapping.
//!
//! Axes are the <111> diamond directions. Each axis carries a fixed
//! right-handed frame (x, y, z = NV axis) with x along the <112>-type
//! projection listed below, so lab-frame vectors decompose into NV-frame
//! components deterministically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::MagneticField;

/// A lab-frame direction (crystal cubic axes).
pub type LabVector = [f64; 3];

fn dot(a: &LabVector, b: &LabVector) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &LabVector, b: &LabVector) -> LabVector {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &LabVector) -> f64 {
    dot(a, a).sqrt()
}

fn scaled(a: &LabVector, c: f64) -> LabVector {
    [a[0] * c, a[1] * c, a[2] * c]
}

/// One NV orientation: unit axis plus its transverse frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NvFrame {
    /// NV symmetry axis (z), unit vector in the crystal frame.
    pub axis: LabVector,
    /// Transverse x direction, unit vector.
    pub x: LabVector,
    /// Transverse y = z cross x.
    pub y: LabVector,
}

impl NvFrame {
    fn new(axis: LabVector, x_raw: LabVector) -> Self {
        let axis = scaled(&axis, 1.0 / norm(&axis));
        let x = scaled(&x_raw, 1.0 / norm(&x_raw));
        let y = cross(&axis, &x);
        Self { axis, x, y }
    }

    /// Decompose a lab-frame field (Tesla) into this NV frame.
    pub fn to_nv_frame(&self, b_lab: &LabVector) -> MagneticField {
        MagneticField {
            bx_t: dot(b_lab, &self.x),
            by_t: dot(b_lab, &self.y),
            bz_t: dot(b_lab, &self.axis),
        }
    }
}

/// The four NV orientations with population weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationSet {
    pub frames: [NvFrame; 4],
    /// Relative populations, summing to 1.
    pub weights: [f64; 4],
}

impl Default for OrientationSet {
    fn default() -> Self {
        Self::tetrahedral()
    }
}

impl OrientationSet {
    /// The standard diamond <111> axes with equal populations. The
    /// transverse x axes are the <112>-type directions orthogonal to each
    /// axis, fixed once so lab-frame decompositions are reproducible.
    pub fn tetrahedral() -> Self {
        let frames = [
            NvFrame::new([1.0, 1.0, 1.0], [1.0, 1.0, -2.0]),
            NvFrame::new([1.0, -1.0, -1.0], [1.0, -1.0, 2.0]),
            NvFrame::new([-1.0, 1.0, -1.0], [-1.0, 1.0, 2.0]),
            NvFrame::new([-1.0, -1.0, 1.0], [-1.0, -1.0, -2.0]),
        ];
        Self {
            frames,
            weights: [0.25; 4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, f) in self.frames.iter().enumerate() {
            for v in [&f.axis, &f.x, &f.y] {
                if (norm(v) - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "orientation {i}: frame vector not unit norm"
                    )));
                }
            }
            if dot(&f.axis, &f.x).abs() > 1e-12 {
                return Err(Error::Config(format!("orientation {i}: x not orthogonal to axis")));
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let d = dot(&self.frames[i].axis, &self.frames[j].axis);
                if (d + 1.0 / 3.0).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "axes {i},{j} not tetrahedral: dot = {d}"
                    )));
                }
            }
        }
        let w: f64 = self.weights.iter().sum();
        if (w - 1.0).abs() > 1e-12 || self.weights.iter().any(|&x| x < 0.0) {
            return Err(Error::Config("orientation weights must be >= 0 and sum to 1".into()));
        }
        Ok(())
    }
}

/// Unit vector along the crystal (100) direction.
pub const DIR_100: LabVector = [1.0, 0.0, 0.0];

/// Normalize a lab direction.
pub fn unit(v: &LabVector) -> Result<LabVector> {
    let n = norm(v);
    if !n.is_finite() || n == 0.0 {
        return Err(Error::Config("direction vector must be finite and nonzero".into()));
    }
    Ok(scaled(v, 1.0 / n))
}
