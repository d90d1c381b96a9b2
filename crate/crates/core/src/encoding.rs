//! Amplitude encoding of 16×16 images into the 8-qubit data register.
//!
//! Pixel `m` of the row-major flattened image becomes the amplitude of basis
//! state `|m⟩` on data qubits 0–7 (qubit 0 is the most significant bit of
//! `m`). All remaining wires start in `|0⟩`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::StateVector;

pub const IMAGE_SIDE: usize = 16;
pub const IMAGE_LEN: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const DATA_QUBITS: usize = 8;
pub const NUM_CLASSES: usize = 4;

/// A unit-norm nonnegative 256-vector with its remapped class label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedImage {
    coeffs: Vec<f64>,
    label: usize,
    source_id: usize,
}

impl EncodedImage {
    pub fn new(coeffs: Vec<f64>, label: usize, source_id: usize) -> Result<Self> {
        if coeffs.len() != IMAGE_LEN {
            return Err(Error::Validation(format!(
                "expected {IMAGE_LEN} coefficients, got {}",
                coeffs.len()
            )));
        }
        if label >= NUM_CLASSES {
            return Err(Error::Validation(format!("label {label} outside 0..{NUM_CLASSES}")));
        }
        if coeffs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Validation("coefficients must be finite and ≥ 0".into()));
        }
        let norm_sqr: f64 = coeffs.iter().map(|c| c * c).sum();
        if (norm_sqr - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "coefficients have squared norm {norm_sqr}, expected 1"
            )));
        }
        Ok(EncodedImage {
            coeffs,
            label,
            source_id,
        })
    }

    /// Normalizes raw pixel intensities and wraps them.
    pub fn from_pixels(pixels: &[f64], label: usize, source_id: usize) -> Result<Self> {
        Self::new(normalize_vector(pixels)?, label, source_id)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn source_id(&self) -> usize {
        self.source_id
    }
}

/// Scales a nonnegative 256-pixel vector to unit L2 norm.
pub fn normalize_vector(pixels: &[f64]) -> Result<Vec<f64>> {
    if pixels.len() != IMAGE_LEN {
        return Err(Error::Validation(format!(
            "expected {IMAGE_LEN} pixels, got {}",
            pixels.len()
        )));
    }
    if pixels.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Validation("pixels must be finite and ≥ 0".into()));
    }
    let norm = pixels.iter().map(|p| p * p).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Degenerate("all-zero image cannot be normalized".into()));
    }
    Ok(pixels.iter().map(|p| p / norm).collect())
}

/// Loads `img` into the data register of a `total_qubits`-wide state.
pub fn amplitude_encode(img: &EncodedImage, total_qubits: usize) -> Result<StateVector> {
    if total_qubits < DATA_QUBITS {
        return Err(Error::Config(format!(
            "amplitude encoding needs ≥ {DATA_QUBITS} qubits, got {total_qubits}"
        )));
    }
    let shift = total_qubits - DATA_QUBITS;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << total_qubits];
    for (m, &c) in img.coeffs.iter().enumerate() {
        amps[m << shift] = Complex64::new(c, 0.0);
    }
    StateVector::from_amplitudes(amps)
}
