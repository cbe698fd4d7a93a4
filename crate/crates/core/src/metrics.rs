//! Intensity correlation, residual maps and coefficient error statistics.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field_synth::{BeamImage, ModeCoefficients};

fn same_shape(a: &BeamImage, b: &BeamImage) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::DimensionMismatch {
            expected: a.height() * a.width(),
            actual: b.height() * b.width(),
        });
    }
    Ok(())
}

/// Mean-subtracted, normalized absolute inner product of two images over all
/// pixels. Uniform pixel area cancels from the ratio.
pub fn correlation(measured: &BeamImage, reconstructed: &BeamImage) -> Result<f64> {
    same_shape(measured, reconstructed)?;
    correlation_slices(measured.data(), reconstructed.data())
}

pub(crate) fn correlation_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut cross, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - mean_a, y - mean_b);
        cross += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return Err(Error::ConstantImage);
    }
    Ok((cross.abs() / (var_a * var_b).sqrt()).min(1.0))
}

/// Pixelwise `|I_m - I_r|`.
pub fn residual(measured: &BeamImage, reconstructed: &BeamImage) -> Result<BeamImage> {
    same_shape(measured, reconstructed)?;
    let data = measured
        .data()
        .iter()
        .zip(reconstructed.data())
        .map(|(a, b)| (a - b).abs())
        .collect();
    BeamImage::new(measured.height(), measured.width(), data)
}

/// Mean absolute coefficient errors in percent. Phase errors compare
/// magnitudes only, `||theta_p| - |theta_t|| / 2 pi`, since the sign is not
/// observable from one intensity image.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// one entry per mode
    pub per_mode_weight_error: Vec<f64>,
    /// one entry per mode 2..N
    pub per_mode_phase_error: Vec<f64>,
    pub mean_weight_error: f64,
    pub mean_phase_error: f64,
    pub samples: usize,
}

pub fn error_stats(predicted: &[ModeCoefficients], truth: &[ModeCoefficients]) -> Result<ErrorReport> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    let n = truth.first().map_or(0, ModeCoefficients::n_modes);
    let mut dw = vec![0.0; n];
    let mut dp = vec![0.0; n.saturating_sub(1)];
    for (p, t) in predicted.iter().zip(truth) {
        if p.n_modes() != n || t.n_modes() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: p.n_modes().max(t.n_modes()),
            });
        }
        for (acc, (a, b)) in dw.iter_mut().zip(p.weights().iter().zip(t.weights())) {
            *acc += (a - b).abs();
        }
        for (acc, (a, b)) in dp.iter_mut().zip(p.phases().iter().zip(t.phases())) {
            *acc += (a.abs() - b.abs()).abs() / (2.0 * PI);
        }
    }
    let count = truth.len().max(1) as f64;
    let to_pct = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = 100.0 * *x / count);
    to_pct(&mut dw);
    to_pct(&mut dp);
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(ErrorReport {
        mean_weight_error: mean(&dw),
        mean_phase_error: mean(&dp),
        per_mode_weight_error: dw,
        per_mode_phase_error: dp,
        samples: truth.len(),
    })
}
