//! Beam synthesis: mode superposition, intensity rendering, random
//! coefficients, label encoding, noise, and raw-frame preprocessing.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::fiber_modes::ModeBasis;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Modal power fractions and relative phases. The phase of the first mode is
/// fixed at zero and not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    weights: Vec<f64>,
    phases: Vec<f64>,
}

impl ModeCoefficients {
    pub fn new(weights: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidCoefficients("no modes".into()));
        }
        if phases.len() + 1 != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len() - 1,
                actual: phases.len(),
            });
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidCoefficients(format!(
                "weights must lie in [0, 1]: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidCoefficients(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        if phases.iter().any(|p| !(-PI..=PI).contains(p)) {
            return Err(Error::InvalidCoefficients(format!(
                "phases must lie in [-pi, pi]: {phases:?}"
            )));
        }
        Ok(Self { weights, phases })
    }

    /// Projects arbitrary nonnegative weights onto the simplex and wraps phases.
    pub fn from_raw(weights: &[f64], phases: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().map(|w| w.max(0.0)).sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::InvalidCoefficients("weights have no mass".into()));
        }
        let w = weights.iter().map(|w| (w.max(0.0) / sum).min(1.0)).collect();
        let p = phases.iter().map(|&p| wrap_phase(p)).collect();
        Self::new(w, p)
    }

    /// Only the first mode populated.
    pub fn fundamental(n_modes: usize) -> Self {
        let mut w = vec![0.0; n_modes];
        w[0] = 1.0;
        Self {
            weights: w,
            phases: vec![0.0; n_modes.saturating_sub(1)],
        }
    }

    pub fn n_modes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Relative phases of modes 2..N.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Phases of all N modes, the first being zero.
    pub fn full_phases(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.phases.iter().copied()).collect()
    }

    /// The complex-conjugate field's coefficients.
    pub fn conjugate(&self) -> Self {
        Self {
            weights: self.weights.clone(),
            phases: self.phases.iter().map(|p| -p).collect(),
        }
    }
}

/// Wraps an angle into [-pi, pi].
pub fn wrap_phase(p: f64) -> f64 {
    if (-PI..=PI).contains(&p) {
        return p;
    }
    let w = (p + PI).rem_euclid(2.0 * PI) - PI;
    w.clamp(-PI, PI)
}

/// Network-facing target: `[w_1..w_N, s_2..s_N]`, `s = (cos theta + 1) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    values: Vec<f64>,
}

impl LabelVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len().is_multiple_of(2) {
            return Err(Error::ShapeMismatch(format!(
                "label length must be 2N-1, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidCoefficients(format!(
                "label entries must lie in [0, 1]: {values:?}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_modes(&self) -> usize {
        self.values.len().div_ceil(2)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn encode_label(coeffs: &ModeCoefficients) -> LabelVector {
    let values = coeffs
        .weights()
        .iter()
        .copied()
        .chain(coeffs.phases().iter().map(|p| ((p.cos() + 1.0) * 0.5).clamp(0.0, 1.0)))
        .collect();
    LabelVector { values }
}

/// Weights on the simplex plus phase magnitudes in [0, pi]; the phase signs
/// are not recoverable from a label.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLabel {
    pub weights: Vec<f64>,
    pub magnitude_phases: Vec<f64>,
}

pub fn decode_label(label: &LabelVector) -> Result<DecodedLabel> {
    let n = label.n_modes();
    let (raw, cosines) = label.values().split_at(n);
    if raw.iter().all(|w| *w < 1e-9) {
        return Err(Error::DegenerateLabel);
    }
    let sum: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / sum).collect();
    let magnitude_phases = cosines
        .iter()
        .map(|s| (2.0 * s - 1.0).clamp(-1.0, 1.0).acos())
        .collect();
    Ok(DecodedLabel {
        weights,
        magnitude_phases,
    })
}

/// Complex amplitude on the basis grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    resolution: usize,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// `sum |U|^2 dA`.
    pub fn power(&self, pixel_area: f64) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * pixel_area
    }

    /// Multiplies the field by `exp(i alpha)`.
    pub fn rotate(&self, alpha: f64) -> Self {
        let r = Complex64::from_polar(1.0, alpha);
        Self {
            resolution: self.resolution,
            data: self.data.iter().map(|c| c * r).collect(),
        }
    }
}

/// `U = sum_n sqrt(w_n) exp(i theta_n) psi_n`.
pub fn superpose(basis: &ModeBasis, coeffs: &ModeCoefficients) -> Result<ComplexField> {
    if coeffs.n_modes() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            actual: coeffs.n_modes(),
        });
    }
    let res = basis.grid().resolution();
    let mut re = vec![0.0; res * res];
    let mut im = vec![0.0; res * res];
    for (k, (w, theta)) in coeffs.weights().iter().zip(coeffs.full_phases()).enumerate() {
        if *w == 0.0 {
            continue;
        }
        let rho = w.sqrt();
        let (cr, ci) = (rho * theta.cos(), rho * theta.sin());
        for ((r, i), psi) in re.iter_mut().zip(im.iter_mut()).zip(basis.field(k)) {
            *r += cr * psi;
            *i += ci * psi;
        }
    }
    Ok(ComplexField {
        resolution: res,
        data: re
            .into_iter()
            .zip(im)
            .map(|(r, i)| Complex64::new(r, i))
            .collect(),
    })
}

/// Nonnegative intensity image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl BeamImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: height * width,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidCoefficients(format!(
                "image pixels must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn square(resolution: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(resolution, resolution, data)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Scales so the brightest pixel is 1. All-zero images are returned as is.
    pub fn normalized(mut self) -> Self {
        let m = self.max();
        if m > 0.0 {
            let inv = m.recip();
            self.data.iter_mut().for_each(|v| *v *= inv);
        }
        self
    }

    /// Normalizes, then rounds to 8-bit levels as a camera would.
    pub fn quantized_8bit(self) -> Self {
        let mut img = self.normalized();
        img.data
            .iter_mut()
            .for_each(|v| *v = (*v * 255.0).round() / 255.0);
        img
    }

    /// Intensity-weighted centroid as (row, col) in pixel-centre coordinates.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut total = 0.0;
        let (mut sr, mut sc) = (0.0, 0.0);
        for r in 0..self.height {
            for c in 0..self.width {
                let v = self.get(r, c);
                total += v;
                sr += v * r as f64;
                sc += v * c as f64;
            }
        }
        (total > 0.0).then(|| (sr / total, sc / total))
    }
}

/// `|U|^2` per pixel, optionally scaled to unit maximum.
pub fn intensity(field: &ComplexField, normalize: bool) -> BeamImage {
    let img = BeamImage {
        height: field.resolution,
        width: field.resolution,
        data: field.data.iter().map(|c| c.norm_sqr()).collect(),
    };
    if normalize {
        img.normalized()
    } else {
        img
    }
}

/// Max-normalized intensity of the superposition, the form every model
/// input and reconstruction uses.
pub fn render(basis: &ModeBasis, coeffs: &ModeCoefficients) -> Result<BeamImage> {
    Ok(intensity(&superpose(basis, coeffs)?, true))
}

/// Weights uniform on the simplex (normalized exponential draws), phases
/// uniform on [-pi, pi].
pub fn sample_coefficients<R: Rng + ?Sized>(rng: &mut R, n_modes: usize) -> ModeCoefficients {
    assert!(n_modes >= 1, "need at least one mode");
    let draws: Vec<f64> = (0..n_modes).map(|_| Exp1.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    let mut weights: Vec<f64> = draws.iter().map(|d| d / sum).collect();
    // absorb rounding so the sum is 1 to the last ulp or two
    let drift = 1.0 - weights.iter().sum::<f64>();
    if let Some(max) = weights.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max = (*max + drift).clamp(0.0, 1.0);
    }
    let phases = (0..n_modes - 1).map(|_| rng.random_range(-PI..=PI)).collect();
    ModeCoefficients { weights, phases }
}

/// Multiplies every pixel by `1 + g sigma`, `g ~ N(0, 1)`, clamping at zero.
pub fn add_noise<R: Rng + ?Sized>(image: &BeamImage, sigma: f64, rng: &mut R) -> BeamImage {
    assert!(sigma >= 0.0, "noise sigma must be nonnegative");
    if sigma == 0.0 {
        return image.clone();
    }
    let data = image
        .data
        .iter()
        .map(|&v| {
            let g: f64 = StandardNormal.sample(rng);
            (v * (1.0 + g * sigma)).max(0.0)
        })
        .collect();
    BeamImage {
        height: image.height,
        width: image.width,
        data,
    }
}

fn bilinear(img: &BeamImage, y: f64, x: f64) -> f64 {
    let y = y.clamp(0.0, (img.height - 1) as f64);
    let x = x.clamp(0.0, (img.width - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(img.height - 1), (x0 + 1).min(img.width - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let top = img.get(y0, x0) * (1.0 - fx) + img.get(y0, x1) * fx;
    let bottom = img.get(y1, x0) * (1.0 - fx) + img.get(y1, x1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Square crop centred on the intensity centroid (side = smaller frame
/// dimension, shifted to stay inside the frame), bilinear resize to
/// `target x target`, then max normalization.
pub fn preprocess_frame(raw: &BeamImage, target: usize) -> Result<BeamImage> {
    let (cy, cx) = raw.centroid().ok_or(Error::EmptyFrame)?;
    let side = raw.height.min(raw.width);
    let half = (side as f64 - 1.0) * 0.5;
    let top = (cy - half).clamp(0.0, (raw.height - side) as f64);
    let left = (cx - half).clamp(0.0, (raw.width - side) as f64);
    let scale = side as f64 / target as f64;
    let mut data = Vec::with_capacity(target * target);
    for r in 0..target {
        let y = top + (r as f64 + 0.5) * scale - 0.5;
        for c in 0..target {
            let x = left + (c as f64 + 0.5) * scale - 0.5;
            data.push(bilinear(raw, y, x));
        }
    }
    let img = BeamImage::square(target, data)?;
    if img.max() <= 0.0 {
        return Err(Error::EmptyFrame);
    }
    Ok(img.normalized())
}
