//! Inference pipeline: network prediction, phase-sign enumeration with
//! correlation-maximizing selection, SPGD refinement, and a brute-force
//! grid oracle.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use crate::cnn::{image_input, Network, Scalar};
use crate::error::{Error, Result};
use crate::fiber_modes::ModeBasis;
use crate::field_synth::{decode_label, render, wrap_phase, BeamImage, LabelVector, ModeCoefficients};
use crate::metrics::correlation;
use crate::par;
use crate::rng;
use rand::Rng;

/// Correlations closer than this to the maximum count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub coefficients: ModeCoefficients,
    /// equals `correlation(image, reconstructed)`
    pub correlation: f64,
    pub reconstructed: BeamImage,
    pub candidates_evaluated: usize,
    pub elapsed: Duration,
    pub forward_time: Duration,
    pub disambiguation_time: Duration,
}

impl DecompositionResult {
    pub fn elapsed_ms(&self) -> f64 {
        self.elapsed.as_secs_f64() * 1e3
    }
}

/// One sign assignment of the phase magnitudes.
#[derive(Debug, Clone)]
pub struct Candidate {
    /// bit `n` set means mode `n + 2` takes `-|theta|`
    pub mask: u64,
    pub coefficients: ModeCoefficients,
    pub correlation: f64,
    pub reconstructed: BeamImage,
}

fn check_basis_image(basis: &ModeBasis, image: &BeamImage) -> Result<()> {
    let res = basis.grid().resolution();
    if image.height() != res || image.width() != res {
        return Err(Error::ShapeMismatch(format!(
            "image is {}x{}, basis grid is {res}x{res}",
            image.height(),
            image.width()
        )));
    }
    Ok(())
}

fn signed_phases(magnitudes: &[f64], mask: u64) -> Vec<f64> {
    magnitudes
        .iter()
        .enumerate()
        .map(|(n, &m)| if mask >> n & 1 == 1 { -m } else { m })
        .collect()
}

/// Every `2^(N-1)` sign assignment, evaluated against `image`, in mask order.
pub fn enumerate_candidates(
    basis: &ModeBasis,
    image: &BeamImage,
    weights: &[f64],
    magnitude_phases: &[f64],
) -> Result<Vec<Candidate>> {
    check_basis_image(basis, image)?;
    if weights.len() != basis.len() || magnitude_phases.len() + 1 != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            actual: weights.len(),
        });
    }
    if magnitude_phases.len() >= 63 {
        return Err(Error::InvalidCoefficients("too many phases to enumerate".into()));
    }
    if magnitude_phases.iter().any(|m| !(0.0..=PI).contains(m)) {
        return Err(Error::InvalidCoefficients(format!(
            "phase magnitudes must lie in [0, pi]: {magnitude_phases:?}"
        )));
    }
    let count = 1usize << magnitude_phases.len();
    par::map_range(count, |mask| {
        let mask = mask as u64;
        let coefficients = ModeCoefficients::new(weights.to_vec(), signed_phases(magnitude_phases, mask))?;
        let reconstructed = render(basis, &coefficients)?;
        let correlation = correlation(image, &reconstructed)?;
        Ok(Candidate {
            mask,
            coefficients,
            correlation,
            reconstructed,
        })
    })
    .into_iter()
    .collect()
}

/// Selects the correlation-maximal candidate. Ties within `1e-12` prefer a
/// nonnegative first nonzero phase, then the lowest mask.
pub fn select_candidate(candidates: Vec<Candidate>) -> Candidate {
    let best = candidates
        .iter()
        .map(|c| c.correlation)
        .fold(f64::NEG_INFINITY, f64::max);
    let key = |c: &Candidate| {
        let first = c.coefficients.phases().iter().find(|p| **p != 0.0);
        (first.is_some_and(|p| *p < 0.0), c.mask)
    };
    candidates
        .into_iter()
        .filter(|c| best - c.correlation <= TIE_TOLERANCE)
        .min_by_key(key)
        .expect("at least one candidate")
}

/// Resolves the phase signs by correlation against the measured image.
pub fn disambiguate(
    basis: &ModeBasis,
    image: &BeamImage,
    weights: &[f64],
    magnitude_phases: &[f64],
) -> Result<ModeCoefficients> {
    Ok(select_candidate(enumerate_candidates(basis, image, weights, magnitude_phases)?).coefficients)
}

/// Network output as a label, clamped into [0, 1] against float rounding.
pub fn output_label<T: Scalar>(output: &[T]) -> Result<LabelVector> {
    if output.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network output"));
    }
    LabelVector::new(output.iter().map(|v| v.as_f64().clamp(0.0, 1.0)).collect())
}

/// Forward pass, label decoding, and sign disambiguation for one image at
/// the network resolution.
pub fn decompose<T: Scalar>(net: &Network<T>, basis: &ModeBasis, image: &BeamImage) -> Result<DecompositionResult> {
    if net.config().n_modes() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            actual: net.config().n_modes(),
        });
    }
    check_basis_image(basis, image)?;
    let start = Instant::now();
    let input = image_input::<T>(&image.clone().normalized(), net.config().input_resolution)?;
    let label = output_label(&net.predict(&input)?)?;
    let decoded = decode_label(&label)?;
    let forward_time = start.elapsed();
    let mid = Instant::now();
    let candidates = enumerate_candidates(basis, image, &decoded.weights, &decoded.magnitude_phases)?;
    let candidates_evaluated = candidates.len();
    let best = select_candidate(candidates);
    let disambiguation_time = mid.elapsed();
    Ok(DecompositionResult {
        coefficients: best.coefficients,
        correlation: best.correlation,
        reconstructed: best.reconstructed,
        candidates_evaluated,
        elapsed: start.elapsed(),
        forward_time,
        disambiguation_time,
    })
}

/// Correlation of a target image with `|sum c_k psi_k|^2` as a quadratic
/// form in the pair coefficients `q_ij = Re(c_i conj(c_j))`. After a
/// one-off projection of the target onto the pair products, each evaluation
/// costs `O(N^4)` instead of a pass over every pixel.
#[derive(Debug, Clone)]
pub struct IntensityModel {
    n: usize,
    /// centred target projections, one per pair `i <= j`
    t: Vec<f64>,
    /// centred pair-product Gram matrix
    g: Vec<f64>,
    target_var: f64,
}

impl IntensityModel {
    pub fn new(basis: &ModeBasis, image: &BeamImage) -> Result<Self> {
        check_basis_image(basis, image)?;
        let n = basis.len();
        let pixels = image.data().len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let products: Vec<Vec<f64>> = par::map_slice(&pairs, |&(i, j)| {
            let p: Vec<f64> = basis.field(i).iter().zip(basis.field(j)).map(|(a, b)| a * b).collect();
            let mean = p.iter().sum::<f64>() / pixels as f64;
            p.into_iter().map(|v| v - mean).collect()
        });
        let mean_t = image.data().iter().sum::<f64>() / pixels as f64;
        let target: Vec<f64> = image.data().iter().map(|v| v - mean_t).collect();
        let target_var: f64 = target.iter().map(|v| v * v).sum();
        if target_var <= 0.0 {
            return Err(Error::ConstantImage);
        }
        let t = products.iter().map(|p| dot(p, &target)).collect();
        let np = pairs.len();
        let rows = par::map_range(np, |a| (0..np).map(|b| if b < a { 0.0 } else { dot(&products[a], &products[b]) }).collect::<Vec<_>>());
        let mut g = vec![0.0; np * np];
        for a in 0..np {
            for b in a..np {
                g[a * np + b] = rows[a][b];
                g[b * np + a] = rows[a][b];
            }
        }
        Ok(Self { n, t, g, target_var })
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    /// Correlation for amplitudes `sqrt(w)` and full phases (first included).
    pub fn correlation_parts(&self, amplitudes: &[f64], phases: &[f64]) -> f64 {
        let n = self.n;
        let mut q = Vec::with_capacity(self.t.len());
        for i in 0..n {
            for j in i..n {
                q.push(if i == j {
                    amplitudes[i] * amplitudes[i]
                } else {
                    2.0 * amplitudes[i] * amplitudes[j] * (phases[i] - phases[j]).cos()
                });
            }
        }
        let cross = dot(&q, &self.t);
        let np = q.len();
        let mut var = 0.0;
        for a in 0..np {
            var += q[a] * dot(&self.g[a * np..(a + 1) * np], &q);
        }
        if !(var > 0.0) {
            return 0.0;
        }
        (cross.abs() / (var * self.target_var).sqrt()).min(1.0)
    }

    pub fn correlation(&self, coeffs: &ModeCoefficients) -> f64 {
        let amps: Vec<f64> = coeffs.weights().iter().map(|w| w.sqrt()).collect();
        self.correlation_parts(&amps, &coeffs.full_phases())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpgdConfig {
    pub gain: f64,
    pub perturbation: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SpgdConfig {
    fn default() -> Self {
        Self {
            gain: 0.8,
            perturbation: 0.05,
            iterations: 1000,
            seed: 0,
        }
    }
}

/// Parameter vector `[a_1..a_N, theta_2..theta_N]`; weights are
/// `a_n^2 / sum a^2`.
fn spgd_coefficients(x: &[f64], n: usize) -> Result<ModeCoefficients> {
    let sq: Vec<f64> = x[..n].iter().map(|a| a * a).collect();
    ModeCoefficients::from_raw(&sq, &x[n..])
}

fn spgd_objective(model: &IntensityModel, x: &[f64], n: usize) -> f64 {
    let norm = x[..n].iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return 0.0;
    }
    let amps: Vec<f64> = x[..n].iter().map(|a| a.abs() / norm).collect();
    let phases: Vec<f64> = std::iter::once(0.0).chain(x[n..].iter().copied()).collect();
    model.correlation_parts(&amps, &phases)
}

/// Stochastic parallel gradient descent on the correlation with `image`.
/// Each iteration perturbs every parameter by `±perturbation`, evaluates
/// both signs, and moves by `gain * (J+ - J-) * delta`. The best point seen,
/// including `init`, is returned.
pub fn spgd_refine(basis: &ModeBasis, image: &BeamImage, init: &ModeCoefficients, cfg: &SpgdConfig) -> Result<ModeCoefficients> {
    let n = basis.len();
    if init.n_modes() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: init.n_modes(),
        });
    }
    if cfg.iterations == 0 {
        return Ok(init.clone());
    }
    let model = IntensityModel::new(basis, image)?;
    spgd_with_model(&model, init, cfg)
}

pub fn spgd_with_model(model: &IntensityModel, init: &ModeCoefficients, cfg: &SpgdConfig) -> Result<ModeCoefficients> {
    let n = model.n_modes();
    let mut x: Vec<f64> = init
        .weights()
        .iter()
        .map(|w| w.sqrt())
        .chain(init.phases().iter().copied())
        .collect();
    let mut best_j = model.correlation(init);
    let mut best: Option<Vec<f64>> = None;
    let mut r = rng::seeded(cfg.seed);
    let mut delta = vec![0.0; x.len()];
    let mut probe = vec![0.0; x.len()];
    for _ in 0..cfg.iterations {
        for d in delta.iter_mut() {
            *d = if r.random::<bool>() { cfg.perturbation } else { -cfg.perturbation };
        }
        let eval = |sign: f64, probe: &mut Vec<f64>| {
            for ((p, xi), d) in probe.iter_mut().zip(&x).zip(&delta) {
                *p = xi + sign * d;
            }
            spgd_objective(model, probe, n)
        };
        let j_plus = eval(1.0, &mut probe);
        if j_plus > best_j {
            best_j = j_plus;
            best = Some(probe.clone());
        }
        let j_minus = eval(-1.0, &mut probe);
        if j_minus > best_j {
            best_j = j_minus;
            best = Some(probe.clone());
        }
        let step = cfg.gain * (j_plus - j_minus);
        for (xi, d) in x.iter_mut().zip(&delta) {
            *xi += step * d;
        }
        for p in x[n..].iter_mut() {
            *p = wrap_phase(*p);
        }
        let j = spgd_objective(model, &x, n);
        if j > best_j {
            best_j = j;
            best = Some(x.clone());
        }
    }
    match best {
        Some(b) => spgd_coefficients(&b, n),
        None => Ok(init.clone()),
    }
}

/// Weight vectors `k / (steps - 1)` with nonnegative integer `k` summing to
/// `steps - 1`.
fn simplex_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == n {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=remaining {
            prefix.push(k);
            rec(n, remaining - k, prefix, out);
            prefix.pop();
        }
    }
    let total = steps - 1;
    let mut ks = Vec::new();
    rec(n, total, &mut Vec::new(), &mut ks);
    ks.into_iter()
        .map(|k| k.into_iter().map(|v| v as f64 / total as f64).collect())
        .collect()
}

/// `steps` evenly spaced phases covering [-pi, pi].
pub fn phase_grid(steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| -PI + 2.0 * PI * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Maximum-correlation point of the simplex grid crossed with the phase
/// grid. Ties keep the first point in enumeration order.
pub fn brute_force_decompose(basis: &ModeBasis, image: &BeamImage, grid_steps: usize) -> Result<ModeCoefficients> {
    let n = basis.len();
    if n > 3 {
        return Err(Error::TooManyModes(n));
    }
    if grid_steps < 2 {
        return Err(Error::InvalidConfig(format!("grid_steps must be at least 2, got {grid_steps}")));
    }
    let model = IntensityModel::new(basis, image)?;
    let weights = simplex_grid(n, grid_steps);
    let phases = phase_grid(grid_steps);
    let phase_sets: Vec<Vec<f64>> = (0..phases.len().pow(n as u32 - 1))
        .map(|mut idx| {
            let mut full = vec![0.0];
            for _ in 1..n {
                full.push(phases[idx % phases.len()]);
                idx /= phases.len();
            }
            full
        })
        .collect();
    let per_weight = par::map_slice(&weights, |w| {
        let amps: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (k, p) in phase_sets.iter().enumerate() {
            let c = model.correlation_parts(&amps, p);
            if c > best.0 {
                best = (c, k);
            }
        }
        best
    });
    let (wi, &(_, pi)) = per_weight
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, &(f64, usize))>, (i, b)| match acc {
            Some((_, a)) if a.0 >= b.0 => acc,
            _ => Some((i, b)),
        })
        .expect("nonempty grid");
    ModeCoefficients::new(weights[wi].clone(), phase_sets[pi][1..].to_vec())
}
