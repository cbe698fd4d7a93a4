//! SGD training on freshly synthesized batches.

use super::network::{image_input, Network, NetworkConfig};
use crate::decompose::decompose;
use crate::error::{Error, Result};
use crate::fiber_modes::ModeBasis;
use crate::field_synth::{add_noise, encode_label, render, sample_coefficients, BeamImage};
use crate::par;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// `(first_epoch, lr)`, ascending; epochs are counted from 0
    pub lr_schedule: Vec<(usize, f64)>,
    pub seed: u64,
    pub noise_sigma: f64,
    pub holdout_samples: usize,
}

impl Default for TrainConfig {
    /// 100k samples per epoch in batches of 64, lr 0.01 for 20 epochs then
    /// 0.001, 30 epochs.
    fn default() -> Self {
        Self {
            samples_per_epoch: 100_000,
            batch_size: 64,
            epochs: 30,
            lr_schedule: vec![(0, 0.01), (20, 0.001)],
            seed: 0,
            noise_sigma: 0.0,
            holdout_samples: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.samples_per_epoch == 0 || self.batch_size == 0 || self.epochs == 0 {
            return bad("samples_per_epoch, batch_size and epochs must be positive");
        }
        if self.lr_schedule.first().map(|s| s.0) != Some(0) {
            return bad("lr_schedule must start at epoch 0");
        }
        if self.lr_schedule.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("lr_schedule thresholds must increase");
        }
        if self.lr_schedule.iter().any(|s| !(s.1 > 0.0 && s.1.is_finite())) {
            return bad("learning rates must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be nonnegative");
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr_schedule
            .iter()
            .take_while(|s| s.0 <= epoch)
            .last()
            .map_or(self.lr_schedule[0].1, |s| s.1)
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.samples_per_epoch.div_ceil(self.batch_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based
    pub epoch: usize,
    /// mean batch loss over the epoch
    pub loss: f64,
    /// mean decomposition correlation on the held-out set, NaN when it is empty
    pub holdout_correlation: f64,
}

const TRAIN_STREAM: u64 = 1;
const HOLDOUT_STREAM: u64 = 2;

/// One synthetic sample: max-normalized intensity (optionally noisy, then
/// renormalized) and its label.
pub fn synth_sample(basis: &ModeBasis, sigma: f64, r: &mut rng::Rng) -> Result<(BeamImage, Vec<f64>)> {
    let coeffs = sample_coefficients(r, basis.len());
    let clean = render(basis, &coeffs)?;
    let image = if sigma > 0.0 {
        add_noise(&clean, sigma, r).normalized()
    } else {
        clean
    };
    Ok((image, encode_label(&coeffs).values().to_vec()))
}

/// Noise-free held-out samples, identical for every run with `seed`.
pub fn holdout_set(basis: &ModeBasis, count: usize, seed: u64) -> Result<Vec<BeamImage>> {
    par::map_range(count, |i| {
        Ok(synth_sample(basis, 0.0, &mut rng::stream(seed, &[HOLDOUT_STREAM, i as u64]))?.0)
    })
    .into_iter()
    .collect()
}

pub fn mean_holdout_correlation(net: &Network<f32>, basis: &ModeBasis, holdout: &[BeamImage]) -> Result<f64> {
    if holdout.is_empty() {
        return Ok(f64::NAN);
    }
    let cs = holdout
        .iter()
        .map(|im| decompose(net, basis, im).map(|r| r.correlation))
        .collect::<Result<Vec<_>>>()?;
    Ok(cs.iter().sum::<f64>() / cs.len() as f64)
}

/// Trains from He initialization. Batch `b` of epoch `e` draws sample `i`
/// from the stream `(seed, e, b, i)`, so the sample sequence is independent
/// of the thread count and so are the resulting weights.
pub fn train(
    basis: &ModeBasis,
    net_config: NetworkConfig,
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochStats),
) -> Result<(Network<f32>, Vec<EpochStats>)> {
    cfg.validate()?;
    net_config.validate()?;
    if net_config.n_modes() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            actual: net_config.n_modes(),
        });
    }
    let res = net_config.input_resolution;
    if basis.grid().resolution() != res {
        return Err(Error::ShapeMismatch(format!(
            "basis grid is {0}x{0}, network input is {res}x{res}",
            basis.grid().resolution()
        )));
    }
    let mut net = Network::<f32>::initialized(net_config, cfg.seed)?;
    let holdout = holdout_set(basis, cfg.holdout_samples, cfg.seed)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        let mut loss_sum = 0.0;
        let batches = cfg.batches_per_epoch();
        for batch in 0..batches {
            let size = cfg.batch_size.min(cfg.samples_per_epoch - batch * cfg.batch_size);
            let samples = par::map_range(size, |i| {
                let mut r = rng::stream(cfg.seed, &[TRAIN_STREAM, epoch as u64, batch as u64, i as u64]);
                let (image, label) = synth_sample(basis, cfg.noise_sigma, &mut r)?;
                let input = image_input::<f32>(&image, res)?;
                Ok((input, label.into_iter().map(|v| v as f32).collect::<Vec<f32>>()))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let (inputs, labels): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
            let (loss, grads) = net.loss_and_gradients(&inputs, &labels)?;
            net.sgd_step(&grads, lr)?;
            loss_sum += loss;
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / batches as f64,
            holdout_correlation: mean_holdout_correlation(&net, basis, &holdout)?,
        };
        progress(&stats);
        history.push(stats);
    }
    Ok((net, history))
}
