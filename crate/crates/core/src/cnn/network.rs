use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::kernels;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::field_synth::BeamImage;
use crate::par;
use crate::rng;

/// Samples per gradient chunk upper bound; a batch is split into at most this
/// many chunks, each reduced sequentially, then combined in chunk order.
const MAX_GRADIENT_CHUNKS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBlock {
    pub conv_count: usize,
    pub out_channels: usize,
    pub pool: bool,
}

impl ConvBlock {
    pub const fn pooled(conv_count: usize, out_channels: usize) -> Self {
        Self {
            conv_count,
            out_channels,
            pool: true,
        }
    }
}

/// Layer structure: convolution blocks (each conv followed by ReLU, optional
/// 2x2 max pool), hidden dense layers with ReLU, and a sigmoid output layer
/// of width `2N - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    pub input_resolution: usize,
    pub kernel_size: usize,
    pub blocks: Vec<ConvBlock>,
    pub fc_hidden: Vec<usize>,
    pub output_dim: usize,
}

impl NetworkConfig {
    /// VGG-16 layout: five pooled blocks of (2, 2, 3, 3, 3) convolutions with
    /// (64, 128, 256, 512, 512) channels on a 128x128 input, a 4x4x512 -> 1024
    /// dense layer, then the 2N-1 output.
    pub fn paper(n_modes: usize) -> Self {
        Self {
            input_resolution: 128,
            kernel_size: 3,
            blocks: vec![
                ConvBlock::pooled(2, 64),
                ConvBlock::pooled(2, 128),
                ConvBlock::pooled(3, 256),
                ConvBlock::pooled(3, 512),
                ConvBlock::pooled(3, 512),
            ],
            fc_hidden: vec![1024],
            output_dim: 2 * n_modes - 1,
        }
    }

    /// Desk-scale variant: 64x64 input, one convolution per block with
    /// (16, 32, 64) channels, a 128-wide hidden layer.
    pub fn compact(n_modes: usize) -> Self {
        Self {
            input_resolution: 64,
            kernel_size: 3,
            blocks: vec![
                ConvBlock::pooled(1, 16),
                ConvBlock::pooled(1, 32),
                ConvBlock::pooled(1, 64),
            ],
            fc_hidden: vec![128],
            output_dim: 2 * n_modes - 1,
        }
    }

    pub fn preset(name: &str, n_modes: usize) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper(n_modes)),
            "compact" => Ok(Self::compact(n_modes)),
            other => Err(Error::InvalidConfig(format!("unknown network preset '{other}'"))),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.output_dim.div_ceil(2)
    }

    /// (channels, side) after each block.
    pub fn block_outputs(&self) -> Vec<(usize, usize)> {
        let mut side = self.input_resolution;
        self.blocks
            .iter()
            .map(|b| {
                if b.pool {
                    side /= 2;
                }
                (b.out_channels, side)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.input_resolution == 0 || self.kernel_size.is_multiple_of(2) {
            return bad(format!(
                "input {} and odd kernel size {} required",
                self.input_resolution, self.kernel_size
            ));
        }
        if self.output_dim == 0 || self.output_dim.is_multiple_of(2) {
            return bad(format!("output_dim must be 2N-1, got {}", self.output_dim));
        }
        let mut side = self.input_resolution;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.conv_count == 0 || b.out_channels == 0 {
                return bad(format!("block {i} is empty"));
            }
            if b.pool {
                if !side.is_multiple_of(2) {
                    return Err(Error::OddDimension {
                        height: side,
                        width: side,
                    });
                }
                side /= 2;
            }
        }
        if self.fc_hidden.contains(&0) {
            return bad("zero-width dense layer".into());
        }
        Ok(())
    }

    fn ops(&self) -> Vec<Op> {
        let mut ops = Vec::new();
        let (mut c, mut side) = (1, self.input_resolution);
        for b in &self.blocks {
            for _ in 0..b.conv_count {
                ops.push(Op::Conv {
                    in_c: c,
                    out_c: b.out_channels,
                    side,
                });
                c = b.out_channels;
            }
            if b.pool {
                ops.push(Op::Pool { c, side });
                side /= 2;
            }
        }
        let mut width = c * side * side;
        for &h in &self.fc_hidden {
            ops.push(Op::Dense {
                inp: width,
                out: h,
                sigmoid: false,
            });
            width = h;
        }
        ops.push(Op::Dense {
            inp: width,
            out: self.output_dim,
            sigmoid: true,
        });
        ops
    }

    /// (weights, bias) lengths of every parameterized layer in order.
    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        let k2 = self.kernel_size * self.kernel_size;
        self.ops()
            .iter()
            .filter_map(|op| match *op {
                Op::Conv { in_c, out_c, .. } => Some((out_c * in_c * k2, out_c)),
                Op::Dense { inp, out, .. } => Some((out * inp, out)),
                Op::Pool { .. } => None,
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|(w, b)| w + b).sum()
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Conv { in_c: usize, out_c: usize, side: usize },
    Pool { c: usize, side: usize },
    Dense { inp: usize, out: usize, sigmoid: bool },
}

impl Op {
    fn out_len(&self) -> usize {
        match *self {
            Op::Conv { out_c, side, .. } => out_c * side * side,
            Op::Pool { c, side } => c * (side / 2) * (side / 2),
            Op::Dense { out, .. } => out,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Parameters of every conv and dense layer, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights<T> {
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> NetworkWeights<T> {
    pub fn zeros(config: &NetworkConfig) -> Self {
        Self {
            layers: config
                .param_shapes()
                .into_iter()
                .map(|(w, b)| LayerParams {
                    weights: vec![T::zero(); w],
                    bias: vec![T::zero(); b],
                })
                .collect(),
        }
    }

    /// He-normal filters and hidden layers; the sigmoid layer uses
    /// `1/sqrt(fan_in)`. Biases start at zero.
    pub fn init(config: &NetworkConfig, seed: u64) -> Self {
        let mut w = Self::zeros(config);
        let last = w.layers.len() - 1;
        for (i, layer) in w.layers.iter_mut().enumerate() {
            let fan_in = layer.weights.len() / layer.bias.len();
            let gain = if i == last { 1.0 } else { 2.0 };
            let dist = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("finite std");
            let mut r = rng::stream(seed, &[0x1417, i as u64]);
            layer
                .weights
                .iter_mut()
                .for_each(|v| *v = T::lit(dist.sample(&mut r)));
        }
        w
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All parameters in declaration order (each layer's weights, then bias).
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += *b;
        }
    }

    pub fn cast<U: Scalar>(&self) -> NetworkWeights<U> {
        NetworkWeights {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    weights: l.weights.iter().map(|v| U::lit(v.as_f64())).collect(),
                    bias: l.bias.iter().map(|v| U::lit(v.as_f64())).collect(),
                })
                .collect(),
        }
    }
}

/// Activations kept from a forward pass for backpropagation.
struct Trace<T> {
    /// `acts[0]` is the input; `acts[i + 1]` the output of op `i`
    acts: Vec<Vec<T>>,
    cols: Vec<Vec<T>>,
    argmax: Vec<Vec<u32>>,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    config: NetworkConfig,
    ops: Vec<Op>,
    weights: NetworkWeights<T>,
}

impl<T: Scalar> Network<T> {
    pub fn new(config: NetworkConfig, weights: NetworkWeights<T>) -> Result<Self> {
        config.validate()?;
        let shapes = config.param_shapes();
        if shapes.len() != weights.layers.len()
            || shapes
                .iter()
                .zip(&weights.layers)
                .any(|(&(w, b), l)| l.weights.len() != w || l.bias.len() != b)
        {
            return Err(Error::ShapeMismatch(
                "weights do not match the network configuration".into(),
            ));
        }
        if !weights.all_finite() {
            return Err(Error::NonFinite("network weights"));
        }
        let ops = config.ops();
        Ok(Self {
            config,
            ops,
            weights,
        })
    }

    pub fn initialized(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let w = NetworkWeights::init(&config, seed);
        Self::new(config, w)
    }

    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let w = NetworkWeights::zeros(&config);
        Self::new(config, w)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn weights(&self) -> &NetworkWeights<T> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut NetworkWeights<T> {
        &mut self.weights
    }

    pub fn input_len(&self) -> usize {
        self.config.input_resolution * self.config.input_resolution
    }

    /// Per-op output sizes for a single sample, for shape assertions.
    pub fn activation_shapes(&self) -> Vec<usize> {
        self.ops.iter().map(Op::out_len).collect()
    }

    fn forward_sample(&self, input: &[T], keep: bool) -> (Vec<T>, Option<Trace<T>>) {
        let k = self.config.kernel_size;
        let mut trace = Trace {
            acts: Vec::new(),
            cols: Vec::new(),
            argmax: Vec::new(),
        };
        let mut x = input.to_vec();
        let mut col = Vec::new();
        let mut param = 0;
        for op in &self.ops {
            let mut y = vec![T::zero(); op.out_len()];
            let mut am = Vec::new();
            match *op {
                Op::Conv { in_c, side, .. } => {
                    let p = &self.weights.layers[param];
                    param += 1;
                    kernels::im2col(&x, in_c, side, side, k, &mut col);
                    kernels::conv_gemm(&p.weights, &p.bias, &col, in_c * k * k, side * side, &mut y);
                    y.iter_mut().for_each(|v| *v = v.max(T::zero()));
                }
                Op::Pool { c, side } => {
                    am = vec![0u32; y.len()];
                    kernels::maxpool(&x, c, side, side, &mut y, &mut am);
                }
                Op::Dense { inp, sigmoid, .. } => {
                    let p = &self.weights.layers[param];
                    param += 1;
                    for (o, v) in y.iter_mut().enumerate() {
                        let z = p.bias[o] + kernels::dot(&p.weights[o * inp..(o + 1) * inp], &x);
                        *v = if sigmoid { kernels::sigmoid(z) } else { z.max(T::zero()) };
                    }
                }
            }
            if keep {
                trace.acts.push(std::mem::replace(&mut x, y));
                trace.cols.push(if matches!(op, Op::Conv { .. }) {
                    std::mem::take(&mut col)
                } else {
                    Vec::new()
                });
                trace.argmax.push(am);
            } else {
                x = y;
            }
        }
        if keep {
            trace.acts.push(x.clone());
            (x, Some(trace))
        } else {
            (x, None)
        }
    }

    /// Accumulates parameter gradients given d(loss)/d(output).
    fn backward_sample(&self, trace: &Trace<T>, dout: &[T], grads: &mut NetworkWeights<T>) {
        let k = self.config.kernel_size;
        let mut g = dout.to_vec();
        let mut param = self.weights.layers.len();
        let mut dcol = Vec::new();
        for (i, op) in self.ops.iter().enumerate().rev() {
            let x = &trace.acts[i];
            let y = &trace.acts[i + 1];
            let first = i == 0;
            match *op {
                Op::Dense { inp, out, sigmoid } => {
                    param -= 1;
                    let p = &self.weights.layers[param];
                    let gp = &mut grads.layers[param];
                    let dz: Vec<T> = g
                        .iter()
                        .zip(y)
                        .map(|(&gi, &yi)| {
                            if sigmoid {
                                gi * yi * (T::one() - yi)
                            } else if yi > T::zero() {
                                gi
                            } else {
                                T::zero()
                            }
                        })
                        .collect();
                    let mut dx = vec![T::zero(); inp];
                    for o in 0..out {
                        if dz[o] == T::zero() {
                            continue;
                        }
                        gp.bias[o] += dz[o];
                        kernels::axpy(dz[o], x, &mut gp.weights[o * inp..(o + 1) * inp]);
                        kernels::axpy(dz[o], &p.weights[o * inp..(o + 1) * inp], &mut dx);
                    }
                    g = dx;
                }
                Op::Pool { .. } => {
                    let mut dx = vec![T::zero(); x.len()];
                    kernels::maxpool_backward(&g, &trace.argmax[i], &mut dx);
                    g = dx;
                }
                Op::Conv { in_c, side, .. } => {
                    param -= 1;
                    let p = &self.weights.layers[param];
                    let gp = &mut grads.layers[param];
                    for (gi, &yi) in g.iter_mut().zip(y) {
                        if yi <= T::zero() {
                            *gi = T::zero();
                        }
                    }
                    let hw = side * side;
                    let kdim = in_c * k * k;
                    kernels::conv_gemm_backward(
                        &p.weights,
                        &trace.cols[i],
                        &g,
                        kdim,
                        hw,
                        &mut gp.weights,
                        &mut gp.bias,
                        (!first).then_some(&mut dcol),
                    );
                    if !first {
                        let mut dx = vec![T::zero(); x.len()];
                        kernels::col2im(&dcol, in_c, side, side, k, &mut dx);
                        g = dx;
                    }
                }
            }
        }
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::ShapeMismatch(format!(
                "network expects {0}x{0} inputs, got {1} values",
                self.config.input_resolution,
                input.len()
            )));
        }
        Ok(())
    }

    /// Output vector for one flattened input image.
    pub fn predict(&self, input: &[T]) -> Result<Vec<T>> {
        self.check_input(input)?;
        Ok(self.forward_sample(input, false).0)
    }

    /// `(M, 2N-1)` outputs for a batch of flattened inputs.
    pub fn forward_inputs(&self, inputs: &[Vec<T>]) -> Result<Tensor<T>> {
        for x in inputs {
            self.check_input(x)?;
        }
        let rows = par::map_slice(inputs, |x| self.forward_sample(x, false).0);
        Tensor::new(
            vec![inputs.len(), self.config.output_dim],
            rows.into_iter().flatten().collect(),
        )
    }

    /// Forward pass over a batch of images at the network resolution.
    pub fn forward(&self, images: &[BeamImage]) -> Result<Tensor<T>> {
        let inputs = images
            .iter()
            .map(|im| image_input(im, self.config.input_resolution))
            .collect::<Result<Vec<_>>>()?;
        self.forward_inputs(&inputs)
    }

    /// Mean-squared-error loss and its gradient with respect to every
    /// parameter. The batch is split into a fixed number of chunks that
    /// depends only on its size, so the result is identical for any thread
    /// count.
    pub fn loss_and_gradients(&self, inputs: &[Vec<T>], labels: &[Vec<T>]) -> Result<(f64, NetworkWeights<T>)> {
        if inputs.len() != labels.len() || inputs.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} inputs vs {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        for (x, l) in inputs.iter().zip(labels) {
            self.check_input(x)?;
            if l.len() != self.config.output_dim {
                return Err(Error::ShapeMismatch(format!(
                    "label of length {} for output_dim {}",
                    l.len(),
                    self.config.output_dim
                )));
            }
        }
        let m = inputs.len();
        let chunk = m.div_ceil(MAX_GRADIENT_CHUNKS.min(m));
        let n_chunks = m.div_ceil(chunk);
        let scale = T::lit(2.0 / m as f64);
        let parts = par::map_range(n_chunks, |c| {
            let mut grads = NetworkWeights::zeros(&self.config);
            let mut loss = 0.0;
            for s in c * chunk..((c + 1) * chunk).min(m) {
                let (out, trace) = self.forward_sample(&inputs[s], true);
                let dout: Vec<T> = out
                    .iter()
                    .zip(&labels[s])
                    .map(|(&o, &l)| {
                        let d = o - l;
                        loss += d.as_f64() * d.as_f64();
                        scale * d
                    })
                    .collect();
                self.backward_sample(&trace.expect("trace kept"), &dout, &mut grads);
            }
            (loss, grads)
        });
        let mut parts = parts.into_iter();
        let (mut loss, mut grads) = parts.next().expect("at least one chunk");
        for (l, g) in parts {
            loss += l;
            grads.add_assign(&g);
        }
        Ok((loss / m as f64, grads))
    }

    /// Gradient of the batch loss for images and label vectors.
    pub fn backward(&self, images: &[BeamImage], labels: &[Vec<f64>]) -> Result<(f64, NetworkWeights<T>)> {
        let inputs = images
            .iter()
            .map(|im| image_input(im, self.config.input_resolution))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<Vec<T>> = labels
            .iter()
            .map(|l| l.iter().map(|&v| T::lit(v)).collect())
            .collect();
        self.loss_and_gradients(&inputs, &labels)
    }

    /// Plain SGD update `w -= lr * g`.
    pub fn sgd_step(&mut self, grads: &NetworkWeights<T>, lr: f64) -> Result<()> {
        if !grads.all_finite() {
            return Err(Error::NonFinite("gradients"));
        }
        let lr = T::lit(lr);
        for (w, g) in self.weights.iter_mut().zip(grads.iter()) {
            *w = *w - lr * *g;
        }
        Ok(())
    }
}

/// Flattens an image at the network resolution into network input.
pub fn image_input<T: Scalar>(image: &BeamImage, resolution: usize) -> Result<Vec<T>> {
    if image.height() != resolution || image.width() != resolution {
        return Err(Error::ShapeMismatch(format!(
            "image is {}x{}, network expects {resolution}x{resolution}",
            image.height(),
            image.width()
        )));
    }
    Ok(image.data().iter().map(|&v| T::lit(v)).collect())
}

/// Small random network input, used by tests and benches.
pub fn random_input<T: Scalar, R: Rng>(rng: &mut R, len: usize) -> Vec<T> {
    (0..len).map(|_| T::lit(rng.random_range(0.0..1.0))).collect()
}
