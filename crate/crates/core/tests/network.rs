use fmd_core::cnn::{ConvBlock, Network, NetworkConfig, NetworkWeights};
use fmd_core::rng;
use rand::Rng;

fn tiny_config() -> NetworkConfig {
    NetworkConfig {
        input_resolution: 8,
        kernel_size: 3,
        blocks: vec![ConvBlock::pooled(1, 3), ConvBlock::pooled(1, 4)],
        fc_hidden: vec![6],
        output_dim: 5,
    }
}

fn batch(seed: u64, m: usize, input: usize, out: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut r = rng::seeded(seed);
    let xs = (0..m).map(|_| (0..input).map(|_| r.random_range(0.0..1.0)).collect()).collect();
    let ys = (0..m).map(|_| (0..out).map(|_| r.random_range(0.0..1.0)).collect()).collect();
    (xs, ys)
}

fn loss_at(net: &Network<f64>, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    let out = net.forward_inputs(xs).unwrap();
    out.samples()
        .zip(ys)
        .map(|(o, y)| o.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum::<f64>()
        / xs.len() as f64
}

fn set_param(net: &mut Network<f64>, i: usize, v: f64) {
    *net.weights_mut().iter_mut().nth(i).unwrap() = v;
}

/// Central-difference check of every listed parameter index.
fn check_gradients(net: &mut Network<f64>, xs: &[Vec<f64>], ys: &[Vec<f64>], indices: &[usize]) {
    let (_, grads) = net.loss_and_gradients(xs, ys).unwrap();
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let h = 1e-6;
    for &i in indices {
        let orig = *net.weights().iter().nth(i).unwrap();
        set_param(net, i, orig + h);
        let up = loss_at(net, xs, ys);
        set_param(net, i, orig - h);
        let down = loss_at(net, xs, ys);
        set_param(net, i, orig);
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let tol = (1e-4 * a.abs().max(numeric.abs())).max(1e-6);
        assert!((a - numeric).abs() <= tol, "param {i}: analytic {a} numeric {numeric}");
    }
}

#[test]
fn tiny_network_gradients_match_finite_differences() {
    let mut net = Network::<f64>::initialized(tiny_config(), 3).unwrap();
    let (xs, ys) = batch(4, 3, 64, 5);
    let all: Vec<usize> = (0..net.weights().len()).collect();
    check_gradients(&mut net, &xs, &ys, &all);
}

#[test]
fn paper_preset_gradient_spot_check() {
    let cfg = NetworkConfig::paper(3);
    let mut net = Network::<f64>::initialized(cfg.clone(), 1).unwrap();
    let (xs, ys) = batch(2, 1, 128 * 128, 5);
    // first filter tap, a deep filter tap, first dense weight, a final bias
    let shapes = cfg.param_shapes();
    let offset = |layer: usize| shapes[..layer].iter().map(|(w, b)| w + b).sum::<usize>();
    let picks = [
        0,
        offset(10) + 1234,
        offset(13) + 77,
        offset(14) + shapes[14].0 + 3,
    ];
    check_gradients(&mut net, &xs, &ys, &picks);
}

#[test]
fn unused_output_row_has_zero_gradient() {
    let net = Network::<f64>::initialized(tiny_config(), 5).unwrap();
    let (xs, mut ys) = batch(6, 4, 64, 5);
    let out = net.forward_inputs(&xs).unwrap();
    for (y, o) in ys.iter_mut().zip(out.samples()) {
        y[2] = o[2];
    }
    let (_, grads) = net.loss_and_gradients(&xs, &ys).unwrap();
    let last = grads.layers.last().unwrap();
    let width = last.weights.len() / last.bias.len();
    assert!(last.weights[2 * width..3 * width].iter().all(|g| *g == 0.0));
    assert_eq!(last.bias[2], 0.0);
}

fn random_f32(r: &mut rng::Rng, rows: usize, len: usize) -> Vec<Vec<f32>> {
    (0..rows).map(|_| (0..len).map(|_| r.random_range(0.0..1.0)).collect()).collect()
}

#[test]
fn one_small_step_reduces_loss() {
    let mut net = Network::<f32>::initialized(NetworkConfig::compact(3), 8).unwrap();
    let mut r = rng::seeded(9);
    let xs = random_f32(&mut r, 8, 64 * 64);
    let ys = random_f32(&mut r, 8, 5);
    let (before, grads) = net.loss_and_gradients(&xs, &ys).unwrap();
    net.sgd_step(&grads, 1e-3).unwrap();
    let (after, _) = net.loss_and_gradients(&xs, &ys).unwrap();
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn memorizes_a_small_batch() {
    let cfg = NetworkConfig {
        input_resolution: 16,
        kernel_size: 3,
        blocks: vec![ConvBlock::pooled(1, 8), ConvBlock::pooled(1, 16)],
        fc_hidden: vec![64],
        output_dim: 5,
    };
    let mut net = Network::<f32>::initialized(cfg, 1).unwrap();
    let mut r = rng::seeded(2);
    let xs = random_f32(&mut r, 32, 256);
    let ys: Vec<Vec<f32>> = random_f32(&mut r, 32, 5)
        .into_iter()
        .map(|y| y.into_iter().map(|v| 0.1 + 0.8 * v).collect())
        .collect();
    let mut loss = f64::INFINITY;
    for _ in 0..5000 {
        let (l, g) = net.loss_and_gradients(&xs, &ys).unwrap();
        loss = l;
        if loss < 1e-3 {
            break;
        }
        net.sgd_step(&g, 0.5).unwrap();
    }
    assert!(loss < 1e-3, "loss {loss}");
}

#[test]
fn zero_weights_output_one_half() {
    let net = Network::<f32>::zeros(NetworkConfig::compact(3)).unwrap();
    let out = net.predict(&vec![0.3; 64 * 64]).unwrap();
    assert_eq!(out, vec![0.5; 5]);
}

#[test]
fn identical_inputs_identical_rows() {
    let net = Network::<f32>::initialized(NetworkConfig::compact(3), 4).unwrap();
    let x = random_f32(&mut rng::seeded(1), 1, 64 * 64).remove(0);
    let out = net.forward_inputs(&[x.clone(), x.clone(), x]).unwrap();
    assert_eq!(out.shape(), &[3, 5]);
    let rows: Vec<&[f32]> = out.samples().collect();
    assert_eq!(rows[0], rows[1]);
    assert_eq!(rows[1], rows[2]);
    assert!(rows[0].iter().all(|v| *v > 0.0 && *v < 1.0));
}

#[test]
fn gradients_are_reproducible() {
    let net = Network::<f32>::initialized(tiny_config(), 2).unwrap();
    let mut r = rng::seeded(3);
    let xs = random_f32(&mut r, 16, 64);
    let ys = random_f32(&mut r, 16, 5);
    let (la, ga) = net.loss_and_gradients(&xs, &ys).unwrap();
    let (lb, gb) = net.loss_and_gradients(&xs, &ys).unwrap();
    assert_eq!(la.to_bits(), lb.to_bits());
    assert!(ga.iter().zip(gb.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn rejects_bad_shapes() {
    let net = Network::<f32>::zeros(NetworkConfig::compact(3)).unwrap();
    assert!(net.predict(&[0.0; 10]).is_err());
    assert!(net.loss_and_gradients(&[vec![0.0; 4096]], &[vec![0.0; 4]]).is_err());
    let mut w = NetworkWeights::<f32>::zeros(&NetworkConfig::compact(3));
    w.layers.pop();
    assert!(Network::new(NetworkConfig::compact(3), w).is_err());
    let mut odd = NetworkConfig::compact(3);
    odd.input_resolution = 62;
    assert!(odd.validate().is_err());
}

#[test]
fn nan_gradients_are_refused() {
    let mut net = Network::<f32>::zeros(tiny_config()).unwrap();
    let mut g = NetworkWeights::<f32>::zeros(net.config());
    g.layers[0].weights[0] = f32::NAN;
    assert!(net.sgd_step(&g, 0.1).is_err());
    assert!(net.weights().all_finite());
}

#[test]
fn paper_preset_shapes() {
    let cfg = NetworkConfig::paper(3);
    assert_eq!(cfg.output_dim, 5);
    let sides: Vec<usize> = cfg.block_outputs().iter().map(|b| b.1).collect();
    assert_eq!(sides, vec![64, 32, 16, 8, 4]);
    let shapes = cfg.param_shapes();
    // 13 convolutions then two dense layers
    assert_eq!(shapes.len(), 15);
    assert_eq!(shapes[0], (64 * 9, 64));
    assert_eq!(shapes[13], (1024 * 4 * 4 * 512, 1024));
    assert_eq!(shapes[14], (5 * 1024, 5));
    let conv: usize = shapes[..13].iter().map(|(w, b)| w + b).sum();
    // VGG-16 convolution stack less the two extra input channels of block 1
    assert_eq!(conv, 14_714_688 - 2 * 64 * 9);
}

#[test]
fn compact_preset_shapes() {
    let cfg = NetworkConfig::compact(10);
    assert_eq!(cfg.output_dim, 19);
    assert_eq!(cfg.block_outputs(), vec![(16, 32), (32, 16), (64, 8)]);
    assert_eq!(cfg.param_shapes()[3], (128 * 64 * 8 * 8, 128));
}
