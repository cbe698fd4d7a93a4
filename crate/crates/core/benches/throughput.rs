//! Data-parallel throughput against one worker thread. Built without the
//! `parallel` feature, every group measures the sequential fallback only.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fmd_core::cnn::train::synth_sample;
use fmd_core::cnn::{Network, NetworkConfig};
use fmd_core::decompose::{brute_force_decompose, enumerate_candidates};
use fmd_core::{par, render, rng, sample_basis, sample_coefficients, FiberSpec, GridSpec, ModeBasis};

fn basis(fiber: FiberSpec, res: usize, n: usize) -> ModeBasis {
    sample_basis(&fiber, &GridSpec::for_fiber(&fiber, res).unwrap(), n).unwrap()
}

/// Runs `f` on the global pool and on a single-thread pool.
fn compare(c: &mut Criterion, group: &str, mut f: impl FnMut() + Send) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    let name = if cfg!(feature = "parallel") { "rayon" } else { "sequential" };
    g.bench_function(BenchmarkId::new(name, par::threads()), |b| b.iter(&mut f));
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        g.bench_function(BenchmarkId::new("rayon_single", 1), |b| b.iter(|| single.install(&mut f)));
    }
    g.finish();
}

fn batch_synthesis(c: &mut Criterion) {
    let b = basis(FiberSpec::three_mode(), 64, 3);
    compare(c, "synthesize_batch_64", || {
        let out = par::map_range(64, |i| synth_sample(&b, 0.0, &mut rng::stream(1, &[i as u64])).unwrap());
        black_box(out);
    });
}

fn network(c: &mut Criterion) {
    let net = Network::<f32>::initialized(NetworkConfig::compact(3), 1).unwrap();
    let b = basis(FiberSpec::three_mode(), 64, 3);
    let inputs: Vec<Vec<f32>> = (0..64)
        .map(|i| {
            let (img, _) = synth_sample(&b, 0.0, &mut rng::stream(2, &[i])).unwrap();
            img.data().iter().map(|&v| v as f32).collect()
        })
        .collect();
    let labels = vec![vec![0.5f32; 5]; 64];
    compare(c, "compact_forward_64", || {
        black_box(net.forward_inputs(&inputs).unwrap());
    });
    compare(c, "compact_gradients_64", || {
        black_box(net.loss_and_gradients(&inputs, &labels).unwrap());
    });
}

fn disambiguation(c: &mut Criterion) {
    let b = basis(FiberSpec::ten_mode(), 128, 10);
    let truth = sample_coefficients(&mut rng::seeded(3), 10);
    let image = render(&b, &truth).unwrap();
    let mags: Vec<f64> = truth.phases().iter().map(|p| p.abs()).collect();
    compare(c, "disambiguate_10_modes", || {
        black_box(enumerate_candidates(&b, &image, truth.weights(), &mags).unwrap());
    });
}

fn brute_force(c: &mut Criterion) {
    let b = basis(FiberSpec::three_mode(), 64, 3);
    let image = render(&b, &sample_coefficients(&mut rng::seeded(4), 3)).unwrap();
    compare(c, "brute_force_3_modes_21_steps", || {
        black_box(brute_force_decompose(&b, &image, 21).unwrap());
    });
}

criterion_group!(benches, batch_synthesis, network, disambiguation, brute_force);
criterion_main!(benches);
