use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use multiway::cpd::{cpd_als, CpInit, CpOptions};
use multiway::par;
use multiway::tt::{tt_element, tt_svd};
use multiway::tucker::mlsvd;
use multiway::DenseTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(shape, |_| r.sample(StandardNormal)).unwrap()
}

fn cp_trial(seed: usize) -> f64 {
    let t = random_tensor(&[10, 10, 10], seed as u64);
    let opts = CpOptions { max_iters: 30, tol: 0.0, init: CpInit::Random, seed: seed as u64 };
    cpd_als(&t, 3, &opts).unwrap().1.final_fit()
}

fn trials(c: &mut Criterion) {
    let mut g = c.benchmark_group("cp_trials_16");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| par::map_indices(black_box(16), cp_trial)));
    g.bench_function("sequential", |b| b.iter(|| par::map_indices_sequential(black_box(16), cp_trial)));
    g.finish();
}

fn tt_batch(c: &mut Criterion) {
    let t = random_tensor(&[6, 6, 6, 6, 6], 1);
    let m = tt_svd(&t, 1e-12).unwrap();
    let indices: Vec<Vec<usize>> = (0..20_000).map(|k| (0..5).map(|n| (k / 6usize.pow(n)) % 6).collect()).collect();
    let mut g = c.benchmark_group("tt_elements_20000");
    g.bench_function("parallel", |b| b.iter(|| par::map_slice(&indices, |idx| tt_element(&m, idx).unwrap())));
    g.bench_function("sequential", |b| {
        b.iter(|| indices.iter().map(|idx| tt_element(&m, idx).unwrap()).collect::<Vec<_>>())
    });
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let t = random_tensor(&[20, 20, 20], 2);
    c.bench_function("mlsvd_20x20x20", |b| b.iter(|| mlsvd(black_box(&t)).unwrap()));
}

criterion_group!(benches, trials, tt_batch, kernels);
criterion_main!(benches);
