use bias_lab_core::certify::{l1_fourier_max_margin, l2_max_margin};
use bias_lab_core::models::{self, ArchKind, Architecture};
use bias_lab_core::rng::SplitMix64;
use bias_lab_core::spectral::{dft, idft};
use bias_lab_core::training::{self, loss_grad_w};
use bias_lab_core::{datagen, GenKind, GenSpec, StepPolicy, TrainConfig};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("dft");
    for dim in [8usize, 64, 256] {
        let v = SplitMix64::new(1).normal_vec(dim, 1.0);
        group.bench_with_input(BenchmarkId::new("forward", dim), &v, |b, v| b.iter(|| dft(black_box(v))));
        let hat = dft(&v);
        group.bench_with_input(BenchmarkId::new("inverse", dim), &hat, |b, h| b.iter(|| idft(black_box(h)).unwrap()));
    }
    group.finish();
}

fn gradients(c: &mut Criterion) {
    let spec = GenSpec { dim: 16, n: 32, seed: 2, kind: GenKind::GaussianSeparable { margin_gap: 0.3 } };
    let data = datagen::generate(&spec).unwrap();
    let mut group = c.benchmark_group("grad_params");
    for kind in [ArchKind::FullyConnected, ArchKind::Diagonal, ArchKind::Convolutional] {
        let params = models::init_params(&Architecture::new(kind, 16, 3), 0.5, 3).unwrap();
        group.bench_function(kind.name(), |b| {
            b.iter(|| {
                let w = models::predictor(black_box(&params)).unwrap();
                let g = loss_grad_w(&w, &data).unwrap();
                models::grad_params(&params, &g).unwrap()
            })
        });
    }
    group.finish();
}

fn gd_steps(c: &mut Criterion) {
    let spec = GenSpec { dim: 8, n: 16, seed: 4, kind: GenKind::GaussianSeparable { margin_gap: 0.3 } };
    let data = datagen::generate(&spec).unwrap();
    let config = TrainConfig { max_iters: 100, trace_stride: 100, ..TrainConfig::default() };
    let fixed = TrainConfig { step_policy: StepPolicy::Fixed { eta: 1e-3 }, ..config.clone() };
    let mut group = c.benchmark_group("gd_100_steps");
    for kind in [ArchKind::FullyConnected, ArchKind::Diagonal, ArchKind::Convolutional] {
        let arch = Architecture::new(kind, 8, 2);
        group.bench_function(format!("{}-loss-adaptive", kind.name()), |b| {
            b.iter(|| training::gd_train(&arch, &data, &config).unwrap())
        });
        group.bench_function(format!("{}-fixed", kind.name()), |b| {
            b.iter(|| training::gd_train(&arch, &data, &fixed).unwrap())
        });
    }
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let spec = GenSpec {
        dim: 8,
        n: 16,
        seed: 7,
        kind: GenKind::FourierSparse { k_active: 2, margin_gap: 0.3, frequencies: None },
    };
    let data = datagen::generate(&spec).unwrap();
    let mut group = c.benchmark_group("solvers");
    group.sample_size(20);
    group.bench_function("l2", |b| b.iter(|| l2_max_margin(black_box(&data), 1e-10)));
    group.bench_function("l1f", |b| b.iter(|| l1_fourier_max_margin(black_box(&data), 1e-8, 1.0)));
    group.finish();
}

criterion_group!(benches, spectral, gradients, gd_steps, solvers);
criterion_main!(benches);
