use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use szego_core::fourier::Indicator;
use szego_core::setlib::{cantor_shift_grid, modulus_window};
use szego_core::{assemble, eigenvalues, entropy, AssemblyOptions, CantorSet, Mode, RegionSpec, StepSymbol};

fn assemble_and_solve(c: &mut Criterion) {
    let opts = AssemblyOptions::default();
    let half = StepSymbol::cube(-PI / 2.0, PI / 2.0, 1).unwrap();
    let lattice = RegionSpec::cube(0.0, 1.0, 1, Mode::Lattice).unwrap();
    let continuum = RegionSpec::cube(0.0, 1.0, 1, Mode::Nystrom).unwrap();
    let band = StepSymbol::cube(-1.0, 1.0, 1).unwrap();

    let mut g = c.benchmark_group("pipeline_n512");
    g.sample_size(10);
    g.bench_function("lattice_assemble", |b| {
        b.iter(|| assemble(&lattice, &half, black_box(512.0), &opts).unwrap())
    });
    let op = assemble(&lattice, &half, 512.0, &opts).unwrap();
    g.bench_function("lattice_eigenvalues", |b| b.iter(|| eigenvalues(black_box(&op)).unwrap()));
    g.bench_function("lattice_entropy_end_to_end", |b| {
        b.iter(|| {
            let op = assemble(&lattice, &half, black_box(512.0), &opts).unwrap();
            entropy(&eigenvalues(&op).unwrap()).unwrap()
        })
    });
    // about 512 nodes at the default spacing
    g.bench_function("nystrom_assemble", |b| {
        b.iter(|| assemble(&continuum, &band, black_box(400.0), &opts).unwrap())
    });
    g.finish();
}

fn cantor_transform(c: &mut Criterion) {
    let set = CantorSet::from_beta(0.5).unwrap();
    let union = set.to_union().unwrap();
    let freqs: Vec<f64> = (1..=64).map(|k| 37.0 * k as f64).collect();

    let mut g = c.benchmark_group("cantor_fourier_64_points");
    g.bench_function("structured", |b| {
        b.iter(|| freqs.iter().map(|&u| set.fourier(black_box(u)).norm_sqr()).sum::<f64>())
    });
    g.sample_size(10);
    g.bench_function("interval_sum", |b| {
        b.iter(|| freqs.iter().map(|&u| union.fourier(black_box(u)).norm_sqr()).sum::<f64>())
    });
    g.finish();
}

fn modulus_sweep(c: &mut Criterion) {
    let set = CantorSet::from_beta(0.5).unwrap();
    let params = *set.params();
    let union = set.to_union().unwrap();
    let shifts = cantor_shift_grid(&params);

    let mut g = c.benchmark_group("modulus_window");
    g.sample_size(10);
    g.bench_function("beta_0.5", |b| {
        b.iter(|| modulus_window(black_box(&union), 0.5, &shifts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, assemble_and_solve, cantor_transform, modulus_sweep);
criterion_main!(benches);
