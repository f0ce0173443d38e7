use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qfold_bench::{schedule, tetrapeptide, walk_cost};
use qfold_core::lattice::EncodingMode;
use qfold_core::optimize::Evaluator;
use qfold_core::qsim::{apply_mixer, apply_phase, apply_qudit_mixer_fourier, uniform_state, Mixer};

fn mixers(c: &mut Criterion) {
    let radices = vec![3; 10];
    let state = uniform_state(&radices);
    let mut group = c.benchmark_group("mixer_3^10");
    group.bench_function("inversion", |b| {
        let mut s = state.clone();
        b.iter(|| apply_mixer(&mut s, Mixer::InversionAboutMean, black_box(&[0.4])).unwrap())
    });
    group.bench_function("qudit_projector", |b| {
        let mut s = state.clone();
        b.iter(|| apply_mixer(&mut s, Mixer::Qudit, black_box(&[0.4, -0.7])).unwrap())
    });
    group.bench_function("qudit_fourier", |b| {
        let mut s = state.clone();
        b.iter(|| apply_qudit_mixer_fourier(&mut s, black_box(&[0.4, -0.7])).unwrap())
    });
    group.finish();

    let qubits = uniform_state(&[4; 8]);
    c.bench_function("mixer_4^8/qubit_x", |b| {
        let mut s = qubits.clone();
        b.iter(|| apply_mixer(&mut s, Mixer::QubitX, black_box(&[0.4])).unwrap())
    });
}

fn phase(c: &mut Criterion) {
    let walk = walk_cost(10, EncodingMode::Absolute);
    let peptide = tetrapeptide();
    let mut group = c.benchmark_group("phase");
    for (name, cost) in [("saw10_absolute", &walk), ("tetrapeptide", &peptide.cost)] {
        let state = uniform_state(cost.radices());
        group.bench_function(name, |b| {
            let mut s = state.clone();
            b.iter(|| apply_phase(&mut s, cost, black_box(0.3)).unwrap())
        });
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let peptide = tetrapeptide();
    let walk = walk_cost(10, EncodingMode::Absolute);
    let mut group = c.benchmark_group("energy_and_gradient");
    group.sample_size(20);
    for p in [1, 4, 16] {
        let sched = schedule(p, 2, Mixer::Qudit);
        group.bench_with_input(BenchmarkId::new("tetrapeptide", p), &sched, |b, s| {
            let mut ev = Evaluator::new(&peptide.cost, Mixer::Qudit).unwrap();
            b.iter(|| ev.energy_and_gradient(s).unwrap())
        });
        let sched = schedule(p, 1, Mixer::InversionAboutMean);
        group.bench_with_input(BenchmarkId::new("saw10_absolute", p), &sched, |b, s| {
            let mut ev = Evaluator::new(&walk, Mixer::InversionAboutMean).unwrap();
            b.iter(|| ev.energy_and_gradient(s).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, mixers, phase, gradient);
criterion_main!(benches);
