use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use qdtune_core::classifier::ClassifierModel;
use qdtune_core::preprocess::process;
use qdtune_core::tuner::{initial_simplex, nelder_mead, TerminationConfig};
use qdtune_core::{
    autotune, DeviceParams, MeasurementSource, Noise, OracleClassifier, Sandbox, SimplexPolicy,
    TuneConfig,
};

fn render(c: &mut Criterion) {
    let device = DeviceParams::reference();
    c.bench_function("render 30x30 window", |b| {
        b.iter(|| {
            device.render_scan(
                black_box((300.0, 250.0)),
                (60.0, 60.0),
                2.0,
                Noise::Seeded(1),
            )
        })
    });
}

fn preprocess(c: &mut Criterion) {
    let (scan, _) = DeviceParams::reference()
        .render_scan((300.0, 250.0), (60.0, 60.0), 2.0, Noise::Seeded(1))
        .unwrap();
    c.bench_function("process window", |b| b.iter(|| process(black_box(&scan))));
}

fn classify(c: &mut Criterion) {
    let (scan, _) = DeviceParams::reference()
        .render_scan((300.0, 250.0), (60.0, 60.0), 2.0, Noise::Seeded(1))
        .unwrap();
    let image = process(&scan).unwrap();
    let model = ClassifierModel::new(&[900, 128, 64, 3], 0).unwrap();
    c.bench_function("classify image", |b| {
        b.iter(|| model.classify(black_box(&image)))
    });
}

fn optimize(c: &mut Criterion) {
    let simplex = initial_simplex((400.0, 420.0), &SimplexPolicy::fixed(75.0), 0.0);
    let term = TerminationConfig {
        fitness_tolerance: 1e-10,
        simplex_size_tolerance: 1e-4,
        max_iterations: 200,
        ..TerminationConfig::default()
    };
    let f = |x: &[f64; 2]| -> Result<f64, ()> {
        Ok((x[0] - 310.0).powi(2) + 2.0 * (x[1] - 290.0).powi(2))
    };
    c.bench_function("nelder-mead quadratic", |b| {
        b.iter(|| nelder_mead(f, black_box(&simplex), None, &term))
    });
}

fn tune(c: &mut Criterion) {
    let source = MeasurementSource::simulated(DeviceParams::reference(), Noise::Off).unwrap();
    let cfg = TuneConfig::default();
    let sandbox = Sandbox::default();
    c.bench_function("oracle tuning run", |b| {
        b.iter(|| {
            autotune(
                &source,
                &OracleClassifier,
                black_box((250.0, 230.0)),
                &cfg,
                &sandbox,
            )
        })
    });
}

criterion_group!(benches, render, preprocess, classify, optimize, tune);
criterion_main!(benches);
