//! Criterion benchmarks for the three hot paths of the pipeline: pulse
//! train generation, the cascaded low-pass filter, and the per-pulse
//! Gaussian fit at the production window size (50 000 samples).

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use wvsim_core::estimator::fit_gaussian;
use wvsim_core::instrument::{apply_lowpass, generate_pulse_train, slice_pulses, Channel};
use wvsim_core::signal::{InterferometerGeometry, PulseEnvelope, Technique, TiltState, WorkingPoint};
use wvsim_core::{FilterConfig, NoiseConfig, PulseTrainConfig, SampledTrace, TraceSet};

fn single_pulse_train() -> PulseTrainConfig {
    PulseTrainConfig::new(
        PulseEnvelope::new(1.0, 0.1, 0.5).unwrap(),
        1.0,
        1,
        2e-5,
        None,
        1,
    )
    .unwrap()
}

fn balanced_geometry() -> InterferometerGeometry {
    InterferometerGeometry::new(795e-9, 5.64e-3, WorkingPoint::Balanced).unwrap()
}

fn bench_generate(c: &mut Criterion) {
    let train = single_pulse_train();
    let geom = balanced_geometry();
    let tilt = TiltState::new(1e-6, 156e-9);
    let noise = NoiseConfig {
        additive_rms: 0.005,
        shot_noise: false,
        baseline_offset: 0.0,
    };
    let filt = FilterConfig::disabled();
    c.bench_function("generate_pulse_train_50k", |b| {
        b.iter(|| {
            generate_pulse_train(
                black_box(&train),
                black_box(&tilt),
                &geom,
                Technique::Abwv,
                &noise,
                &filt,
            )
            .unwrap()
        })
    });
}

fn bench_filter(c: &mut Criterion) {
    let samples: Vec<f64> = (0..50_000)
        .map(|i| {
            let t = i as f64 * 2e-5;
            let z = (t - 0.5) / 0.1;
            (-0.5 * z * z).exp()
        })
        .collect();
    let trace = SampledTrace::new(0.0, 2e-5, Channel::Sum, samples).unwrap();
    let filt = FilterConfig::bench_default();
    c.bench_function("lowpass_two_pole_50k", |b| {
        b.iter(|| apply_lowpass(black_box(&trace), &filt).unwrap())
    });
}

fn bench_fit(c: &mut Criterion) {
    let train = single_pulse_train();
    let geom = balanced_geometry();
    let tilt = TiltState::new(1e-6, 156e-9);
    let noise = NoiseConfig {
        additive_rms: 0.005,
        shot_noise: false,
        baseline_offset: 0.0,
    };
    let set = generate_pulse_train(
        &train,
        &tilt,
        &geom,
        Technique::Abwv,
        &noise,
        &FilterConfig::disabled(),
    )
    .unwrap();
    let TraceSet::Abwv { difference, .. } = set else {
        unreachable!()
    };
    let pulse = slice_pulses(&difference, 1.0).unwrap().remove(0);
    c.bench_function("fit_gaussian_50k", |b| {
        b.iter(|| fit_gaussian(black_box(&pulse), None).unwrap())
    });
}

criterion_group!(benches, bench_generate, bench_filter, bench_fit);
criterion_main!(benches);
