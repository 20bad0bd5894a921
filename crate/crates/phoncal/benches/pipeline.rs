//! Throughput comparison of the data-parallel pipeline against its
//! sequential twin, on a small synthetic batch: per-track A-weighted
//! level measurement, and a full gain-search calibration session.
//!
//! Run with `cargo bench`; the parallel variants only differ from the
//! sequential ones when the `parallel` feature (default) is enabled.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use phoncal::calibrate::{run_session, run_session_seq, SessionConfig};
use phoncal::dsp::{batch_track_laeq, batch_track_laeq_seq, CalibratedTrack};
use phoncal::synth;

/// Eight one-second synthetic tracks at moderate levels — enough work
/// for the thread pool to matter, small enough for a quick bench run.
fn bench_tracks() -> Vec<CalibratedTrack> {
    (0..8)
        .map(|i| {
            synth::demo_track(&format!("bench_{i}"), 62.0 + 2.0 * i as f64, 1000 + i)
                .expect("bench track synthesis")
        })
        .collect()
}

fn bench_batch_laeq(c: &mut Criterion) {
    let tracks = bench_tracks();
    let mut group = c.benchmark_group("batch_track_laeq");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(batch_track_laeq(black_box(&tracks))))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(batch_track_laeq_seq(black_box(&tracks))))
    });
    group.finish();
}

fn bench_session(c: &mut Criterion) {
    let tracks = bench_tracks();
    let targets: Vec<f64> = tracks.iter().map(|t| t.nominal_laeq_db).collect();
    let rig = synth::ideal_rig();
    let config = SessionConfig {
        run_count: 1,
        ..SessionConfig::default()
    };

    let mut group = c.benchmark_group("run_session");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter_batched(
            || (),
            |()| black_box(run_session(&rig, &tracks, &targets, &config).unwrap()),
            BatchSize::PerIteration,
        )
    });
    group.bench_function("sequential", |b| {
        b.iter_batched(
            || (),
            |()| black_box(run_session_seq(&rig, &tracks, &targets, &config).unwrap()),
            BatchSize::PerIteration,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_batch_laeq, bench_session);
criterion_main!(benches);
