use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use specula::fusion::FusionState;
use specula::geometry::{raycast_with, SceneTracer};
use specula::planner::{run_nbv_loop, NbvSession, Policy, StopConditions};
use specula::response::{recover_response, ExposureStack};
use specula::sensor::simulate_capture_with;
use specula::IntensityImage;
use specula_bench::preset_problem;

fn raycast(c: &mut Criterion) {
    let problem = preset_problem("sphere");
    let rig = problem.layout.place(&problem.reference_pose).unwrap();
    let tracer = SceneTracer::new(&problem.scene);
    c.bench_function("raycast_80x60_sphere", |b| b.iter(|| raycast_with(black_box(&tracer), &rig.left)));
    c.bench_function("simulate_capture_80x60_sphere", |b| {
        b.iter(|| simulate_capture_with(&tracer, &problem.scene, black_box(&rig), &problem.curve, &problem.sensing))
    });
}

fn gain(c: &mut Criterion) {
    let problem = preset_problem("plate");
    let session = NbvSession::prepare(&problem, 0).unwrap();
    let model = session.gain_model();
    let missing = session.missing_set(model, session.initial());
    c.bench_function("viewpoint_gain_plate_k5", |b| {
        b.iter(|| model.viewpoint_gain(black_box(&problem.candidates[3]), &missing).unwrap())
    });
    c.bench_function("select_nbv_plate_32_candidates", |b| {
        b.iter(|| model.select_nbv(black_box(&problem.candidates), &missing).unwrap())
    });
}

fn fusion(c: &mut Criterion) {
    let problem = preset_problem("plate");
    let tracer = SceneTracer::new(&problem.scene);
    let reference = problem.layout.place(&problem.reference_pose).unwrap();
    let other = problem.layout.place(&problem.candidates[5].pose).unwrap();
    let base = simulate_capture_with(&tracer, &problem.scene, &reference, &problem.curve, &problem.sensing).depth;
    let view = simulate_capture_with(&tracer, &problem.scene, &other, &problem.curve, &problem.sensing).depth;
    let state = FusionState::with_config(reference.left, base, problem.fusion).unwrap();
    c.bench_function("fuse_view_80x60", |b| {
        b.iter(|| {
            let mut s = state.clone();
            s.fuse_view(black_box(&view), &other.left).unwrap()
        })
    });
}

fn response(c: &mut Criterion) {
    let times: Vec<f64> = (0..8).map(|j| 0.25 * 2f64.powi(j)).collect();
    let images: Vec<IntensityImage> = times
        .iter()
        .map(|&dt| {
            IntensityImage::from_fn(64, 48, |u, v| {
                let e = (-6.0 + 9.0 * (v * 64 + u) as f64 / 3072.0).exp();
                (255.0 * (e * dt).powf(1.0 / 2.2)).round().clamp(0.0, 255.0) as u8
            })
        })
        .collect();
    let stack = ExposureStack::new(images, times).unwrap();
    c.bench_function("recover_response_8x256", |b| b.iter(|| recover_response(black_box(&stack), 100.0, 256).unwrap()));
}

fn nbv_loop(c: &mut Criterion) {
    let problem = preset_problem("plate");
    let stop = StopConditions::default();
    let mut group = c.benchmark_group("nbv_loop");
    group.sample_size(10);
    group.bench_function("plate_3_views", |b| b.iter(|| run_nbv_loop(&problem, Policy::Nbv, &stop, black_box(1)).unwrap()));
    group.finish();
}

criterion_group!(benches, raycast, gain, fusion, response, nbv_loop);
criterion_main!(benches);
