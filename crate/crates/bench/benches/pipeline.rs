use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use imucap_bench::{checkpoint, walk, walk_frames};
use imucap_core::inference::{StreamState, WindowConfig};
use imucap_core::kinematics::forward_kinematics;
use imucap_core::network::{predict, Frames};
use imucap_core::rotation::project_to_rotation;
use imucap_core::KinematicTree;
use nalgebra::Matrix3;

fn kinematics(c: &mut Criterion) {
    let tree = KinematicTree::default_skeleton();
    let frame = &walk().frames[100];
    c.bench_function("forward_kinematics", |b| {
        b.iter(|| {
            forward_kinematics(
                &tree,
                black_box(&frame.pose),
                &frame.root_rotation,
                &frame.root_position,
            )
        })
    });
    let m = Matrix3::new(0.9, 0.1, -0.2, -0.05, 1.1, 0.3, 0.2, -0.3, 0.95);
    c.bench_function("project_to_rotation", |b| {
        b.iter(|| project_to_rotation(black_box(&m)))
    });
}

fn network(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_window_26");
    for hidden in [32, 128] {
        let ckpt = checkpoint(hidden);
        let x = Frames::zeros(26, ckpt.config.input_dim);
        group.bench_with_input(BenchmarkId::from_parameter(hidden), &x, |b, x| {
            b.iter(|| predict(&ckpt.params, &ckpt.config, black_box(x)))
        });
    }
    group.finish();
}

fn streaming(c: &mut Criterion) {
    let ckpt = checkpoint(32);
    let frames = walk_frames();
    c.bench_function("online_step_20_5", |b| {
        let mut state = StreamState::new(WindowConfig::new(20, 5));
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % frames.len();
            state.push_calibrated(&ckpt, black_box(&frames[i]))
        })
    });
}

criterion_group!(benches, kinematics, network, streaming);
criterion_main!(benches);
