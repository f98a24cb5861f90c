//! Shared fixtures for the benchmarks.

use imucap_core::kinematics::default_sensors;
use imucap_core::normalization::normalize_sequence;
use imucap_core::synthesis::{
    generate_procedural_motions, synthesize, MotionCatalog, PoseSequence, SequenceSample,
};
use imucap_core::training::fit_standardizer_on;
use imucap_core::{CalibratedFrame, Checkpoint, KinematicTree, ModelConfig, Params};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A 600-frame procedural walk.
pub fn walk() -> PoseSequence {
    let catalog = MotionCatalog::from_names(&["walk"], 1, 600, 60).expect("known motion");
    generate_procedural_motions(&catalog, 0)
        .expect("valid catalog")
        .remove(0)
}

pub fn walk_frames() -> Vec<CalibratedFrame> {
    synthesize(
        &walk(),
        &KinematicTree::default_skeleton(),
        &default_sensors(),
    )
    .expect("default rig")
    .0
    .frames
}

/// Untrained model with statistics fitted on the walk.
pub fn checkpoint(hidden_units: usize) -> Checkpoint {
    let seq = walk();
    let (imu, poses) = synthesize(&seq, &KinematicTree::default_skeleton(), &default_sensors())
        .expect("default rig");
    let config = ModelConfig::toy(hidden_units);
    let sample = SequenceSample::new(
        "walk",
        normalize_sequence(&imu.frames, config.scheme).expect("six sensors"),
        poses.frames.iter().map(|f| f.pose.clone()).collect(),
    )
    .expect("aligned");
    let standardizer = fit_standardizer_on(&[&sample]).expect("nonempty");
    let params = Params::init(&config, &mut ChaCha8Rng::seed_from_u64(0)).expect("valid config");
    Checkpoint {
        config,
        standardizer,
        params,
    }
}
