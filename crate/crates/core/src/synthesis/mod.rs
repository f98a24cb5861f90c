//! Virtual IMU data from pose sequences.
//!
//! Sensor orientations come straight from forward kinematics; accelerations
//! are central second differences of sensor positions. Both are gravity-free
//! body-frame quantities, i.e. what calibration produces from real readings.

mod dataset;
mod motion;

pub use dataset::{build_dataset, Dataset, SequenceSample, Split};
pub use motion::{
    generate_procedural_motions, MotionCatalog, MotionFamily, MotionSpec, MIN_MOTION_FRAMES,
};

use crate::error::{Error, Result};
use crate::kinematics::{
    forward_kinematics, sensor_world_transform, validate_sensors, KinematicTree, Pose, Transform,
    VirtualSensor,
};
use crate::rotation::{Rotation, Vec3};
use crate::sensor::SensorFrame;

/// One mocap frame: local joint rotations plus the global root transform.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub pose: Pose,
    pub root_rotation: Rotation,
    pub root_position: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub fps: u32,
    pub frames: Vec<PoseFrame>,
}

impl PoseSequence {
    pub fn new(fps: u32, frames: Vec<PoseFrame>) -> Result<Self> {
        if fps == 0 {
            return Err(Error::invalid("fps must be positive"));
        }
        if frames.len() < 3 {
            return Err(Error::invalid(format!(
                "a pose sequence needs at least 3 frames, got {}",
                frames.len()
            )));
        }
        Ok(Self { fps, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fps as f64
    }
}

/// Per-frame sensor orientations and accelerations at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImuSequence {
    pub fps: u32,
    pub frames: Vec<SensorFrame>,
}

fn sensor_transforms(
    seq: &PoseSequence,
    tree: &KinematicTree,
    sensors: &[VirtualSensor],
) -> Result<Vec<Vec<Transform>>> {
    validate_sensors(tree, sensors)?;
    seq.frames
        .iter()
        .map(|f| {
            let globals = forward_kinematics(tree, &f.pose, &f.root_rotation, &f.root_position)?;
            Ok(sensors
                .iter()
                .map(|s| sensor_world_transform(&globals[s.bone], s))
                .collect())
        })
        .collect()
}

/// Sensor orientations for every frame of `seq`.
pub fn synthesize_orientations(
    seq: &PoseSequence,
    tree: &KinematicTree,
    sensors: &[VirtualSensor],
) -> Result<Vec<Vec<Rotation>>> {
    Ok(sensor_transforms(seq, tree, sensors)?
        .into_iter()
        .map(|f| f.into_iter().map(|t| t.rotation).collect())
        .collect())
}

/// Central second difference `(p[t-1] + p[t+1] - 2 p[t]) / dt²` of each
/// sensor track. Output frame `k` corresponds to input frame `k + 1`; the
/// first and last input frames have no output.
pub fn synthesize_accelerations(positions: &[Vec<Vec3>], dt: f64) -> Result<Vec<Vec<Vec3>>> {
    if positions.len() < 3 {
        return Err(Error::invalid(format!(
            "acceleration synthesis needs at least 3 frames, got {}",
            positions.len()
        )));
    }
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::invalid("dt must be positive"));
    }
    let width = positions[0].len();
    if positions.iter().any(|f| f.len() != width) {
        return Err(Error::invalid("frames have different sensor counts"));
    }
    let inv_dt2 = 1.0 / (dt * dt);
    Ok(positions
        .windows(3)
        .map(|w| {
            (0..width)
                .map(|s| (w[0][s] + w[2][s] - 2.0 * w[1][s]) * inv_dt2)
                .collect()
        })
        .collect())
}

/// Synthesizes IMU readings for `seq` and returns them with the pose
/// sequence trimmed to the same frames (first and last dropped).
pub fn synthesize(
    seq: &PoseSequence,
    tree: &KinematicTree,
    sensors: &[VirtualSensor],
) -> Result<(SyntheticImuSequence, PoseSequence)> {
    let transforms = sensor_transforms(seq, tree, sensors)?;
    let positions: Vec<Vec<Vec3>> = transforms
        .iter()
        .map(|f| f.iter().map(|t| t.position).collect())
        .collect();
    let accelerations = synthesize_accelerations(&positions, seq.dt())?;
    let frames = accelerations
        .into_iter()
        .enumerate()
        .map(|(k, acc)| SensorFrame {
            orientations: transforms[k + 1].iter().map(|t| t.rotation).collect(),
            accelerations: acc,
        })
        .collect();
    let trimmed = PoseSequence {
        fps: seq.fps,
        frames: seq.frames[1..seq.len() - 1].to_vec(),
    };
    Ok((
        SyntheticImuSequence {
            fps: seq.fps,
            frames,
        },
        trimmed,
    ))
}

/// Source frame indices selected when resampling `len` frames from
/// `source_fps` to `target_fps`.
pub fn resample_indices(len: usize, source_fps: u32, target_fps: u32) -> Result<Vec<usize>> {
    if target_fps == 0 {
        return Err(Error::invalid("target fps must be positive"));
    }
    if target_fps > source_fps {
        return Err(Error::UnsupportedUpsample {
            from: source_fps,
            to: target_fps,
        });
    }
    if source_fps.is_multiple_of(target_fps) {
        let stride = (source_fps / target_fps) as usize;
        return Ok((0..len).step_by(stride).collect());
    }
    // Nearest source frame on the target time grid.
    let ratio = source_fps as f64 / target_fps as f64;
    let count = (len as f64 / ratio).round() as usize;
    Ok((0..count)
        .map(|k| ((k as f64 * ratio).round() as usize).min(len.saturating_sub(1)))
        .collect())
}

pub fn resample(seq: &PoseSequence, target_fps: u32) -> Result<PoseSequence> {
    let indices = resample_indices(seq.len(), seq.fps, target_fps)?;
    PoseSequence::new(
        target_fps,
        indices.into_iter().map(|i| seq.frames[i].clone()).collect(),
    )
}
