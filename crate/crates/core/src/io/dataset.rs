//! Sequence directories: `NAME.dipi` readings paired with `NAME.dips` poses.

use std::path::{Path, PathBuf};

use super::formats::{load_imu, load_poses, save_imu, save_poses};
use crate::error::{Error, Result};
use crate::normalization::NormalizationScheme;
use crate::synthesis::{PoseSequence, SequenceSample, SyntheticImuSequence};

pub const IMU_EXTENSION: &str = "dipi";
pub const POSE_EXTENSION: &str = "dips";

/// Writes `dir/name.dipi` and `dir/name.dips`.
pub fn save_sequence(
    dir: &Path,
    name: &str,
    imu: &SyntheticImuSequence,
    poses: &PoseSequence,
) -> Result<()> {
    save_imu(dir.join(format!("{name}.{IMU_EXTENSION}")), imu)?;
    save_poses(dir.join(format!("{name}.{POSE_EXTENSION}")), poses)
}

/// Sorted names of files in `dir` with the given extension.
pub fn list_names(dir: &Path, extension: &str) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == extension) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

pub fn sequence_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{name}.{IMU_EXTENSION}")),
        dir.join(format!("{name}.{POSE_EXTENSION}")),
    )
}

/// Loads every readings/poses pair in `dir` as a training sample, sorted by
/// name. Readings must already be in the body frame.
pub fn load_samples(dir: &Path, scheme: NormalizationScheme) -> Result<Vec<SequenceSample>> {
    let names = list_names(dir, IMU_EXTENSION)?;
    if names.is_empty() {
        return Err(Error::invalid(format!(
            "no .{IMU_EXTENSION} files in {}",
            dir.display()
        )));
    }
    names
        .iter()
        .map(|name| {
            let (imu_path, pose_path) = sequence_paths(dir, name);
            let imu = load_imu(&imu_path)?;
            let poses = load_poses(&pose_path)?;
            if imu.frames.len() != poses.frames.len() {
                return Err(Error::invalid(format!(
                    "{name}: {} reading frames but {} pose frames",
                    imu.frames.len(),
                    poses.frames.len()
                )));
            }
            SequenceSample::from_synthetic(name.as_str(), &imu, &poses, scheme)
        })
        .collect()
}
