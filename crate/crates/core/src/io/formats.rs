//! Binary persistence: pose sequences (DIPS), IMU sequences (DIPI),
//! calibrations (DIPC) and model checkpoints (DIPM).
//!
//! All integers and floats are little-endian. Every format starts with a
//! four-byte magic and a u32 version, currently 1.
//!
//! ```text
//! DIPS  fps u32, frames u32, joints u32,
//!       per frame: root position 3×f32, root rotation 9×f32,
//!                  joints × 9×f32 local rotations (row-major)
//! DIPI  fps u32, frames u32, sensors u32,
//!       per frame per sensor: orientation 9×f32, acceleration 3×f32
//! DIPC  sensors u32, R_TI 9×f32, gravity 3×f32, per sensor R_BS 9×f32
//! DIPM  config, standardizer, u32 tensor count,
//!       per tensor: u32 name length, name, u32 rank, rank×u32 dims, f64 data
//! ```

use std::fs;
use std::path::Path;

use super::binary::{len_u32, Reader, WriteLe};
use crate::calibration::CalibrationState;
use crate::error::{Error, Result};
use crate::kinematics::{Pose, JOINT_COUNT, SENSOR_COUNT};
use crate::network::{Checkpoint, ModelConfig, Params};
use crate::normalization::{NormalizationScheme, Standardizer, Stats};
use crate::rotation::is_rotation;
use crate::sensor::SensorFrame;
use crate::synthesis::{PoseFrame, PoseSequence, SyntheticImuSequence};

pub const FORMAT_VERSION: u32 = 1;
pub const POSE_MAGIC: &[u8; 4] = b"DIPS";
pub const IMU_MAGIC: &[u8; 4] = b"DIPI";
pub const CALIBRATION_MAGIC: &[u8; 4] = b"DIPC";
pub const MODEL_MAGIC: &[u8; 4] = b"DIPM";

/// Upper bound on any count read from a header.
const MAX_COUNT: usize = 1 << 28;
/// Pose matrices stored as f32 are accepted within this of orthonormal.
const STORED_ROTATION_TOLERANCE: f64 = 1e-4;

pub fn encode_poses(seq: &PoseSequence) -> Result<Vec<u8>> {
    let joints = seq
        .frames
        .first()
        .map_or(JOINT_COUNT, |f| f.pose.joint_rotations.len());
    if seq
        .frames
        .iter()
        .any(|f| f.pose.joint_rotations.len() != joints)
    {
        return Err(Error::invalid("frames have different joint counts"));
    }
    let mut b = Vec::with_capacity(20 + seq.frames.len() * (12 + joints * 9) * 4);
    b.extend_from_slice(POSE_MAGIC);
    b.put_u32(FORMAT_VERSION);
    b.put_u32(seq.fps);
    b.put_u32(len_u32(seq.frames.len(), "frame count")?);
    b.put_u32(len_u32(joints, "joint count")?);
    for f in &seq.frames {
        b.put_vec3_f32(&f.root_position);
        b.put_rotation_f32(&f.root_rotation);
        for r in &f.pose.joint_rotations {
            b.put_rotation_f32(r);
        }
    }
    Ok(b)
}

pub fn decode_poses(bytes: &[u8]) -> Result<PoseSequence> {
    let mut r = Reader::new(bytes, "DIPS");
    r.magic(POSE_MAGIC)?;
    r.version(FORMAT_VERSION)?;
    let fps = r.u32()?;
    let frames = r.count(MAX_COUNT)?;
    let joints = r.count(1024)?;
    if fps == 0 {
        return Err(r.malformed("fps is zero"));
    }
    let mut out = Vec::with_capacity(frames.min(r.remaining() / 4));
    for _ in 0..frames {
        let root_position = r.vec3_f32()?;
        let root_rotation = r.rotation_f32()?;
        let joint_rotations = (0..joints)
            .map(|_| r.rotation_f32())
            .collect::<Result<Vec<_>>>()?;
        out.push(PoseFrame {
            pose: Pose { joint_rotations },
            root_rotation,
            root_position,
        });
    }
    r.finish()?;
    for (t, f) in out.iter().enumerate() {
        let ok = std::iter::once(&f.root_rotation)
            .chain(&f.pose.joint_rotations)
            .all(|m| is_rotation(m.matrix(), STORED_ROTATION_TOLERANCE));
        if !ok {
            return Err(r.malformed(format!("frame {t} holds a matrix that is not a rotation")));
        }
    }
    Ok(PoseSequence { fps, frames: out })
}

pub fn encode_imu(seq: &SyntheticImuSequence) -> Result<Vec<u8>> {
    let sensors = seq
        .frames
        .first()
        .map_or(SENSOR_COUNT, SensorFrame::sensor_count);
    if seq.frames.iter().any(|f| f.sensor_count() != sensors) {
        return Err(Error::invalid("frames have different sensor counts"));
    }
    let mut b = Vec::with_capacity(20 + seq.frames.len() * sensors * 48);
    b.extend_from_slice(IMU_MAGIC);
    b.put_u32(FORMAT_VERSION);
    b.put_u32(seq.fps);
    b.put_u32(len_u32(seq.frames.len(), "frame count")?);
    b.put_u32(len_u32(sensors, "sensor count")?);
    for f in &seq.frames {
        for (o, a) in f.orientations.iter().zip(&f.accelerations) {
            b.put_rotation_f32(o);
            b.put_vec3_f32(a);
        }
    }
    Ok(b)
}

pub fn decode_imu(bytes: &[u8]) -> Result<SyntheticImuSequence> {
    let mut r = Reader::new(bytes, "DIPI");
    r.magic(IMU_MAGIC)?;
    r.version(FORMAT_VERSION)?;
    let fps = r.u32()?;
    let frames = r.count(MAX_COUNT)?;
    let sensors = r.count(1024)?;
    if fps == 0 {
        return Err(r.malformed("fps is zero"));
    }
    if sensors == 0 {
        return Err(r.malformed("no sensors"));
    }
    let mut out = Vec::with_capacity(frames.min(r.remaining() / 48));
    for _ in 0..frames {
        let mut orientations = Vec::with_capacity(sensors);
        let mut accelerations = Vec::with_capacity(sensors);
        for _ in 0..sensors {
            orientations.push(r.rotation_f32()?);
            accelerations.push(r.vec3_f32()?);
        }
        out.push(SensorFrame {
            orientations,
            accelerations,
        });
    }
    r.finish()?;
    Ok(SyntheticImuSequence { fps, frames: out })
}

pub fn encode_calibration(cal: &CalibrationState) -> Result<Vec<u8>> {
    let mut b = Vec::with_capacity(60 + cal.sensor_count() * 36);
    b.extend_from_slice(CALIBRATION_MAGIC);
    b.put_u32(FORMAT_VERSION);
    b.put_u32(len_u32(cal.sensor_count(), "sensor count")?);
    b.put_rotation_f32(&cal.inertial_to_body);
    b.put_vec3_f32(&cal.gravity);
    for r in &cal.bone_offsets {
        b.put_rotation_f32(r);
    }
    Ok(b)
}

pub fn decode_calibration(bytes: &[u8]) -> Result<CalibrationState> {
    let mut r = Reader::new(bytes, "DIPC");
    r.magic(CALIBRATION_MAGIC)?;
    r.version(FORMAT_VERSION)?;
    let sensors = r.count(1024)?;
    let inertial_to_body = r.rotation_f32()?;
    let gravity = r.vec3_f32()?;
    let bone_offsets = (0..sensors)
        .map(|_| r.rotation_f32())
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    let all_rotations = std::iter::once(&inertial_to_body)
        .chain(&bone_offsets)
        .all(|m| is_rotation(m.matrix(), STORED_ROTATION_TOLERANCE));
    if !all_rotations {
        return Err(r.malformed("calibration holds a matrix that is not a rotation"));
    }
    Ok(CalibrationState {
        inertial_to_body,
        bone_offsets,
        gravity,
    })
}

fn put_stats(b: &mut Vec<u8>, s: &Stats) -> Result<()> {
    b.put_u32(len_u32(s.dim(), "statistics width")?);
    for v in s.mean.iter().chain(&s.std) {
        b.put_f64(*v);
    }
    Ok(())
}

fn read_stats(r: &mut Reader<'_>) -> Result<Stats> {
    let n = r.count(1 << 16)?;
    let mean = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let std = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if std.iter().any(|s| *s <= 0.0) {
        return Err(r.malformed("non-positive standard deviation"));
    }
    Ok(Stats { mean, std })
}

fn put_bool(b: &mut Vec<u8>, v: bool) {
    b.put_u8(u8::from(v));
}

pub fn encode_checkpoint(c: &Checkpoint) -> Result<Vec<u8>> {
    c.validate()?;
    let cfg = &c.config;
    let mut b = Vec::new();
    b.extend_from_slice(MODEL_MAGIC);
    b.put_u32(FORMAT_VERSION);
    for v in [
        cfg.input_dim,
        cfg.dense_units,
        cfg.hidden_units,
        cfg.num_layers,
        cfg.pose_dim,
        cfg.acc_dim,
    ] {
        b.put_u32(len_u32(v, "model dimension")?);
    }
    put_bool(&mut b, cfg.bidirectional);
    b.put_f64(cfg.input_keep_prob);
    put_bool(&mut b, cfg.use_acc_loss);
    put_bool(&mut b, cfg.use_acc_inputs);
    b.put_u8(cfg.scheme.code());
    put_stats(&mut b, &c.standardizer.input)?;
    put_stats(&mut b, &c.standardizer.target)?;
    put_stats(&mut b, &c.standardizer.acc)?;
    let tensors = c.params.tensors();
    b.put_u32(len_u32(tensors.len(), "tensor count")?);
    for (name, dims, data) in tensors {
        b.put_u32(len_u32(name.len(), "name length")?);
        b.extend_from_slice(name.as_bytes());
        b.put_u32(len_u32(dims.len(), "rank")?);
        for d in dims {
            b.put_u32(len_u32(d, "dimension")?);
        }
        for v in data {
            b.put_f64(*v);
        }
    }
    Ok(b)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, "DIPM");
    r.magic(MODEL_MAGIC)?;
    r.version(FORMAT_VERSION)?;
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.count(1 << 20)?;
    }
    let bidirectional = r.bool()?;
    let input_keep_prob = r.f64()?;
    let use_acc_loss = r.bool()?;
    let use_acc_inputs = r.bool()?;
    let code = r.u8()?;
    let scheme = NormalizationScheme::from_code(code)
        .ok_or_else(|| r.malformed(format!("scheme code {code}")))?;
    let config = ModelConfig {
        input_dim: dims[0],
        dense_units: dims[1],
        hidden_units: dims[2],
        num_layers: dims[3],
        pose_dim: dims[4],
        acc_dim: dims[5],
        bidirectional,
        input_keep_prob,
        use_acc_loss,
        use_acc_inputs,
        scheme,
    };
    config.validate().map_err(|e| r.malformed(e.to_string()))?;
    let standardizer = Standardizer {
        input: read_stats(&mut r)?,
        target: read_stats(&mut r)?,
        acc: read_stats(&mut r)?,
    };
    let count = r.count(1 << 16)?;
    let mut tensors = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let len = r.count(256)?;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| r.malformed("tensor name is not UTF-8"))?
            .to_string();
        let rank = r.count(8)?;
        let shape = (0..rank)
            .map(|_| r.count(MAX_COUNT))
            .collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= MAX_COUNT)
            .ok_or_else(|| r.malformed(format!("tensor {name} is too large")))?;
        let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        tensors.push((name, shape, data));
    }
    r.finish()?;
    let params = Params::from_tensors(&config, tensors).map_err(|e| r.malformed(e.to_string()))?;
    let c = Checkpoint {
        config,
        standardizer,
        params,
    };
    c.validate().map_err(|e| r.malformed(e.to_string()))?;
    Ok(c)
}

fn write(path: &Path, bytes: Vec<u8>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn save_poses(path: impl AsRef<Path>, seq: &PoseSequence) -> Result<()> {
    write(path.as_ref(), encode_poses(seq)?)
}

pub fn load_poses(path: impl AsRef<Path>) -> Result<PoseSequence> {
    decode_poses(&fs::read(path)?)
}

pub fn save_imu(path: impl AsRef<Path>, seq: &SyntheticImuSequence) -> Result<()> {
    write(path.as_ref(), encode_imu(seq)?)
}

pub fn load_imu(path: impl AsRef<Path>) -> Result<SyntheticImuSequence> {
    decode_imu(&fs::read(path)?)
}

pub fn save_calibration(path: impl AsRef<Path>, cal: &CalibrationState) -> Result<()> {
    write(path.as_ref(), encode_calibration(cal)?)
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<CalibrationState> {
    decode_calibration(&fs::read(path)?)
}

pub fn save_checkpoint(path: impl AsRef<Path>, c: &Checkpoint) -> Result<()> {
    write(path.as_ref(), encode_checkpoint(c)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}
