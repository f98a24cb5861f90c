//! Streaming wire protocol.
//!
//! ```text
//! client → server  handshake: "DIPW", u16 version, u8 sensor_count, u8 flags
//!                  (bit 0: send σ)
//! server → client  u8 accept (1 or 0), u8 future frames F
//! client → server  frames: u64 index, per sensor 9×f32 orientation,
//!                  3×f32 acceleration
//! server → client  poses: u64 index, 24×9 f32 rotations, [216 f32 σ]
//! ```
//!
//! Little-endian throughout. The server answers frame `t` once frame `t + F`
//! has arrived.

use super::binary::{Reader, WriteLe};
use crate::error::{Error, Result};
use crate::kinematics::{Pose, JOINT_COUNT};
use crate::rotation::Rotation;
use crate::sensor::SensorFrame;

pub const WIRE_MAGIC: &[u8; 4] = b"DIPW";
pub const WIRE_VERSION: u16 = 1;
pub const HANDSHAKE_LEN: usize = 8;
pub const FLAG_SIGMA: u8 = 1;
const POSE_VALUES: usize = JOINT_COUNT * 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Handshake {
    pub version: u16,
    pub sensor_count: u8,
    pub flags: u8,
}

impl Handshake {
    pub fn new(sensor_count: u8, want_sigma: bool) -> Self {
        Self {
            version: WIRE_VERSION,
            sensor_count,
            flags: if want_sigma { FLAG_SIGMA } else { 0 },
        }
    }

    pub fn wants_sigma(&self) -> bool {
        self.flags & FLAG_SIGMA != 0
    }

    pub fn encode(&self) -> [u8; HANDSHAKE_LEN] {
        let mut b = Vec::with_capacity(HANDSHAKE_LEN);
        b.extend_from_slice(WIRE_MAGIC);
        b.put_u16(self.version);
        b.put_u8(self.sensor_count);
        b.put_u8(self.flags);
        b.try_into().expect("fixed size")
    }

    /// Checks magic only; the caller decides whether the version is served.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "wire handshake");
        r.magic(WIRE_MAGIC)?;
        Ok(Self {
            version: r.u16()?,
            sensor_count: r.u8()?,
            flags: r.u8()?,
        })
    }
}

pub fn frame_len(sensor_count: usize) -> usize {
    8 + sensor_count * 48
}

pub fn pose_len(with_sigma: bool) -> usize {
    8 + POSE_VALUES * 4 * if with_sigma { 2 } else { 1 }
}

pub fn encode_frame(index: u64, frame: &SensorFrame) -> Vec<u8> {
    let mut b = Vec::with_capacity(frame_len(frame.sensor_count()));
    b.put_u64(index);
    for (o, a) in frame.orientations.iter().zip(&frame.accelerations) {
        b.put_rotation_f32(o);
        b.put_vec3_f32(a);
    }
    b
}

pub fn decode_frame(bytes: &[u8], sensor_count: usize) -> Result<(u64, SensorFrame)> {
    if bytes.len() != frame_len(sensor_count) {
        return Err(Error::Malformed {
            format: "wire frame",
            reason: format!("{} bytes for {sensor_count} sensors", bytes.len()),
        });
    }
    let mut r = Reader::new(bytes, "wire frame");
    let index = r.u64()?;
    let mut orientations = Vec::with_capacity(sensor_count);
    let mut accelerations = Vec::with_capacity(sensor_count);
    for _ in 0..sensor_count {
        orientations.push(r.rotation_f32()?);
        accelerations.push(r.vec3_f32()?);
    }
    Ok((
        index,
        SensorFrame {
            orientations,
            accelerations,
        },
    ))
}

/// A pose as carried on the wire, in f32.
#[derive(Debug, Clone, PartialEq)]
pub struct WirePose {
    pub index: u64,
    pub rotations: Vec<f32>,
    pub sigma: Option<Vec<f32>>,
}

impl WirePose {
    pub fn new(index: u64, pose: &Pose, sigma: Option<&[f64]>) -> Self {
        Self {
            index,
            rotations: pose
                .joint_rotations
                .iter()
                .flat_map(|r| r.to_row_major())
                .map(|v| v as f32)
                .collect(),
            sigma: sigma.map(|s| s.iter().map(|&v| v as f32).collect()),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(pose_len(self.sigma.is_some()));
        b.put_u64(self.index);
        for v in self.rotations.iter().chain(self.sigma.iter().flatten()) {
            b.put_f32(*v);
        }
        b
    }

    pub fn decode(bytes: &[u8], with_sigma: bool) -> Result<Self> {
        if bytes.len() != pose_len(with_sigma) {
            return Err(Error::Malformed {
                format: "wire pose",
                reason: format!("{} bytes", bytes.len()),
            });
        }
        let mut r = Reader::new(bytes, "wire pose");
        let index = r.u64()?;
        let rotations = (0..POSE_VALUES)
            .map(|_| r.f32())
            .collect::<Result<Vec<_>>>()?;
        let sigma = if with_sigma {
            Some(
                (0..POSE_VALUES)
                    .map(|_| r.f32())
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(Self {
            index,
            rotations,
            sigma,
        })
    }

    pub fn to_pose(&self) -> Pose {
        Pose {
            joint_rotations: self
                .rotations
                .chunks_exact(9)
                .map(|c| {
                    let m: Vec<f64> = c.iter().map(|&v| v as f64).collect();
                    Rotation::from_matrix_unchecked(nalgebra::Matrix3::from_row_slice(&m))
                })
                .collect(),
        }
    }
}
