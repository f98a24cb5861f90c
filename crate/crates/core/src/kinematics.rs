//! Rigid 24-joint skeleton with forward kinematics and bone-attached virtual
//! sensors.
//!
//! The joint topology follows the SMPL body model; rest offsets describe a
//! fixed mean-shape body in meters (y-up, facing +z, subject's left is +x).

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rotation::{Rotation, Vec3};

pub const JOINT_COUNT: usize = 24;

/// Number of sensors used at inference time.
pub const SENSOR_COUNT: usize = 6;

/// Canonical sensor names, root first. Wire frames and files use this order.
pub const SENSOR_NAMES: [&str; SENSOR_COUNT] = [
    "root",
    "left_wrist",
    "right_wrist",
    "left_lower_leg",
    "right_lower_leg",
    "head",
];

/// Index of the root (pelvis) sensor within [`SENSOR_NAMES`].
pub const ROOT_SENSOR: usize = 0;
pub const LEFT_WRIST_SENSOR: usize = 1;
pub const RIGHT_WRIST_SENSOR: usize = 2;
pub const LEFT_LOWER_LEG_SENSOR: usize = 3;
pub const RIGHT_LOWER_LEG_SENSOR: usize = 4;
/// Index of the head sensor within [`SENSOR_NAMES`].
pub const HEAD_SENSOR: usize = 5;

pub const JOINT_NAMES: [&str; JOINT_COUNT] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

pub mod joint {
    pub const PELVIS: usize = 0;
    pub const LEFT_HIP: usize = 1;
    pub const RIGHT_HIP: usize = 2;
    pub const SPINE1: usize = 3;
    pub const LEFT_KNEE: usize = 4;
    pub const RIGHT_KNEE: usize = 5;
    pub const SPINE2: usize = 6;
    pub const LEFT_ANKLE: usize = 7;
    pub const RIGHT_ANKLE: usize = 8;
    pub const SPINE3: usize = 9;
    pub const NECK: usize = 12;
    pub const LEFT_COLLAR: usize = 13;
    pub const RIGHT_COLLAR: usize = 14;
    pub const HEAD: usize = 15;
    pub const LEFT_SHOULDER: usize = 16;
    pub const RIGHT_SHOULDER: usize = 17;
    pub const LEFT_ELBOW: usize = 18;
    pub const RIGHT_ELBOW: usize = 19;
    pub const LEFT_WRIST: usize = 20;
    pub const RIGHT_WRIST: usize = 21;
}

const DEFAULT_SKELETON: &str = include_str!("../data/skeleton.txt");
const DEFAULT_SENSORS: &str = include_str!("../data/sensors.txt");

/// Joint hierarchy with per-joint rest offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicTree {
    parent: Vec<Option<usize>>,
    rest_offset: Vec<Vec3>,
}

impl KinematicTree {
    /// `parent[0]` must be `None` and every other parent must precede its child.
    pub fn new(parent: Vec<Option<usize>>, rest_offset: Vec<Vec3>) -> Result<Self> {
        if parent.is_empty() || parent.len() != rest_offset.len() {
            return Err(Error::invalid(
                "parent and offset arrays must be non-empty and equal length",
            ));
        }
        if parent[0].is_some() {
            return Err(Error::invalid("joint 0 must be the root"));
        }
        for (j, p) in parent.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < j => {}
                Some(p) => {
                    return Err(Error::invalid(format!(
                        "joint {j} has parent {p}; parents must precede children"
                    )))
                }
                None => return Err(Error::invalid(format!("joint {j} is a second root"))),
            }
        }
        if rest_offset.iter().any(|o| o.iter().any(|x| !x.is_finite())) {
            return Err(Error::invalid("non-finite rest offset"));
        }
        Ok(Self {
            parent,
            rest_offset,
        })
    }

    /// The built-in mean-shape skeleton.
    pub fn default_skeleton() -> Self {
        Self::from_str(DEFAULT_SKELETON).expect("bundled skeleton is valid")
    }

    pub fn joint_count(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parent[joint]
    }

    pub fn rest_offset(&self, joint: usize) -> Vec3 {
        self.rest_offset[joint]
    }

    /// True when `joint` equals `ancestor` or lies below it.
    pub fn is_descendant(&self, mut joint: usize, ancestor: usize) -> bool {
        loop {
            if joint == ancestor {
                return true;
            }
            match self.parent[joint] {
                Some(p) => joint = p,
                None => return false,
            }
        }
    }

    /// Serializes to the skeleton text format (`index parent x y z` per line).
    pub fn to_text(&self) -> String {
        let mut out = String::from("# index parent offset_x offset_y offset_z (meters)\n");
        for j in 0..self.joint_count() {
            let p = self.parent[j].map_or(-1, |p| p as i64);
            let o = self.rest_offset[j];
            writeln!(out, "{j} {p} {} {} {}", o.x, o.y, o.z).unwrap();
        }
        out
    }
}

impl FromStr for KinematicTree {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut parent = Vec::new();
        let mut offsets = Vec::new();
        for (lineno, line) in data_lines(text) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::invalid(format!(
                    "skeleton line {lineno}: expected 5 fields"
                )));
            }
            let index: usize = parse_field(fields[0], lineno)?;
            if index != parent.len() {
                return Err(Error::invalid(format!(
                    "skeleton line {lineno}: joints must be listed in index order"
                )));
            }
            let p: i64 = parse_field(fields[1], lineno)?;
            parent.push(if p < 0 { None } else { Some(p as usize) });
            offsets.push(Vec3::new(
                parse_field(fields[2], lineno)?,
                parse_field(fields[3], lineno)?,
                parse_field(fields[4], lineno)?,
            ));
        }
        Self::new(parent, offsets)
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_field<T: FromStr>(s: &str, lineno: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::invalid(format!("line {lineno}: cannot parse {s:?}")))
}

/// Per-joint rotations, each relative to the parent joint's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub joint_rotations: Vec<Rotation>,
}

impl Pose {
    pub fn identity(joint_count: usize) -> Self {
        Self {
            joint_rotations: vec![Rotation::identity(); joint_count],
        }
    }

    /// Row-major rotation entries of every joint, concatenated.
    pub fn to_flat(&self) -> Vec<f64> {
        self.joint_rotations
            .iter()
            .flat_map(|r| r.to_row_major())
            .collect()
    }
}

/// Global rotation and position of a joint or sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: Rotation,
    pub position: Vec3,
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation::identity(),
            position: Vec3::zeros(),
        }
    }
}

/// Global transforms of every joint.
///
/// Joint 0 is placed at `root_position` with orientation
/// `root_rotation · pose[0]`; every other joint composes its parent's global
/// rotation with its own local rotation.
pub fn forward_kinematics(
    tree: &KinematicTree,
    pose: &Pose,
    root_rotation: &Rotation,
    root_position: &Vec3,
) -> Result<Vec<Transform>> {
    let n = tree.joint_count();
    if pose.joint_rotations.len() != n {
        return Err(Error::invalid(format!(
            "pose has {} joints, tree has {n}",
            pose.joint_rotations.len()
        )));
    }
    let mut out: Vec<Transform> = Vec::with_capacity(n);
    for j in 0..n {
        let local = &pose.joint_rotations[j];
        let t = match tree.parent[j] {
            None => Transform {
                rotation: root_rotation * local,
                position: root_position + root_rotation.rotate(&tree.rest_offset[j]),
            },
            Some(p) => {
                let parent = &out[p];
                Transform {
                    rotation: &parent.rotation * local,
                    position: parent.position + parent.rotation.rotate(&tree.rest_offset[j]),
                }
            }
        };
        out.push(t);
    }
    Ok(out)
}

/// A sensor rigidly attached to a bone.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualSensor {
    pub name: String,
    pub bone: usize,
    /// Sensor frame relative to the bone frame.
    pub offset_rotation: Rotation,
    /// Sensor position relative to the joint, in the bone frame (meters).
    pub offset_translation: Vec3,
}

pub fn sensor_world_transform(joint_global: &Transform, sensor: &VirtualSensor) -> Transform {
    Transform {
        rotation: joint_global.rotation * sensor.offset_rotation,
        position: joint_global.position + joint_global.rotation.rotate(&sensor.offset_translation),
    }
}

/// The six inference sensors in canonical order.
pub fn default_sensors() -> Vec<VirtualSensor> {
    parse_sensors(DEFAULT_SENSORS).expect("bundled sensor placement is valid")
}

/// Parses the sensor placement format: name, bone index, 9 floats of offset
/// rotation (row-major) and 3 floats of offset translation per line.
pub fn parse_sensors(text: &str) -> Result<Vec<VirtualSensor>> {
    let mut sensors = Vec::new();
    for (lineno, line) in data_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 14 {
            return Err(Error::invalid(format!(
                "sensor line {lineno}: expected 14 fields"
            )));
        }
        let bone: usize = parse_field(fields[1], lineno)?;
        let mut rot = [0.0; 9];
        for (k, r) in rot.iter_mut().enumerate() {
            *r = parse_field(fields[2 + k], lineno)?;
        }
        let offset_rotation = Rotation::from_row_major(&rot).map_err(|_| {
            Error::invalid(format!("sensor line {lineno}: offset is not a rotation"))
        })?;
        sensors.push(VirtualSensor {
            name: fields[0].to_string(),
            bone,
            offset_rotation,
            offset_translation: Vec3::new(
                parse_field(fields[11], lineno)?,
                parse_field(fields[12], lineno)?,
                parse_field(fields[13], lineno)?,
            ),
        });
    }
    Ok(sensors)
}

pub fn sensors_to_text(sensors: &[VirtualSensor]) -> String {
    let mut out = String::from("# name bone r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz\n");
    for s in sensors {
        write!(out, "{} {}", s.name, s.bone).unwrap();
        for r in s.offset_rotation.to_row_major() {
            write!(out, " {r}").unwrap();
        }
        let t = s.offset_translation;
        writeln!(out, " {} {} {}", t.x, t.y, t.z).unwrap();
    }
    out
}

/// Checks that every sensor references a joint of `tree`.
pub fn validate_sensors(tree: &KinematicTree, sensors: &[VirtualSensor]) -> Result<()> {
    for s in sensors {
        if s.bone >= tree.joint_count() {
            return Err(Error::invalid(format!(
                "sensor {} references bone {} but the tree has {} joints",
                s.name,
                s.bone,
                tree.joint_count()
            )));
        }
    }
    Ok(())
}
