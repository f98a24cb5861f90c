//! Procedural motion families standing in for a mocap archive.
//!
//! Each family is a smooth composition of sinusoids over a handful of joints,
//! with amplitude, tempo and phase drawn from a seeded generator. Angles stay
//! within comfortable anatomical ranges.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PoseFrame, PoseSequence};
use crate::error::{Error, Result};
use crate::kinematics::{joint, Pose, JOINT_COUNT};
use crate::rotation::{Rotation, Vec3};

/// Shortest generated sequence, in frames at 60 fps.
pub const MIN_MOTION_FRAMES: usize = 300;

const STANDING_HEIGHT: f64 = 0.93;
/// Shoulder abduction that brings the arms from T-pose down to the sides.
const ARMS_DOWN: f64 = 1.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionFamily {
    Static,
    ArmRaise,
    ArmSwing,
    LegRaise,
    Squat,
    Walk,
    RootTurn,
}

impl MotionFamily {
    pub const ALL: [MotionFamily; 7] = [
        MotionFamily::Static,
        MotionFamily::ArmRaise,
        MotionFamily::ArmSwing,
        MotionFamily::LegRaise,
        MotionFamily::Squat,
        MotionFamily::Walk,
        MotionFamily::RootTurn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MotionFamily::Static => "static",
            MotionFamily::ArmRaise => "arm_raise",
            MotionFamily::ArmSwing => "arm_swing",
            MotionFamily::LegRaise => "leg_raise",
            MotionFamily::Squat => "squat",
            MotionFamily::Walk => "walk",
            MotionFamily::RootTurn => "root_turn",
        }
    }
}

impl fmt::Display for MotionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotionFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown motion family {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSpec {
    pub family: MotionFamily,
    pub frames: usize,
    pub fps: u32,
}

/// Ordered list of sequences to generate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionCatalog {
    pub entries: Vec<MotionSpec>,
}

impl MotionCatalog {
    /// `repeats` sequences of every listed family, interleaved, each
    /// `frames` long at `fps`.
    pub fn from_names(names: &[&str], repeats: usize, frames: usize, fps: u32) -> Result<Self> {
        let families = names
            .iter()
            .map(|n| n.trim().parse())
            .collect::<Result<Vec<MotionFamily>>>()?;
        let entries = (0..repeats)
            .flat_map(|_| {
                families.iter().map(|&family| MotionSpec {
                    family,
                    frames,
                    fps,
                })
            })
            .collect();
        Ok(Self { entries })
    }
}

/// Randomized tempo and amplitude of one sequence.
struct Style {
    freq: f64,
    amp: f64,
    phase: f64,
    side_bias: f64,
}

impl Style {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Style {
            freq: rng.random_range(0.35..0.9),
            amp: rng.random_range(0.7..1.0),
            phase: rng.random_range(0.0..TAU),
            side_bias: rng.random_range(-0.15..0.15),
        }
    }

    /// Oscillation in [0, 1] at time `t` seconds.
    fn cycle(&self, t: f64, offset: f64) -> f64 {
        0.5 - 0.5 * (TAU * self.freq * t + self.phase + offset).cos()
    }

    fn wave(&self, t: f64, offset: f64) -> f64 {
        (TAU * self.freq * t + self.phase + offset).sin()
    }
}

/// Local rotations for the arms hanging at the sides.
fn arms_down(pose: &mut Pose, extra_left: f64, extra_right: f64) {
    pose.joint_rotations[joint::LEFT_SHOULDER] = Rotation::about_z(-(ARMS_DOWN - extra_left));
    pose.joint_rotations[joint::RIGHT_SHOULDER] = Rotation::about_z(ARMS_DOWN - extra_right);
}

/// Hip flexion (leg forward) and knee flexion (shin back), both in radians.
fn leg(pose: &mut Pose, hip: usize, knee: usize, hip_flex: f64, knee_flex: f64) {
    pose.joint_rotations[hip] = Rotation::about_x(-hip_flex);
    pose.joint_rotations[knee] = Rotation::about_x(knee_flex);
}

fn frame_at(family: MotionFamily, style: &Style, t: f64) -> PoseFrame {
    let mut pose = Pose::identity(JOINT_COUNT);
    let mut root_rotation = Rotation::identity();
    let mut root_position = Vec3::new(0.0, STANDING_HEIGHT, 0.0);
    let a = style.amp;
    match family {
        MotionFamily::Static => {
            arms_down(&mut pose, 0.1 + style.side_bias, 0.1 - style.side_bias);
            pose.joint_rotations[joint::LEFT_ELBOW] = Rotation::about_y(-0.3 * a);
            pose.joint_rotations[joint::RIGHT_ELBOW] = Rotation::about_y(0.3 * a);
        }
        MotionFamily::ArmRaise => {
            // Lift both arms sideways from the hips to above shoulder height.
            let lift = 1.6 * a * style.cycle(t, 0.0);
            let lift_r = 1.6 * a * style.cycle(t, 0.4 + style.side_bias);
            arms_down(&mut pose, lift, lift_r);
            let bend = 0.4 * style.cycle(t, FRAC_PI_2);
            pose.joint_rotations[joint::LEFT_ELBOW] = Rotation::about_y(-bend);
            pose.joint_rotations[joint::RIGHT_ELBOW] = Rotation::about_y(bend);
        }
        MotionFamily::ArmSwing => {
            arms_down(&mut pose, 0.15, 0.15);
            let swing = 0.8 * a * style.wave(t, 0.0);
            pose.joint_rotations[joint::LEFT_SHOULDER] =
                Rotation::about_x(-swing) * pose.joint_rotations[joint::LEFT_SHOULDER];
            pose.joint_rotations[joint::RIGHT_SHOULDER] =
                Rotation::about_x(swing) * pose.joint_rotations[joint::RIGHT_SHOULDER];
            let bend_l = 0.2 + 0.9 * a * style.cycle(t, 0.3);
            let bend_r = 0.2 + 0.9 * a * style.cycle(t, 0.3 + std::f64::consts::PI);
            pose.joint_rotations[joint::LEFT_ELBOW] = Rotation::about_y(-bend_l);
            pose.joint_rotations[joint::RIGHT_ELBOW] = Rotation::about_y(bend_r);
        }
        MotionFamily::LegRaise => {
            arms_down(&mut pose, 0.2, 0.2);
            // Alternate legs: left on the first half-cycle, right on the second.
            let w = style.wave(t, 0.0);
            let left = 1.1 * a * w.max(0.0);
            let right = 1.1 * a * (-w).max(0.0);
            leg(
                &mut pose,
                joint::LEFT_HIP,
                joint::LEFT_KNEE,
                left,
                0.9 * left,
            );
            leg(
                &mut pose,
                joint::RIGHT_HIP,
                joint::RIGHT_KNEE,
                right,
                0.9 * right,
            );
            root_position.y -= 0.01 * (left + right);
        }
        MotionFamily::Squat => {
            arms_down(&mut pose, 0.3, 0.3);
            let depth = 1.0 * a * style.cycle(t, 0.0);
            leg(
                &mut pose,
                joint::LEFT_HIP,
                joint::LEFT_KNEE,
                depth,
                2.0 * depth,
            );
            leg(
                &mut pose,
                joint::RIGHT_HIP,
                joint::RIGHT_KNEE,
                depth,
                2.0 * depth,
            );
            pose.joint_rotations[joint::LEFT_ANKLE] = Rotation::about_x(-depth);
            pose.joint_rotations[joint::RIGHT_ANKLE] = Rotation::about_x(-depth);
            pose.joint_rotations[joint::SPINE1] = Rotation::about_x(0.4 * depth);
            // Thigh and shin at the same angle from vertical lower the pelvis by
            // both segment drops.
            root_position.y -= (0.38 + 0.4) * (1.0 - depth.cos());
            let reach = 0.7 * depth;
            pose.joint_rotations[joint::LEFT_SHOULDER] =
                Rotation::about_x(-reach) * pose.joint_rotations[joint::LEFT_SHOULDER];
            pose.joint_rotations[joint::RIGHT_SHOULDER] =
                Rotation::about_x(-reach) * pose.joint_rotations[joint::RIGHT_SHOULDER];
        }
        MotionFamily::Walk => {
            // Walking in place at roughly double the style tempo.
            let step = Style {
                freq: style.freq * 1.6,
                ..*style
            };
            let w = step.wave(t, 0.0);
            let left = 0.7 * a * w.max(0.0);
            let right = 0.7 * a * (-w).max(0.0);
            leg(
                &mut pose,
                joint::LEFT_HIP,
                joint::LEFT_KNEE,
                left,
                1.4 * left,
            );
            leg(
                &mut pose,
                joint::RIGHT_HIP,
                joint::RIGHT_KNEE,
                right,
                1.4 * right,
            );
            arms_down(&mut pose, 0.1, 0.1);
            let swing = 0.5 * a * w;
            pose.joint_rotations[joint::LEFT_SHOULDER] =
                Rotation::about_x(swing) * pose.joint_rotations[joint::LEFT_SHOULDER];
            pose.joint_rotations[joint::RIGHT_SHOULDER] =
                Rotation::about_x(-swing) * pose.joint_rotations[joint::RIGHT_SHOULDER];
            pose.joint_rotations[joint::LEFT_ELBOW] = Rotation::about_y(-0.3 - 0.3 * w.max(0.0));
            pose.joint_rotations[joint::RIGHT_ELBOW] = Rotation::about_y(0.3 + 0.3 * (-w).max(0.0));
            root_position.y += 0.03 * a * (2.0 * (TAU * step.freq * t + step.phase)).cos();
        }
        MotionFamily::RootTurn => {
            arms_down(&mut pose, 0.2, 0.2);
            root_rotation = Rotation::about_y(1.5 * a * style.wave(t, 0.0) + style.side_bias);
            let bend = 0.3 + 0.4 * style.cycle(t, 1.0);
            pose.joint_rotations[joint::LEFT_ELBOW] = Rotation::about_y(-bend);
            pose.joint_rotations[joint::RIGHT_ELBOW] = Rotation::about_y(bend);
            pose.joint_rotations[joint::NECK] = Rotation::about_y(0.3 * style.wave(t, 0.5));
        }
    }
    PoseFrame {
        pose,
        root_rotation,
        root_position,
    }
}

/// Generates one pose sequence per catalog entry. Deterministic in `seed`.
pub fn generate_procedural_motions(
    catalog: &MotionCatalog,
    seed: u64,
) -> Result<Vec<PoseSequence>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    catalog
        .entries
        .iter()
        .map(|spec| {
            if spec.fps == 0 {
                return Err(Error::invalid("motion fps must be positive"));
            }
            let seconds = spec.frames as f64 / spec.fps as f64;
            if seconds * 60.0 < MIN_MOTION_FRAMES as f64 - 1e-9 {
                return Err(Error::invalid(format!(
                    "{} sequence of {} frames at {} fps is shorter than {MIN_MOTION_FRAMES} frames at 60 fps",
                    spec.family, spec.frames, spec.fps
                )));
            }
            let style = Style::draw(&mut rng);
            let dt = 1.0 / spec.fps as f64;
            let frames = (0..spec.frames)
                .map(|k| frame_at(spec.family, &style, k as f64 * dt))
                .collect();
            PoseSequence::new(spec.fps, frames)
        })
        .collect()
}
