//! Mapping raw sensor readings into the body frame.
//!
//! Frames: inertial (I, the sensors' global reference), body (T, the
//! skeleton's canonical frame), sensor (S) and bone (B). A reading supplies
//! `R_IS` (sensor to inertial) and the sensor-frame specific force, which at
//! rest equals the gravity reaction.
//!
//! Calibration has three steps: the head sensor, aligned with the body frame,
//! gives `R_TI = R_head⁻¹`; a straight-pose frame with known bone orientations
//! gives per-sensor offsets `R_BS`; a still-stand gives the gravity vector.

use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, KinematicTree, Pose, VirtualSensor, HEAD_SENSOR};
use crate::rotation::{Rotation, Vec3};
use crate::sensor::{CalibratedFrame, RawSensorFrame};

/// Minimum number of still frames for gravity estimation.
pub const MIN_STATIC_FRAMES: usize = 30;
/// Accepted band for the estimated gravity magnitude (m/s²).
pub const GRAVITY_BAND: (f64, f64) = (9.5, 10.1);
/// Largest deviation of any still-stand sample from the mean (m/s²).
pub const MAX_STATIC_DEVIATION: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationState {
    /// `R_TI`: inertial frame to body frame.
    pub inertial_to_body: Rotation,
    /// `R_BS` per sensor: sensor frame to bone frame.
    pub bone_offsets: Vec<Rotation>,
    /// Gravity reaction in the inertial frame (points up, ≈9.81 m/s²).
    pub gravity: Vec3,
}

impl CalibrationState {
    /// Calibration that leaves orientations untouched.
    pub fn identity(sensor_count: usize, gravity: Vec3) -> Self {
        Self {
            inertial_to_body: Rotation::identity(),
            bone_offsets: vec![Rotation::identity(); sensor_count],
            gravity,
        }
    }

    pub fn sensor_count(&self) -> usize {
        self.bone_offsets.len()
    }
}

/// Which side the bone offset is composed on when mapping sensor to bone
/// orientations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffsetComposition {
    /// `R_TB = R_TS · R_BS⁻¹`. Reproduces the straight-pose orientations on
    /// the calibration frame.
    #[default]
    RightInverse,
    /// `R_TB = R_BS · R_TS`, kept for comparison.
    LeftDirect,
}

pub fn compute_inertial_to_body(head_reading: &Rotation) -> Rotation {
    head_reading.inverse()
}

/// `R_BS = R_TB0⁻¹ · R_TS0` per sensor, where `R_TS0` is the calibration
/// frame already expressed in the body frame.
pub fn compute_bone_offsets(
    straight_pose_bones: &[Rotation],
    first_frame_body: &[Rotation],
) -> Result<Vec<Rotation>> {
    if straight_pose_bones.len() != first_frame_body.len() {
        return Err(Error::invalid(format!(
            "{} straight-pose bones but {} sensor readings",
            straight_pose_bones.len(),
            first_frame_body.len()
        )));
    }
    Ok(straight_pose_bones
        .iter()
        .zip(first_frame_body)
        .map(|(tb, ts)| tb.inverse() * *ts)
        .collect())
}

pub fn calibrate_frame(raw: &RawSensorFrame, cal: &CalibrationState) -> Result<CalibratedFrame> {
    calibrate_frame_with(raw, cal, OffsetComposition::default())
}

pub fn calibrate_frame_with(
    raw: &RawSensorFrame,
    cal: &CalibrationState,
    composition: OffsetComposition,
) -> Result<CalibratedFrame> {
    if raw.sensor_count() != cal.sensor_count() {
        return Err(Error::IncompleteFrame(format!(
            "frame has {} sensors, calibration has {}",
            raw.sensor_count(),
            cal.sensor_count()
        )));
    }
    let r_ti = cal.inertial_to_body;
    let mut orientations = Vec::with_capacity(raw.sensor_count());
    let mut accelerations = Vec::with_capacity(raw.sensor_count());
    for ((r_is, a_s), r_bs) in raw
        .orientations
        .iter()
        .zip(&raw.accelerations)
        .zip(&cal.bone_offsets)
    {
        let r_ts = r_ti * *r_is;
        orientations.push(match composition {
            OffsetComposition::RightInverse => r_ts * r_bs.inverse(),
            OffsetComposition::LeftDirect => *r_bs * r_ts,
        });
        let world = r_is.rotate(a_s) - cal.gravity;
        accelerations.push(r_ti.rotate(&world));
    }
    Ok(CalibratedFrame {
        orientations,
        accelerations,
    })
}

/// Inverse of [`calibrate_frame`]: the raw readings a sensor rig with
/// calibration `cal` would report for the given body-frame frame.
pub fn uncalibrate_frame(
    frame: &CalibratedFrame,
    cal: &CalibrationState,
) -> Result<RawSensorFrame> {
    if frame.sensor_count() != cal.sensor_count() {
        return Err(Error::IncompleteFrame(format!(
            "frame has {} sensors, calibration has {}",
            frame.sensor_count(),
            cal.sensor_count()
        )));
    }
    let r_it = cal.inertial_to_body.inverse();
    let mut orientations = Vec::with_capacity(frame.sensor_count());
    let mut accelerations = Vec::with_capacity(frame.sensor_count());
    for ((r_tb, a_t), r_bs) in frame
        .orientations
        .iter()
        .zip(&frame.accelerations)
        .zip(&cal.bone_offsets)
    {
        let r_is = r_it * *r_tb * *r_bs;
        orientations.push(r_is);
        accelerations.push(r_is.inverse().rotate(&(r_it.rotate(a_t) + cal.gravity)));
    }
    Ok(RawSensorFrame {
        orientations,
        accelerations,
    })
}

/// Mean inertial-frame specific force over a still-stand.
pub fn estimate_gravity(static_frames: &[RawSensorFrame]) -> Result<Vec3> {
    if static_frames.len() < MIN_STATIC_FRAMES {
        return Err(Error::invalid(format!(
            "need at least {MIN_STATIC_FRAMES} still frames, got {}",
            static_frames.len()
        )));
    }
    let samples: Vec<Vec3> = static_frames
        .iter()
        .flat_map(|f| {
            f.orientations
                .iter()
                .zip(&f.accelerations)
                .map(|(r, a)| r.rotate(a))
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::invalid("still frames carry no sensors"));
    }
    let mean = samples.iter().sum::<Vec3>() / samples.len() as f64;
    let magnitude = mean.norm();
    if !(GRAVITY_BAND.0..=GRAVITY_BAND.1).contains(&magnitude) {
        return Err(Error::CalibrationFailed(format!(
            "gravity magnitude {magnitude:.3} m/s² outside [{}, {}]; the subject moved",
            GRAVITY_BAND.0, GRAVITY_BAND.1
        )));
    }
    let deviation = samples
        .iter()
        .map(|s| (s - mean).norm())
        .fold(0.0, f64::max);
    if deviation > MAX_STATIC_DEVIATION {
        return Err(Error::CalibrationFailed(format!(
            "still-stand sample deviates {deviation:.3} m/s² from the mean; the subject moved"
        )));
    }
    Ok(mean)
}

/// Bone orientations of the sensor-carrying bones in the straight (rest) pose.
pub fn straight_pose_bones(
    tree: &KinematicTree,
    sensors: &[VirtualSensor],
) -> Result<Vec<Rotation>> {
    let globals = forward_kinematics(
        tree,
        &Pose::identity(tree.joint_count()),
        &Rotation::identity(),
        &Vec3::zeros(),
    )?;
    sensors
        .iter()
        .map(|s| {
            globals.get(s.bone).map(|t| t.rotation).ok_or_else(|| {
                Error::invalid(format!("sensor {} has invalid bone {}", s.name, s.bone))
            })
        })
        .collect()
}

/// Full calibration from a recording.
///
/// `head_alignment` is the head sensor reading while it is aligned with the
/// body frame; `straight_pose` is a raw frame captured while the subject holds
/// the pose described by `straight_pose_bones`; `still_frames` feed gravity
/// estimation.
pub fn calibrate_session(
    head_alignment: &Rotation,
    straight_pose: &RawSensorFrame,
    straight_pose_bones: &[Rotation],
    still_frames: &[RawSensorFrame],
) -> Result<CalibrationState> {
    let inertial_to_body = compute_inertial_to_body(head_alignment);
    let body: Vec<Rotation> = straight_pose
        .orientations
        .iter()
        .map(|r| inertial_to_body * *r)
        .collect();
    let bone_offsets = compute_bone_offsets(straight_pose_bones, &body)?;
    let gravity = estimate_gravity(still_frames)?;
    Ok(CalibrationState {
        inertial_to_body,
        bone_offsets,
        gravity,
    })
}

/// Calibration from a recording whose first frame is the straight pose with
/// the head sensor aligned, and whose first `still_frames` frames are still.
pub fn calibrate_recording(
    frames: &[RawSensorFrame],
    straight_pose_bones: &[Rotation],
    still_frames: usize,
) -> Result<CalibrationState> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("empty recording"))?;
    let head = first
        .orientations
        .get(HEAD_SENSOR)
        .ok_or_else(|| Error::IncompleteFrame("recording has no head sensor".into()))?;
    let still = &frames[..still_frames.min(frames.len())];
    calibrate_session(head, first, straight_pose_bones, still)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::SENSOR_COUNT;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const G: Vec3 = Vec3::new(0.0, 9.81, 0.0);

    fn still_frame(orientations: Vec<Rotation>, gravity: Vec3) -> RawSensorFrame {
        let accelerations = orientations
            .iter()
            .map(|r| r.inverse().rotate(&gravity))
            .collect();
        RawSensorFrame {
            orientations,
            accelerations,
        }
    }

    #[test]
    fn inertial_to_body_inverts_head() {
        assert_eq!(
            compute_inertial_to_body(&Rotation::identity()),
            Rotation::identity()
        );
        let r = compute_inertial_to_body(&Rotation::about_y(40f64.to_radians()));
        assert!(r.max_abs_diff(&Rotation::about_y(-40f64.to_radians())) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let r = Rotation::random(&mut rng);
            let product = compute_inertial_to_body(&r) * r;
            assert!(product.max_abs_diff(&Rotation::identity()) < 1e-12);
        }
    }

    #[test]
    fn bone_offsets_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tb: Vec<Rotation> = (0..6).map(|_| Rotation::random(&mut rng)).collect();
        for o in compute_bone_offsets(&tb, &tb).unwrap() {
            assert!(o.max_abs_diff(&Rotation::identity()) < 1e-12);
        }
        let roll = Rotation::about_z(15f64.to_radians());
        let o = compute_bone_offsets(&[Rotation::identity()], &[roll]).unwrap();
        assert_eq!(o[0], roll);
        assert!(compute_bone_offsets(&tb, &tb[..3]).is_err());
    }

    #[test]
    fn bone_offsets_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tb: Vec<Rotation> = (0..6).map(|_| Rotation::random(&mut rng)).collect();
        let truth: Vec<Rotation> = (0..6).map(|_| Rotation::random(&mut rng)).collect();
        let ts: Vec<Rotation> = tb.iter().zip(&truth).map(|(b, o)| *b * *o).collect();
        for (got, want) in compute_bone_offsets(&tb, &ts).unwrap().iter().zip(&truth) {
            assert!(got.max_abs_diff(want) < 1e-12);
        }
    }

    #[test]
    fn calibration_frame_reproduces_straight_pose() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let head = Rotation::random(&mut rng);
        let raw = still_frame((0..6).map(|_| Rotation::random(&mut rng)).collect(), G);
        let bones: Vec<Rotation> = (0..6).map(|_| Rotation::random(&mut rng)).collect();
        let still = vec![raw.clone(); 40];
        let cal = calibrate_session(&head, &raw, &bones, &still).unwrap();
        let out = calibrate_frame(&raw, &cal).unwrap();
        for (got, want) in out.orientations.iter().zip(&bones) {
            assert!(got.max_abs_diff(want) < 1e-12);
        }
        for a in &out.accelerations {
            assert!(a.norm() < 1e-9);
        }
        // The literal left composition does not reproduce the straight pose.
        let left = calibrate_frame_with(&raw, &cal, OffsetComposition::LeftDirect).unwrap();
        assert!(left.orientations[0].max_abs_diff(&bones[0]) > 1e-3);
    }

    #[test]
    fn uncalibrate_inverts_calibrate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cal = CalibrationState {
            inertial_to_body: Rotation::random(&mut rng),
            bone_offsets: (0..6).map(|_| Rotation::random(&mut rng)).collect(),
            gravity: Vec3::new(0.1, 9.8, -0.2),
        };
        let body = RawSensorFrame {
            orientations: (0..6).map(|_| Rotation::random(&mut rng)).collect(),
            accelerations: (0..6)
                .map(|_| Vec3::from_fn(|_, _| rng.random_range(-10.0..10.0)))
                .collect(),
        };
        let back = calibrate_frame(&uncalibrate_frame(&body, &cal).unwrap(), &cal).unwrap();
        for (a, b) in back.orientations.iter().zip(&body.orientations) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
        for (a, b) in back.accelerations.iter().zip(&body.accelerations) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(uncalibrate_frame(&RawSensorFrame::rest(5), &cal).is_err());
    }

    #[test]
    fn missing_sensor_is_incomplete() {
        let cal = CalibrationState::identity(SENSOR_COUNT, G);
        let raw = RawSensorFrame::rest(5);
        assert!(matches!(
            calibrate_frame(&raw, &cal),
            Err(Error::IncompleteFrame(_))
        ));
    }

    #[test]
    fn gravity_from_exact_still_stand() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let frames: Vec<RawSensorFrame> = (0..30)
            .map(|_| still_frame((0..6).map(|_| Rotation::random(&mut rng)).collect(), G))
            .collect();
        let g = estimate_gravity(&frames).unwrap();
        assert!((g - G).norm() < 1e-12);
        assert!(estimate_gravity(&frames[..29]).is_err());
    }

    #[test]
    fn gravity_under_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let frames: Vec<RawSensorFrame> = (0..300)
            .map(|_| {
                let mut f = still_frame((0..6).map(|_| Rotation::random(&mut rng)).collect(), G);
                for a in &mut f.accelerations {
                    *a += Vec3::from_fn(|_, _| noise.sample(&mut rng));
                }
                f
            })
            .collect();
        let g = estimate_gravity(&frames).unwrap();
        assert!((g - G).norm() < 0.02, "estimate {g:?}");
    }

    #[test]
    fn moving_subject_fails_calibration() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let frames: Vec<RawSensorFrame> = (0..120)
            .map(|t| {
                let phase = rng.random_range(0.0..0.1);
                let bump = Vec3::new(0.0, 3.0 * (t as f64 * 0.3 + phase).sin(), 0.0);
                still_frame(vec![Rotation::identity(); 6], G + bump)
            })
            .collect();
        assert!(matches!(
            estimate_gravity(&frames),
            Err(Error::CalibrationFailed(_))
        ));
        // A sustained push shifts the magnitude out of band.
        let pushed: Vec<RawSensorFrame> = (0..60)
            .map(|_| still_frame(vec![Rotation::identity(); 6], G + Vec3::new(0.0, 3.0, 0.0)))
            .collect();
        assert!(matches!(
            estimate_gravity(&pushed),
            Err(Error::CalibrationFailed(_))
        ));
    }
}
