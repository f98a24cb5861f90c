//! Full-body pose estimation from six body-worn inertial sensors.
//!
//! The pipeline: synthesize IMU readings from motion data, calibrate and
//! normalize readings, regress per-joint rotations with a bidirectional
//! LSTM, and evaluate or stream the results.

pub mod calibration;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod io;
pub mod kinematics;
pub mod network;
pub mod normalization;
pub mod rotation;
pub mod sensor;
pub mod synthesis;
pub mod training;

pub use error::{Error, Result};
pub use kinematics::{KinematicTree, Pose, VirtualSensor, JOINT_COUNT, SENSOR_COUNT};
pub use network::{Checkpoint, Frames, GaussianSequence, ModelConfig, Params};
pub use normalization::{NormalizationScheme, Standardizer};
pub use rotation::{Rotation, Vec3};
pub use sensor::{CalibratedFrame, RawSensorFrame, SensorFrame};
