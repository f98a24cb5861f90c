//! Per-timestep readings of a set of sensors.

use crate::error::{Error, Result};
use crate::kinematics::{ROOT_SENSOR, SENSOR_COUNT, SENSOR_NAMES};
use crate::rotation::{Rotation, Vec3};

/// Orientation and acceleration of every sensor at one instant, in canonical
/// sensor order.
///
/// The same shape carries raw readings (sensor-to-inertial orientation,
/// sensor-frame acceleration including gravity) and calibrated ones (virtual
/// bone orientation, gravity-free body-frame acceleration); see
/// [`RawSensorFrame`] and [`CalibratedFrame`].
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub orientations: Vec<Rotation>,
    pub accelerations: Vec<Vec3>,
}

pub type RawSensorFrame = SensorFrame;
pub type CalibratedFrame = SensorFrame;

impl SensorFrame {
    pub fn new(orientations: Vec<Rotation>, accelerations: Vec<Vec3>) -> Result<Self> {
        if orientations.len() != accelerations.len() {
            return Err(Error::invalid(format!(
                "{} orientations but {} accelerations",
                orientations.len(),
                accelerations.len()
            )));
        }
        Ok(Self {
            orientations,
            accelerations,
        })
    }

    /// A frame where every sensor reads identity orientation and zero acceleration.
    pub fn rest(sensor_count: usize) -> Self {
        Self {
            orientations: vec![Rotation::identity(); sensor_count],
            accelerations: vec![Vec3::zeros(); sensor_count],
        }
    }

    pub fn sensor_count(&self) -> usize {
        self.orientations.len()
    }

    /// Builds a canonical six-sensor frame from readings tagged by sensor name,
    /// in any order.
    pub fn from_named<'a>(
        readings: impl IntoIterator<Item = (&'a str, Rotation, Vec3)>,
    ) -> Result<Self> {
        let mut slots: [Option<(Rotation, Vec3)>; SENSOR_COUNT] = [None; SENSOR_COUNT];
        for (name, r, a) in readings {
            let idx = SENSOR_NAMES
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| Error::invalid(format!("unknown sensor {name:?}")))?;
            if slots[idx].replace((r, a)).is_some() {
                return Err(Error::invalid(format!("sensor {name:?} given twice")));
            }
        }
        if slots[ROOT_SENSOR].is_none() {
            return Err(Error::invalid("missing root sensor"));
        }
        let mut frame = SensorFrame::rest(SENSOR_COUNT);
        for (i, slot) in slots.into_iter().enumerate() {
            let (r, a) = slot.ok_or_else(|| {
                Error::IncompleteFrame(format!("missing sensor {}", SENSOR_NAMES[i]))
            })?;
            frame.orientations[i] = r;
            frame.accelerations[i] = a;
        }
        Ok(frame)
    }
}
