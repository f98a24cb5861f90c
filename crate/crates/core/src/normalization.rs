//! Root-relative input encoding and zero-mean/unit-variance standardization.
//!
//! The default [`NormalizationScheme::PerFrameRoot`] expresses the five
//! non-root sensors in the root sensor's frame at every timestep, giving a
//! 60-value input: 5 row-major 3×3 orientations followed by 5 accelerations,
//! in canonical order (left wrist, right wrist, left lower leg, right lower
//! leg, head). The two alternative schemes keep all six sensors (72 values,
//! root first).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kinematics::{ROOT_SENSOR, SENSOR_COUNT};
use crate::rotation::Rotation;
use crate::sensor::CalibratedFrame;

pub const STD_FLOOR: f64 = 1e-8;

/// Input width of the default root-normalized encoding.
pub const INPUT_DIM: usize = (9 + 3) * (SENSOR_COUNT - 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizationScheme {
    #[default]
    PerFrameRoot,
    /// Relative to the root orientation of the sequence's first frame.
    PerSequenceRoot,
    /// Relative to the root's heading (rotation about +y) only.
    HeadingOnly,
}

impl NormalizationScheme {
    pub const ALL: [NormalizationScheme; 3] = [
        NormalizationScheme::PerFrameRoot,
        NormalizationScheme::PerSequenceRoot,
        NormalizationScheme::HeadingOnly,
    ];

    /// Number of sensors encoded in the input vector.
    pub fn encoded_sensors(self) -> usize {
        match self {
            NormalizationScheme::PerFrameRoot => SENSOR_COUNT - 1,
            _ => SENSOR_COUNT,
        }
    }

    pub fn input_dim(self) -> usize {
        12 * self.encoded_sensors()
    }

    pub fn code(self) -> u8 {
        match self {
            NormalizationScheme::PerFrameRoot => 0,
            NormalizationScheme::PerSequenceRoot => 1,
            NormalizationScheme::HeadingOnly => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.code() == code)
    }
}

impl fmt::Display for NormalizationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizationScheme::PerFrameRoot => "per_frame_root",
            NormalizationScheme::PerSequenceRoot => "per_sequence_root",
            NormalizationScheme::HeadingOnly => "heading_only",
        })
    }
}

impl FromStr for NormalizationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|scheme| scheme.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown normalization scheme {s:?}")))
    }
}

/// Encodes one calibrated frame as a network input vector.
///
/// `initial_root` is the root orientation of the sequence's first frame and
/// is required by [`NormalizationScheme::PerSequenceRoot`] only.
pub fn normalize_frame(
    frame: &CalibratedFrame,
    scheme: NormalizationScheme,
    initial_root: Option<&Rotation>,
) -> Result<Vec<f64>> {
    if frame.sensor_count() != SENSOR_COUNT {
        return Err(Error::invalid(format!(
            "expected {SENSOR_COUNT} sensors, got {}",
            frame.sensor_count()
        )));
    }
    let root = &frame.orientations[ROOT_SENSOR];
    let reference = match scheme {
        NormalizationScheme::PerFrameRoot => *root,
        NormalizationScheme::PerSequenceRoot => *initial_root
            .ok_or_else(|| Error::invalid("per-sequence normalization needs the initial root"))?,
        NormalizationScheme::HeadingOnly => Rotation::about_y(root.yaw()),
    };
    let inv = reference.inverse();
    let root_acc = frame.accelerations[ROOT_SENSOR];
    let first = SENSOR_COUNT - scheme.encoded_sensors();

    let mut x = Vec::with_capacity(scheme.input_dim());
    for s in first..SENSOR_COUNT {
        x.extend((inv * frame.orientations[s]).to_row_major());
    }
    for s in first..SENSOR_COUNT {
        let a = inv.rotate(&(frame.accelerations[s] - root_acc));
        x.extend([a.x, a.y, a.z]);
    }
    Ok(x)
}

/// Normalizes a whole sequence, taking the initial root from its first frame.
pub fn normalize_sequence(
    frames: &[CalibratedFrame],
    scheme: NormalizationScheme,
) -> Result<Vec<Vec<f64>>> {
    let initial = frames
        .first()
        .and_then(|f| f.orientations.get(ROOT_SENSOR))
        .copied();
    frames
        .iter()
        .map(|f| normalize_frame(f, scheme, initial.as_ref()))
        .collect()
}

/// The non-root acceleration block of an encoded input: its last 15 values.
pub fn acceleration_block(x: &[f64]) -> &[f64] {
    &x[x.len() - 3 * (SENSOR_COUNT - 1)..]
}

/// Per-dimension mean and (floored) population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Stats {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        if rows.len() < 2 {
            return Err(Error::invalid("need at least two frames to fit statistics"));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows have inconsistent dimensions"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((acc, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    /// Identity transform of the given width.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "vector has {} entries, statistics have {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn destandardize(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        Ok(y.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect())
    }
}

/// Statistics for network inputs, pose targets and acceleration targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub input: Stats,
    pub target: Stats,
    pub acc: Stats,
}

impl Standardizer {
    /// `block,index,mean,std` rows for the input, target and acc blocks.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("block,index,mean,std\n");
        for (name, stats) in [
            ("input", &self.input),
            ("target", &self.target),
            ("acc", &self.acc),
        ] {
            for (i, (m, d)) in stats.mean.iter().zip(&stats.std).enumerate() {
                s.push_str(&format!("{name},{i},{m},{d}\n"));
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("block,index,mean,std") {
            return Err(Error::invalid("not a statistics file"));
        }
        let mut blocks = [Stats::identity(0), Stats::identity(0), Stats::identity(0)];
        for line in lines {
            let bad = || Error::invalid(format!("bad statistics line {line:?}"));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let block = match f[0] {
                "input" => &mut blocks[0],
                "target" => &mut blocks[1],
                "acc" => &mut blocks[2],
                _ => return Err(bad()),
            };
            let index: usize = f[1].parse().map_err(|_| bad())?;
            let mean: f64 = f[2].parse().map_err(|_| bad())?;
            let std: f64 = f[3].parse().map_err(|_| bad())?;
            if index != block.dim() || !mean.is_finite() || !(std >= STD_FLOOR && std.is_finite()) {
                return Err(bad());
            }
            block.mean.push(mean);
            block.std.push(std);
        }
        let [input, target, acc] = blocks;
        Ok(Self { input, target, acc })
    }
}

pub fn fit_standardizer(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    accelerations: &[Vec<f64>],
) -> Result<Standardizer> {
    Ok(Standardizer {
        input: Stats::fit(inputs.iter().map(Vec::as_slice))?,
        target: Stats::fit(targets.iter().map(Vec::as_slice))?,
        acc: Stats::fit(accelerations.iter().map(Vec::as_slice))?,
    })
}
