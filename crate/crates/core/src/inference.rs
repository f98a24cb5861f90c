//! Offline and sliding-window online prediction.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::kinematics::{Pose, JOINT_COUNT};
use crate::network::{predict, Checkpoint, Frames};
use crate::normalization::{normalize_frame, NormalizationScheme, Standardizer};
use crate::rotation::{project_to_rotation, Rotation};
use crate::sensor::CalibratedFrame;

/// Past and future context of the online predictor, in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowConfig {
    pub past: usize,
    pub future: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            past: 20,
            future: 5,
        }
    }
}

impl WindowConfig {
    pub fn new(past: usize, future: usize) -> Self {
        Self { past, future }
    }

    pub fn capacity(&self) -> usize {
        self.past + 1 + self.future
    }
}

impl fmt::Display for WindowConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.past, self.future)
    }
}

impl FromStr for WindowConfig {
    type Err = Error;

    /// `"P,F"`.
    fn from_str(s: &str) -> Result<Self> {
        let (p, f) = s
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("window {s:?} is not of the form P,F")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad frame count {v:?} in window {s:?}")))
        };
        Ok(Self::new(parse(p)?, parse(f)?))
    }
}

/// Destandardizes a pose mean and projects each 3×3 block onto SO(3).
pub fn outputs_to_pose(mu: &[f64], standardizer: &Standardizer) -> Result<Pose> {
    if mu.len() != JOINT_COUNT * 9 {
        return Err(Error::invalid(format!(
            "pose output has {} values",
            mu.len()
        )));
    }
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite pose output"));
    }
    let raw = standardizer.target.destandardize(mu)?;
    let joint_rotations = raw
        .chunks_exact(9)
        .enumerate()
        .map(|(joint, b)| {
            project_to_rotation(&Matrix3::from_row_slice(b))
                .map_err(|_| Error::DegenerateOutput { joint })
        })
        .collect::<Result<Vec<Rotation>>>()?;
    Ok(Pose { joint_rotations })
}

/// Standardizes normalized input rows with the checkpoint's statistics.
pub fn standardize_inputs(checkpoint: &Checkpoint, inputs: &[Vec<f64>]) -> Result<Frames> {
    let rows = inputs
        .iter()
        .map(|x| checkpoint.standardizer.input.standardize(x))
        .collect::<Result<Vec<_>>>()?;
    Frames::from_rows(&rows)
}

/// One forward pass over the whole (normalized, not yet standardized)
/// sequence.
pub fn predict_offline(checkpoint: &Checkpoint, inputs: &[Vec<f64>]) -> Result<Vec<Pose>> {
    let x = standardize_inputs(checkpoint, inputs)?;
    let out = predict(&checkpoint.params, &checkpoint.config, &x)?;
    out.pose_mu
        .rows()
        .map(|mu| outputs_to_pose(mu, &checkpoint.standardizer))
        .collect()
}

/// A pose emitted by the online predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    /// Index of the input frame this pose belongs to.
    pub frame: usize,
    pub pose: Pose,
    /// Predicted standard deviation of each of the 216 rotation entries,
    /// in destandardized units.
    pub sigma: Vec<f64>,
}

/// Per-stream state of the sliding-window predictor.
#[derive(Debug, Clone)]
pub struct StreamState {
    window: WindowConfig,
    buffer: VecDeque<Vec<f64>>,
    received: usize,
    initial_root: Option<Rotation>,
    emissions: usize,
    latency_total_ms: f64,
    latency_max_ms: f64,
}

impl StreamState {
    pub fn new(window: WindowConfig) -> Self {
        Self {
            window,
            buffer: VecDeque::with_capacity(window.capacity()),
            received: 0,
            initial_root: None,
            emissions: 0,
            latency_total_ms: 0.0,
            latency_max_ms: 0.0,
        }
    }

    pub fn window(&self) -> WindowConfig {
        self.window
    }

    pub fn received(&self) -> usize {
        self.received
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn emissions(&self) -> usize {
        self.emissions
    }

    /// Mean compute time per emission, in milliseconds.
    pub fn mean_latency_ms(&self) -> f64 {
        if self.emissions == 0 {
            0.0
        } else {
            self.latency_total_ms / self.emissions as f64
        }
    }

    pub fn max_latency_ms(&self) -> f64 {
        self.latency_max_ms
    }

    /// Normalizes a calibrated frame with the checkpoint's scheme and feeds
    /// it to [`predict_online`].
    pub fn push_calibrated(
        &mut self,
        checkpoint: &Checkpoint,
        frame: &CalibratedFrame,
    ) -> Result<Option<Emission>> {
        let scheme = checkpoint.config.scheme;
        if scheme == NormalizationScheme::PerSequenceRoot && self.initial_root.is_none() {
            self.initial_root = frame.orientations.first().copied();
        }
        let x = normalize_frame(frame, scheme, self.initial_root.as_ref())?;
        predict_online(checkpoint, self, &x)
    }
}

/// Feeds one normalized input frame. Once `future` frames beyond frame `t`
/// have arrived, returns the pose for `t`, read from a fresh forward pass
/// over up to `past` earlier frames, `t` itself, and the `future` frames.
pub fn predict_online(
    checkpoint: &Checkpoint,
    state: &mut StreamState,
    input: &[f64],
) -> Result<Option<Emission>> {
    let started = Instant::now();
    let x = checkpoint.standardizer.input.standardize(input)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite input frame"));
    }
    if state.buffer.len() == state.window.capacity() {
        state.buffer.pop_front();
    }
    state.buffer.push_back(x);
    state.received += 1;
    let future = state.window.future;
    if state.received <= future {
        return Ok(None);
    }
    let frame = state.received - 1 - future;
    let rows: Vec<&[f64]> = state.buffer.iter().map(Vec::as_slice).collect();
    let window = Frames::from_rows(&rows)?;
    let at = window.len() - 1 - future;
    let out = predict(&checkpoint.params, &checkpoint.config, &window)?;
    let pose = outputs_to_pose(out.pose_mu.row(at), &checkpoint.standardizer)?;
    let sigma = out
        .pose_sigma
        .row(at)
        .iter()
        .zip(&checkpoint.standardizer.target.std)
        .map(|(s, d)| s * d)
        .collect();
    let ms = started.elapsed().as_secs_f64() * 1e3;
    state.emissions += 1;
    state.latency_total_ms += ms;
    state.latency_max_ms = state.latency_max_ms.max(ms);
    Ok(Some(Emission { frame, pose, sigma }))
}

/// Streams a whole normalized sequence through a fresh [`StreamState`].
pub fn stream_sequence(
    checkpoint: &Checkpoint,
    window: WindowConfig,
    inputs: &[Vec<f64>],
) -> Result<Vec<Emission>> {
    let mut state = StreamState::new(window);
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        if let Some(e) = predict_online(checkpoint, &mut state, x)? {
            out.push(e);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub frames: usize,
    pub seconds: f64,
    pub fps: f64,
    pub mean_latency_ms: f64,
    pub p50_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub max_latency_ms: f64,
}

/// Streams `frames` (repeatedly, from a fresh state each pass) through
/// normalization, the online predictor and pose conversion until at least
/// `duration` has elapsed.
pub fn measure_throughput(
    checkpoint: &Checkpoint,
    window: WindowConfig,
    frames: &[CalibratedFrame],
    duration: Duration,
) -> Result<ThroughputReport> {
    if frames.is_empty() {
        return Err(Error::invalid("no frames to stream"));
    }
    let started = Instant::now();
    let mut latencies = Vec::new();
    let mut count = 0;
    while started.elapsed() < duration || count == 0 {
        let mut state = StreamState::new(window);
        for f in frames {
            let t0 = Instant::now();
            state.push_calibrated(checkpoint, f)?;
            latencies.push(t0.elapsed().as_secs_f64() * 1e3);
            count += 1;
        }
    }
    let seconds = started.elapsed().as_secs_f64();
    latencies.sort_by(f64::total_cmp);
    let pct = |p: f64| latencies[((latencies.len() - 1) as f64 * p).round() as usize];
    Ok(ThroughputReport {
        frames: count,
        seconds,
        fps: count as f64 / seconds,
        mean_latency_ms: latencies.iter().sum::<f64>() / latencies.len() as f64,
        p50_latency_ms: pct(0.5),
        p95_latency_ms: pct(0.95),
        max_latency_ms: *latencies.last().expect("nonempty"),
    })
}
