//! Joint angle and position errors, error histograms, and the past/future
//! window sweep.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{predict_offline, stream_sequence, WindowConfig};
use crate::kinematics::{forward_kinematics, KinematicTree, Pose};
use crate::network::Checkpoint;
use crate::rotation::{Rotation, Vec3};
use crate::synthesis::SequenceSample;

pub const DEFAULT_BIN_WIDTH: f64 = 2.5;
pub const HISTOGRAM_RANGE: f64 = 90.0;

/// Geodesic angle between two rotations, in degrees.
pub fn joint_angle_error(pred: &Rotation, gt: &Rotation) -> f64 {
    pred.angle_to(gt).to_degrees()
}

/// Per-joint distance in centimeters between the two poses' joint
/// positions, both posed with an identity root transform.
pub fn positional_error(pred: &Pose, gt: &Pose, tree: &KinematicTree) -> Result<Vec<f64>> {
    let id = Rotation::identity();
    let zero = Vec3::zeros();
    let a = forward_kinematics(tree, pred, &id, &zero)?;
    let b = forward_kinematics(tree, gt, &id, &zero)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(p, q)| (p.position - q.position).norm() * 100.0)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Offline,
    Online(WindowConfig),
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalMode::Offline => write!(f, "offline"),
            EvalMode::Online(w) => write!(f, "online:{w}"),
        }
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    /// `offline` or `online:P,F`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "offline" => Ok(EvalMode::Offline),
            "online" => Ok(EvalMode::Online(WindowConfig::default())),
            _ => match s.strip_prefix("online:") {
                Some(w) => Ok(EvalMode::Online(w.parse()?)),
                None => Err(Error::invalid(format!(
                    "unknown mode {s:?} (expected offline or online:P,F)"
                ))),
            },
        }
    }
}

/// Angle error counts in fixed-width bins over `[0, range)` plus one
/// overflow bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub range: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(bin_width: f64, range: f64) -> Result<Self> {
        if !(bin_width > 0.0 && range > 0.0) {
            return Err(Error::invalid(
                "histogram bin width and range must be positive",
            ));
        }
        let bins = (range / bin_width).ceil() as usize;
        Ok(Self {
            bin_width,
            range,
            counts: vec![0; bins + 1],
        })
    }

    pub fn add(&mut self, value: f64) {
        let overflow = self.counts.len() - 1;
        let bin = if value >= self.range {
            overflow
        } else {
            ((value / self.bin_width) as usize).min(overflow - 1)
        };
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_start_deg,bin_end_deg,count\n");
        let last = self.counts.len() - 1;
        for (i, c) in self.counts.iter().enumerate() {
            let start = i as f64 * self.bin_width;
            if i == last {
                let _ = writeln!(s, "{},inf,{c}", self.range);
            } else {
                let _ = writeln!(
                    s,
                    "{start},{},{c}",
                    (start + self.bin_width).min(self.range)
                );
            }
        }
        s
    }

    /// Parses [`Histogram::to_csv`] output.
    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = csv_rows(text, "bin_start_deg,bin_end_deg,count", 3)?;
        if rows.len() < 2 {
            return Err(Error::invalid(
                "histogram needs at least one bin and the overflow bin",
            ));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {s:?}")))
        };
        let bin_width = num(&rows[0][1])? - num(&rows[0][0])?;
        let range = num(&rows[rows.len() - 1][0])?;
        let counts = rows
            .iter()
            .map(|r| {
                r[2].parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad count {:?}", r[2])))
            })
            .collect::<Result<Vec<_>>>()?;
        let h = Histogram {
            bin_width,
            range,
            counts,
        };
        if Histogram::new(bin_width, range)?.counts.len() != h.counts.len() {
            return Err(Error::invalid("histogram bins do not match its range"));
        }
        Ok(h)
    }
}

fn csv_rows(text: &str, header: &str, width: usize) -> Result<Vec<Vec<String>>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(Error::invalid(format!("expected CSV header {header:?}")));
    }
    lines
        .map(|l| {
            let f: Vec<String> = l.split(',').map(str::to_string).collect();
            if f.len() == width {
                Ok(f)
            } else {
                Err(Error::invalid(format!("bad CSV line {l:?}")))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameError {
    pub sequence: String,
    pub frame: usize,
    /// Mean over joints, degrees.
    pub angle_deg: f64,
    /// Mean over joints, centimeters.
    pub position_cm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    /// Mean and standard deviation over all frames and joints.
    pub mean_angle_deg: f64,
    pub std_angle_deg: f64,
    pub mean_position_cm: f64,
    pub std_position_cm: f64,
    /// Mean per-frame angle error over the worst 5% of frames.
    pub worst5_angle_deg: f64,
    pub frames: Vec<FrameError>,
    pub histogram: Histogram,
}

/// The one-row summary of an [`EvalReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub mode: EvalMode,
    pub frames: usize,
    pub mean_angle_deg: f64,
    pub std_angle_deg: f64,
    pub mean_position_cm: f64,
    pub std_position_cm: f64,
    pub worst5_angle_deg: f64,
}

const SUMMARY_HEADER: &str =
    "mode,frames,mean_angle_deg,std_angle_deg,mean_pos_cm,std_pos_cm,worst5_angle_deg";

impl EvalSummary {
    pub fn to_csv(&self) -> String {
        format!(
            "{SUMMARY_HEADER}\n\"{}\",{},{},{},{},{},{}\n",
            self.mode,
            self.frames,
            self.mean_angle_deg,
            self.std_angle_deg,
            self.mean_position_cm,
            self.std_position_cm,
            self.worst5_angle_deg
        )
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(SUMMARY_HEADER) {
            return Err(Error::invalid("not an evaluation summary"));
        }
        let line = lines
            .next()
            .ok_or_else(|| Error::invalid("evaluation summary has no row"))?;
        let bad = || Error::invalid(format!("bad summary row {line:?}"));
        if lines.next().is_some() {
            return Err(bad());
        }
        let (mode, rest) = line
            .strip_prefix('"')
            .and_then(|l| l.split_once("\","))
            .ok_or_else(bad)?;
        let f: Vec<&str> = rest.split(',').collect();
        if f.len() != 6 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        Ok(Self {
            mode: mode.parse()?,
            frames: f[0].parse().map_err(|_| bad())?,
            mean_angle_deg: num(f[1])?,
            std_angle_deg: num(f[2])?,
            mean_position_cm: num(f[3])?,
            std_position_cm: num(f[4])?,
            worst5_angle_deg: num(f[5])?,
        })
    }
}

impl EvalReport {
    pub fn summary(&self) -> EvalSummary {
        EvalSummary {
            mode: self.mode,
            frames: self.frames.len(),
            mean_angle_deg: self.mean_angle_deg,
            std_angle_deg: self.std_angle_deg,
            mean_position_cm: self.mean_position_cm,
            std_position_cm: self.std_position_cm,
            worst5_angle_deg: self.worst5_angle_deg,
        }
    }

    pub fn summary_csv(&self) -> String {
        self.summary().to_csv()
    }

    pub fn frames_csv(&self) -> String {
        let mut s = String::from("sequence,frame,angle_deg,position_cm\n");
        for f in &self.frames {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                f.sequence, f.frame, f.angle_deg, f.position_cm
            );
        }
        s
    }
}

/// Parses [`EvalReport::frames_csv`] output.
pub fn frames_from_csv(text: &str) -> Result<Vec<FrameError>> {
    csv_rows(text, "sequence,frame,angle_deg,position_cm", 4)?
        .into_iter()
        .map(|r| {
            let bad = || Error::invalid(format!("bad frame row {r:?}"));
            Ok(FrameError {
                frame: r[1].parse().map_err(|_| bad())?,
                angle_deg: r[2].parse().map_err(|_| bad())?,
                position_cm: r[3].parse().map_err(|_| bad())?,
                sequence: r[0].clone(),
            })
        })
        .collect()
}

/// Predicted poses for one sequence, keyed by frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePrediction {
    pub name: String,
    pub frames: Vec<(usize, Pose)>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Scores predictions against ground truth. Only frames present in a
/// prediction are scored.
pub fn score(
    predictions: &[SequencePrediction],
    truth: &[&[Pose]],
    tree: &KinematicTree,
    mode: EvalMode,
    bin_width: f64,
) -> Result<EvalReport> {
    if predictions.len() != truth.len() {
        return Err(Error::invalid(
            "prediction and ground truth sequence counts differ",
        ));
    }
    let mut histogram = Histogram::new(bin_width, HISTOGRAM_RANGE)?;
    let mut angles = Vec::new();
    let mut positions = Vec::new();
    let mut frames = Vec::new();
    for (pred, gt) in predictions.iter().zip(truth) {
        for (t, pose) in &pred.frames {
            let gt_pose = gt.get(*t).ok_or_else(|| {
                Error::invalid(format!("{}: no ground truth for frame {t}", pred.name))
            })?;
            if pose.joint_rotations.len() != gt_pose.joint_rotations.len() {
                return Err(Error::invalid("joint counts differ"));
            }
            let a: Vec<f64> = pose
                .joint_rotations
                .iter()
                .zip(&gt_pose.joint_rotations)
                .map(|(p, g)| joint_angle_error(p, g))
                .collect();
            let d = positional_error(pose, gt_pose, tree)?;
            a.iter().for_each(|&v| histogram.add(v));
            frames.push(FrameError {
                sequence: pred.name.clone(),
                frame: *t,
                angle_deg: a.iter().sum::<f64>() / a.len() as f64,
                position_cm: d.iter().sum::<f64>() / d.len() as f64,
            });
            angles.extend(a);
            positions.extend(d);
        }
    }
    if frames.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let (mean_angle_deg, std_angle_deg) = mean_std(&angles);
    let (mean_position_cm, std_position_cm) = mean_std(&positions);
    let mut per_frame: Vec<f64> = frames.iter().map(|f| f.angle_deg).collect();
    per_frame.sort_by(|a, b| b.total_cmp(a));
    let worst = ((per_frame.len() as f64) * 0.05).ceil().max(1.0) as usize;
    let worst5_angle_deg = per_frame[..worst].iter().sum::<f64>() / worst as f64;
    Ok(EvalReport {
        mode,
        mean_angle_deg,
        std_angle_deg,
        mean_position_cm,
        std_position_cm,
        worst5_angle_deg,
        frames,
        histogram,
    })
}

/// Runs the model over each sample in the given mode.
pub fn predict_samples(
    checkpoint: &Checkpoint,
    samples: &[&SequenceSample],
    mode: EvalMode,
) -> Result<Vec<SequencePrediction>> {
    samples
        .par_iter()
        .map(|s| {
            let frames = match mode {
                EvalMode::Offline => predict_offline(checkpoint, &s.inputs)?
                    .into_iter()
                    .enumerate()
                    .collect(),
                EvalMode::Online(w) => stream_sequence(checkpoint, w, &s.inputs)?
                    .into_iter()
                    .map(|e| (e.frame, e.pose))
                    .collect(),
            };
            Ok(SequencePrediction {
                name: s.name.clone(),
                frames,
            })
        })
        .collect()
}

pub fn evaluate(
    checkpoint: &Checkpoint,
    samples: &[&SequenceSample],
    mode: EvalMode,
    tree: &KinematicTree,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::invalid("evaluation split is empty"));
    }
    let predictions = predict_samples(checkpoint, samples, mode)?;
    let truth: Vec<&[Pose]> = samples.iter().map(|s| s.poses.as_slice()).collect();
    score(&predictions, &truth, tree, mode, DEFAULT_BIN_WIDTH)
}

/// Online mean angle error for each `(past, future)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub past: Vec<usize>,
    pub future: Vec<usize>,
    /// `mean_angle_deg[i][j]` for `past[i]`, `future[j]`.
    pub mean_angle_deg: Vec<Vec<f64>>,
}

impl SweepGrid {
    pub fn get(&self, past: usize, future: usize) -> Option<f64> {
        let i = self.past.iter().position(|&p| p == past)?;
        let j = self.future.iter().position(|&f| f == future)?;
        Some(self.mean_angle_deg[i][j])
    }

    /// One row per past count, one column per future count.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("past\\future");
        for f in &self.future {
            let _ = write!(s, ",{f}");
        }
        s.push('\n');
        for (p, row) in self.past.iter().zip(&self.mean_angle_deg) {
            let _ = write!(s, "{p}");
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses [`SweepGrid::to_csv`] output.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty sweep CSV"))?;
        let mut cols = header.split(',');
        if cols.next() != Some("past\\future") {
            return Err(Error::invalid("not a sweep grid"));
        }
        let bad = |s: &str| Error::invalid(format!("bad sweep value {s:?}"));
        let future = cols
            .map(|c| c.parse().map_err(|_| bad(c)))
            .collect::<Result<Vec<usize>>>()?;
        let mut past = Vec::new();
        let mut mean_angle_deg = Vec::new();
        for line in lines {
            let mut f = line.split(',');
            let p = f.next().unwrap_or("");
            past.push(p.parse().map_err(|_| bad(p))?);
            let row = f
                .map(|v| v.parse().map_err(|_| bad(v)))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != future.len() {
                return Err(Error::invalid(format!(
                    "sweep row {line:?} has the wrong width"
                )));
            }
            mean_angle_deg.push(row);
        }
        Ok(Self {
            past,
            future,
            mean_angle_deg,
        })
    }
}

pub fn window_sweep(
    checkpoint: &Checkpoint,
    samples: &[&SequenceSample],
    past: &[usize],
    future: &[usize],
    tree: &KinematicTree,
) -> Result<SweepGrid> {
    if past.is_empty() || future.is_empty() {
        return Err(Error::invalid("past and future lists must be nonempty"));
    }
    let mean_angle_deg = past
        .iter()
        .map(|&p| {
            future
                .iter()
                .map(|&f| {
                    Ok(evaluate(
                        checkpoint,
                        samples,
                        EvalMode::Online(WindowConfig::new(p, f)),
                        tree,
                    )?
                    .mean_angle_deg)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepGrid {
        past: past.to_vec(),
        future: future.to_vec(),
        mean_angle_deg,
    })
}
