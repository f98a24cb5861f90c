use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{PoseSequence, SyntheticImuSequence};
use crate::error::{Error, Result};
use crate::kinematics::Pose;
use crate::normalization::{acceleration_block, normalize_sequence, NormalizationScheme};

/// One training sequence: normalized inputs and flattened rotation-matrix
/// pose targets, frame-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub name: String,
    /// Root-normalized (not yet standardized) input vectors.
    pub inputs: Vec<Vec<f64>>,
    pub poses: Vec<Pose>,
}

impl SequenceSample {
    pub fn new(name: impl Into<String>, inputs: Vec<Vec<f64>>, poses: Vec<Pose>) -> Result<Self> {
        if inputs.len() != poses.len() {
            return Err(Error::invalid(format!(
                "{} input frames but {} poses",
                inputs.len(),
                poses.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::invalid("empty sequence"));
        }
        Ok(Self {
            name: name.into(),
            inputs,
            poses,
        })
    }

    /// Pairs synthesized readings with the pose frames they were generated
    /// from (as returned by [`super::synthesize`]).
    pub fn from_synthetic(
        name: impl Into<String>,
        imu: &SyntheticImuSequence,
        poses: &PoseSequence,
        scheme: NormalizationScheme,
    ) -> Result<Self> {
        let inputs = normalize_sequence(&imu.frames, scheme)?;
        Self::new(
            name,
            inputs,
            poses.frames.iter().map(|f| f.pose.clone()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Flattened 216-value pose targets, one per frame.
    pub fn targets(&self) -> Vec<Vec<f64>> {
        self.poses.iter().map(Pose::to_flat).collect()
    }

    /// The non-root acceleration block of every input frame.
    pub fn acc_targets(&self) -> Vec<Vec<f64>> {
        self.inputs
            .iter()
            .map(|x| acceleration_block(x).to_vec())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Sequences partitioned by whole sequence into train/validation/test.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<SequenceSample>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    /// Explicit split indices. Splits may overlap (e.g. validating on the
    /// training set when overfitting on purpose).
    pub fn with_splits(
        samples: Vec<SequenceSample>,
        train: Vec<usize>,
        validation: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let n = samples.len();
        if train
            .iter()
            .chain(&validation)
            .chain(&test)
            .any(|&i| i >= n)
        {
            return Err(Error::invalid("split index out of range"));
        }
        Ok(Self {
            samples,
            train,
            validation,
            test,
        })
    }

    pub fn indices(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn split(&self, split: Split) -> Vec<&SequenceSample> {
        self.indices(split)
            .iter()
            .map(|&i| &self.samples[i])
            .collect()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.samples
            .first()
            .and_then(|s| s.inputs.first())
            .map(Vec::len)
    }
}

/// Shuffles sequences with `seed` and cuts them into train/validation/test
/// according to `ratios`. Validation and test sizes are rounded; train takes
/// the rest.
pub fn build_dataset(samples: Vec<SequenceSample>, ratios: [f64; 3], seed: u64) -> Result<Dataset> {
    if ratios.iter().any(|r| r.is_nan() || *r < 0.0)
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::invalid(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let n = samples.len();
    let n_val = (n as f64 * ratios[1]).round() as usize;
    let n_test = (n as f64 * ratios[2]).round() as usize;
    let n_train = n.saturating_sub(n_val + n_test);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::invalid(format!(
            "{n} sequences split {ratios:?} leaves an empty split ({n_train}/{n_val}/{n_test})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut validation = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(Dataset {
        samples,
        train,
        validation,
        test,
    })
}
