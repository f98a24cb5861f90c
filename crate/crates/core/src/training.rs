//! Adam with exponential learning-rate decay, global-norm clipping, early
//! stopping on validation NLL, and fine-tuning of a trained checkpoint.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{
    backward, dropout_mask, forward, nll_loss, Checkpoint, Frames, Mode, ModelConfig, Params,
};
use crate::normalization::{acceleration_block, fit_standardizer, Standardizer};
use crate::synthesis::{Dataset, SequenceSample, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub decay_rate: f64,
    pub decay_steps: f64,
    pub clip_norm: f64,
    /// Windows per optimizer step.
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Training sequences are cut into windows of this many frames.
    pub window_frames: usize,
    pub window_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 0.001,
            decay_rate: 0.96,
            decay_steps: 2000.0,
            clip_norm: 1.0,
            batch_size: 16,
            max_epochs: 100,
            early_stop_patience: 10,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            window_frames: 300,
            window_stride: 150,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_lr", self.initial_lr),
            ("decay_steps", self.decay_steps),
            ("clip_norm", self.clip_norm),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(Error::invalid(format!(
                "decay_rate {} not in (0, 1]",
                self.decay_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} {b} not in [0, 1)")));
            }
        }
        if self.batch_size == 0
            || self.window_frames == 0
            || self.window_stride == 0
            || self.early_stop_patience == 0
        {
            return Err(Error::invalid(
                "batch_size, window_frames, window_stride and early_stop_patience must be positive",
            ));
        }
        Ok(())
    }
}

/// `initial_lr · decay_rate^(step / decay_steps)` with a continuous exponent.
pub fn lr_schedule(step: u64, cfg: &TrainConfig) -> f64 {
    cfg.initial_lr * cfg.decay_rate.powf(step as f64 / cfg.decay_steps)
}

/// Rescales all tensors so their joint L2 norm is at most `clip_norm`.
/// Returns the norm before clipping.
pub fn clip_by_global_norm(grads: &mut [&mut Vec<f64>], clip_norm: f64) -> Result<f64> {
    let mut sq = 0.0;
    for g in grads.iter() {
        for v in g.iter() {
            if !v.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch: 0,
                    reason: "non-finite gradient".into(),
                });
            }
            sq += v * v;
        }
    }
    let norm = sq.sqrt();
    if norm > clip_norm {
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v = *v * clip_norm / norm);
        }
    }
    Ok(norm)
}

/// Adam moments for a list of tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(
        sizes: impl IntoIterator<Item = usize>,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Self {
        let (m, v) = sizes
            .into_iter()
            .map(|n| (vec![0.0; n], vec![0.0; n]))
            .unzip();
        Self {
            beta1,
            beta2,
            epsilon,
            step: 0,
            m,
            v,
        }
    }

    pub fn for_params(params: &Params, cfg: &TrainConfig) -> Self {
        Self::new(
            params.tensors().iter().map(|t| t.2.len()),
            cfg.beta1,
            cfg.beta2,
            cfg.epsilon,
        )
    }

    /// One bias-corrected update of `tensors` in place.
    pub fn update(&mut self, tensors: Vec<&mut Vec<f64>>, grads: &[&[f64]], lr: f64) {
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        for (k, (w, g)) in tensors.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..w.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

pub fn adam_step(params: &mut Params, grads: &Params, state: &mut AdamState, lr: f64) {
    let g = grads.tensors();
    let slices: Vec<&[f64]> = g.iter().map(|t| t.2).collect();
    state.update(params.tensors_mut(), &slices, lr);
}

/// Frame ranges of length `window` every `stride` frames; a final window is
/// aligned to the end so every frame is covered. Sequences no longer than
/// `window` yield one range.
pub fn training_windows(len: usize, window: usize, stride: usize) -> Vec<Range<usize>> {
    if len <= window {
        return std::iter::once(0..len).collect();
    }
    let mut out: Vec<Range<usize>> = (0..)
        .map(|k| k * stride)
        .take_while(|s| s + window <= len)
        .map(|s| s..s + window)
        .collect();
    if out.last().is_some_and(|r| r.end < len) {
        out.push(len - window..len);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_nll: Option<f64>,
    pub seconds: f64,
    pub checkpoint_path: Option<PathBuf>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_nll,val_nll,lr,seconds\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.3}",
                e.epoch, e.train_nll, e.val_nll, e.lr, e.seconds
            );
        }
        s
    }

    /// Parses [`TrainReport::to_csv`] output back into epoch records.
    pub fn epochs_from_csv(text: &str) -> Result<Vec<EpochRecord>> {
        let mut lines = text.lines();
        if lines.next() != Some("epoch,train_nll,val_nll,lr,seconds") {
            return Err(Error::invalid("not a training report"));
        }
        lines
            .map(|line| {
                let bad = || Error::invalid(format!("bad report line {line:?}"));
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(bad());
                }
                let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
                Ok(EpochRecord {
                    epoch: f[0].parse().map_err(|_| bad())?,
                    train_nll: num(f[1])?,
                    val_nll: num(f[2])?,
                    lr: num(f[3])?,
                    seconds: num(f[4])?,
                })
            })
            .collect()
    }
}

/// A sequence standardized for the network.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub inputs: Frames,
    pub pose: Frames,
    pub acc: Frames,
}

impl Prepared {
    pub fn new(sample: &SequenceSample, standardizer: &Standardizer) -> Result<Self> {
        let standardize =
            |rows: Vec<Vec<f64>>, stats: &crate::normalization::Stats| -> Result<Frames> {
                let rows = rows
                    .iter()
                    .map(|r| stats.standardize(r))
                    .collect::<Result<Vec<_>>>()?;
                Frames::from_rows(&rows)
            };
        Ok(Self {
            inputs: standardize(sample.inputs.clone(), &standardizer.input)?,
            pose: standardize(sample.targets(), &standardizer.target)?,
            acc: standardize(sample.acc_targets(), &standardizer.acc)?,
        })
    }

    fn window(&self, r: &Range<usize>) -> Self {
        Self {
            inputs: self.inputs.slice(r.start, r.end),
            pose: self.pose.slice(r.start, r.end),
            acc: self.acc.slice(r.start, r.end),
        }
    }
}

/// Fits input, pose and acceleration statistics on the given samples.
pub fn fit_standardizer_on(samples: &[&SequenceSample]) -> Result<Standardizer> {
    let inputs: Vec<Vec<f64>> = samples
        .iter()
        .flat_map(|s| s.inputs.iter().cloned())
        .collect();
    let targets: Vec<Vec<f64>> = samples.iter().flat_map(|s| s.targets()).collect();
    let acc: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| acceleration_block(x).to_vec())
        .collect();
    fit_standardizer(&inputs, &targets, &acc)
}

/// Mean-per-timestep NLL of a whole sequence without dropout.
pub fn sequence_nll(params: &Params, cfg: &ModelConfig, seq: &Prepared) -> Result<f64> {
    let (out, _) = forward(params, cfg, &seq.inputs, None, Mode::Inference)?;
    nll_loss(&out, &seq.pose, &seq.acc, cfg)
}

fn mean_nll(params: &Params, cfg: &ModelConfig, seqs: &[Prepared]) -> Result<f64> {
    let losses = seqs
        .par_iter()
        .map(|s| sequence_nll(params, cfg, s))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

fn check_dims(cfg: &ModelConfig, dataset: &Dataset) -> Result<()> {
    match dataset.input_dim() {
        Some(d) if d == cfg.input_dim => Ok(()),
        Some(d) => Err(Error::invalid(format!(
            "dataset inputs have {d} values per frame, model expects {}",
            cfg.input_dim
        ))),
        None => Err(Error::invalid("dataset is empty")),
    }
}

fn prepare_split(
    dataset: &Dataset,
    split: Split,
    standardizer: &Standardizer,
) -> Result<Vec<Prepared>> {
    dataset
        .split(split)
        .into_iter()
        .map(|s| Prepared::new(s, standardizer))
        .collect()
}

/// Trains a freshly initialized model. The standardizer is fitted on the
/// training split.
pub fn train(
    model: &ModelConfig,
    cfg: &TrainConfig,
    dataset: &Dataset,
) -> Result<(Checkpoint, TrainReport)> {
    if dataset.train.is_empty() {
        return Err(Error::invalid("training needs a nonempty train split"));
    }
    let standardizer = fit_standardizer_on(&dataset.split(Split::Train))?;
    train_with_standardizer(model, cfg, dataset, standardizer)
}

/// [`train`] with precomputed statistics.
pub fn train_with_standardizer(
    model: &ModelConfig,
    cfg: &TrainConfig,
    dataset: &Dataset,
    standardizer: Standardizer,
) -> Result<(Checkpoint, TrainReport)> {
    model.validate()?;
    cfg.validate()?;
    check_dims(model, dataset)?;
    if dataset.train.is_empty() || dataset.validation.is_empty() {
        return Err(Error::invalid(
            "training needs nonempty train and validation splits",
        ));
    }
    let dims = (
        standardizer.input.dim(),
        standardizer.target.dim(),
        standardizer.acc.dim(),
    );
    if dims != (model.input_dim, model.pose_dim, model.acc_dim) {
        return Err(Error::invalid(format!(
            "statistics cover {dims:?} values, model needs ({}, {}, {})",
            model.input_dim, model.pose_dim, model.acc_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = Params::init(model, &mut rng)?;
    let (params, report) = optimize(params, model, cfg, &standardizer, dataset, &mut rng)?;
    Ok((
        Checkpoint {
            config: model.clone(),
            standardizer,
            params,
        },
        report,
    ))
}

/// Continues training `checkpoint` on a new dataset with fresh optimizer
/// state and learning-rate schedule. The checkpoint's standardizer is kept.
pub fn finetune(
    checkpoint: &Checkpoint,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, TrainReport)> {
    checkpoint.validate()?;
    cfg.validate()?;
    check_dims(&checkpoint.config, dataset)?;
    if dataset.train.is_empty() || dataset.validation.is_empty() {
        return Err(Error::invalid(
            "fine-tuning needs nonempty train and validation splits",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (params, report) = optimize(
        checkpoint.params.clone(),
        &checkpoint.config,
        cfg,
        &checkpoint.standardizer,
        dataset,
        &mut rng,
    )?;
    Ok((
        Checkpoint {
            params,
            ..checkpoint.clone()
        },
        report,
    ))
}

fn optimize(
    mut params: Params,
    model: &ModelConfig,
    cfg: &TrainConfig,
    standardizer: &Standardizer,
    dataset: &Dataset,
    rng: &mut ChaCha8Rng,
) -> Result<(Params, TrainReport)> {
    let started = Instant::now();
    let mut report = TrainReport::default();
    if cfg.max_epochs == 0 {
        return Ok((params, report));
    }
    let train_seqs = prepare_split(dataset, Split::Train, standardizer)?;
    let val_seqs = prepare_split(dataset, Split::Validation, standardizer)?;
    let windows: Vec<Prepared> = train_seqs
        .iter()
        .flat_map(|s| {
            training_windows(s.inputs.len(), cfg.window_frames, cfg.window_stride)
                .into_iter()
                .map(move |r| s.window(&r))
        })
        .collect();

    let mut adam = AdamState::for_params(&params, cfg);
    let mut step: u64 = 0;
    let mut best: Option<(f64, usize, Params)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..windows.len()).collect();

    for epoch in 0..cfg.max_epochs {
        let epoch_start = Instant::now();
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut lr = lr_schedule(step, cfg);
        for batch in order.chunks(cfg.batch_size) {
            let masks: Vec<Option<Frames>> = batch
                .iter()
                .map(|&i| {
                    (model.input_keep_prob < 1.0).then(|| {
                        dropout_mask(
                            windows[i].inputs.len(),
                            model.input_dim,
                            model.input_keep_prob,
                            rng,
                        )
                    })
                })
                .collect();
            let results = batch
                .par_iter()
                .zip(masks.par_iter())
                .map(|(&i, mask)| window_gradient(&params, model, &windows[i], mask.as_ref()))
                .collect::<Result<Vec<(f64, Params)>>>()?;

            let mut grad = Params::zeros(model);
            let scale = 1.0 / results.len() as f64;
            for (loss, g) in &results {
                if !loss.is_finite() {
                    return Err(Error::TrainingDiverged {
                        epoch,
                        reason: format!("training loss {loss}"),
                    });
                }
                loss_sum += loss;
                grad.add_scaled(g, scale);
            }
            clip_by_global_norm(&mut grad.tensors_mut(), cfg.clip_norm).map_err(|_| {
                Error::TrainingDiverged {
                    epoch,
                    reason: "non-finite gradient".into(),
                }
            })?;
            lr = lr_schedule(step, cfg);
            adam_step(&mut params, &grad, &mut adam, lr);
            step += 1;
        }
        let train_nll = loss_sum / windows.len() as f64;
        let val_nll = mean_nll(&params, model, &val_seqs)?;
        if !val_nll.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                reason: format!("validation loss {val_nll}"),
            });
        }
        let seconds = epoch_start.elapsed().as_secs_f64();
        log::info!(
            "epoch {epoch}: train {train_nll:.4} val {val_nll:.4} lr {lr:.3e} ({seconds:.2}s)"
        );
        report.epochs.push(EpochRecord {
            epoch,
            train_nll,
            val_nll,
            lr,
            seconds,
        });
        if best.as_ref().is_none_or(|b| val_nll < b.0) {
            best = Some((val_nll, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                log::info!("no validation improvement for {since_best} epochs, stopping");
                break;
            }
        }
    }
    let (best_val, best_epoch, best_params) = best.expect("at least one epoch ran");
    report.best_epoch = Some(best_epoch);
    report.best_val_nll = Some(best_val);
    report.seconds = started.elapsed().as_secs_f64();
    Ok((best_params, report))
}

fn window_gradient(
    params: &Params,
    model: &ModelConfig,
    w: &Prepared,
    mask: Option<&Frames>,
) -> Result<(f64, Params)> {
    let (out, cache) = forward(params, model, &w.inputs, mask, Mode::Training)?;
    let loss = nll_loss(&out, &w.pose, &w.acc, model)?;
    let grad = backward(params, model, &out, cache.as_ref(), &w.pose, &w.acc, 1.0)?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{default_sensors, KinematicTree};
    use crate::normalization::NormalizationScheme;
    use crate::synthesis::{generate_procedural_motions, synthesize, MotionCatalog};
    use rand::Rng;

    #[test]
    fn schedule_constants() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_schedule(0, &cfg), 0.001);
        assert_eq!(lr_schedule(2000, &cfg), 0.00096);
        assert!((lr_schedule(4000, &cfg) - 0.0009216).abs() < 1e-18);
        assert!(lr_schedule(1000, &cfg) < 0.001 && lr_schedule(1000, &cfg) > 0.00096);
    }

    #[test]
    fn clipping_examples() {
        let mut g = vec![3.0, 4.0];
        let norm = clip_by_global_norm(&mut [&mut g], 1.0).unwrap();
        assert_eq!(norm, 5.0);
        assert_eq!(g, vec![0.6, 0.8]);

        let mut a = vec![0.3];
        let mut b = vec![0.4];
        clip_by_global_norm(&mut [&mut a, &mut b], 1.0).unwrap();
        assert_eq!((a[0], b[0]), (0.3, 0.4));

        let mut bad = vec![f64::NAN];
        assert!(matches!(
            clip_by_global_norm(&mut [&mut bad], 1.0),
            Err(Error::TrainingDiverged { .. })
        ));
    }

    #[test]
    fn clipped_norm_never_exceeds_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let mut ts: Vec<Vec<f64>> = (0..rng.random_range(1..5))
                .map(|_| {
                    (0..rng.random_range(1..20))
                        .map(|_| rng.random_range(-10.0..10.0))
                        .collect()
                })
                .collect();
            let clip = rng.random_range(0.01..5.0);
            let mut refs: Vec<&mut Vec<f64>> = ts.iter_mut().collect();
            clip_by_global_norm(&mut refs, clip).unwrap();
            let norm = ts.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= clip + 1e-12);
        }
    }

    #[test]
    fn adam_zero_gradient_and_first_step() {
        let mut state = AdamState::new([3], 0.9, 0.999, 1e-8);
        let mut w = vec![1.0, -2.0, 0.5];
        state.m[0] = vec![0.1, 0.1, 0.1];
        state.v[0] = vec![0.1, 0.1, 0.1];
        let before = w.clone();
        let zeros = [0.0; 3];
        // Zero gradient with zero moments leaves params; with moments they decay.
        let mut fresh = AdamState::new([3], 0.9, 0.999, 1e-8);
        fresh.update(vec![&mut w], &[&zeros], 0.1);
        assert_eq!(w, before);
        state.update(vec![&mut w], &[&zeros], 0.0);
        assert!((state.m[0][0] - 0.09).abs() < 1e-15);
        assert!((state.v[0][0] - 0.0999).abs() < 1e-15);

        let mut s = AdamState::new([3], 0.9, 0.999, 1e-8);
        let g = [0.5, -3.0, 1e-3];
        let mut w = vec![0.0; 3];
        s.update(vec![&mut w], &[&g], 0.01);
        for (wi, gi) in w.iter().zip(g) {
            let expected = -0.01 * gi / (gi.abs() + 1e-8);
            assert!((wi - expected).abs() < 1e-15, "{wi} vs {expected}");
        }
    }

    #[test]
    fn adam_minimizes_scalar_quadratic() {
        let mut s = AdamState::new([1], 0.9, 0.999, 1e-8);
        let mut w = vec![0.0];
        for _ in 0..100 {
            let g = [2.0 * (w[0] - 3.0)];
            s.update(vec![&mut w], &[&g], 0.1);
        }
        assert!((w[0] - 3.0).abs() < 0.05, "{}", w[0]);
    }

    #[test]
    fn windows_cover_sequence() {
        assert_eq!(training_windows(100, 300, 150), vec![0..100]);
        assert_eq!(
            training_windows(600, 300, 150),
            vec![0..300, 150..450, 300..600]
        );
        assert_eq!(
            training_windows(500, 300, 150),
            vec![0..300, 150..450, 200..500]
        );
    }

    fn tiny_dataset() -> Dataset {
        let catalog =
            MotionCatalog::from_names(&["arm_raise", "walk", "squat"], 1, 300, 60).unwrap();
        let tree = KinematicTree::default_skeleton();
        let sensors = default_sensors();
        let samples = generate_procedural_motions(&catalog, 5)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let (imu, poses) = synthesize(m, &tree, &sensors).unwrap();
                SequenceSample::from_synthetic(
                    format!("m{i}"),
                    &imu,
                    &poses,
                    NormalizationScheme::PerFrameRoot,
                )
                .unwrap()
            })
            .collect();
        Dataset::with_splits(samples, vec![0, 1], vec![2], vec![2]).unwrap()
    }

    fn quick() -> (ModelConfig, TrainConfig) {
        let model = ModelConfig::toy(4);
        let cfg = TrainConfig {
            max_epochs: 2,
            batch_size: 2,
            window_frames: 64,
            window_stride: 64,
            seed: 9,
            ..TrainConfig::default()
        };
        (model, cfg)
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let ds = tiny_dataset();
        let (model, mut cfg) = quick();
        cfg.max_epochs = 0;
        let (ckpt, report) = train(&model, &cfg, &ds).unwrap();
        let init = Params::init(&model, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
        assert_eq!(ckpt.params, init);
        assert!(report.epochs.is_empty());

        let (tuned, report) = finetune(&ckpt, &ds, &cfg).unwrap();
        assert_eq!(tuned, ckpt);
        assert!(report.epochs.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_restores_best() {
        let ds = tiny_dataset();
        let (model, cfg) = quick();
        let (a, ra) = train(&model, &cfg, &ds).unwrap();
        let (b, rb) = train(&model, &cfg, &ds).unwrap();
        assert_eq!(a, b);
        let strip = |r: &TrainReport| {
            r.epochs
                .iter()
                .map(|e| (e.train_nll, e.val_nll, e.lr))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&ra), strip(&rb));
        let best = ra
            .epochs
            .iter()
            .map(|e| e.val_nll)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(ra.best_val_nll, Some(best));
        let val = prepare_split(&ds, Split::Validation, &a.standardizer).unwrap();
        assert_eq!(mean_nll(&a.params, &model, &val).unwrap(), best);
        let csv = ra.to_csv();
        assert!(csv.starts_with("epoch,train_nll,val_nll,lr,seconds\n"));
        let epochs = TrainReport::epochs_from_csv(&csv).unwrap();
        assert_eq!(epochs.len(), ra.epochs.len());
        let again = TrainReport {
            epochs,
            ..TrainReport::default()
        };
        assert_eq!(again.to_csv(), csv);
    }

    #[test]
    fn finetune_rejects_mismatched_dimensions() {
        let ds = tiny_dataset();
        let (model, mut cfg) = quick();
        cfg.max_epochs = 0;
        let (ckpt, _) = train(&model, &cfg, &ds).unwrap();
        let wide: Vec<SequenceSample> = ds
            .samples
            .iter()
            .map(|s| {
                SequenceSample::new(
                    &s.name,
                    s.inputs
                        .iter()
                        .map(|x| [x.as_slice(), &[0.0; 12]].concat())
                        .collect(),
                    s.poses.clone(),
                )
                .unwrap()
            })
            .collect();
        let wide = Dataset::with_splits(wide, vec![0], vec![1], vec![2]).unwrap();
        assert!(matches!(
            finetune(&ckpt, &wide, &cfg),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn config_validation() {
        TrainConfig::default().validate().unwrap();
        for bad in [
            TrainConfig {
                decay_rate: 1.5,
                ..TrainConfig::default()
            },
            TrainConfig {
                initial_lr: 0.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
