//! `key = value` run configuration covering the model and the optimizer.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::ModelConfig;
use crate::normalization::NormalizationScheme;
use crate::training::TrainConfig;

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "IMUCAP_CONFIG";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::invalid(format!(
            "bad value {value:?} for {key} (expected true/false)"
        ))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "hidden_units" => m.hidden_units = parse(key, value)?,
            "dense_units" => m.dense_units = parse(key, value)?,
            "num_layers" => m.num_layers = parse(key, value)?,
            "bidirectional" => m.bidirectional = parse_bool(key, value)?,
            "input_keep_prob" => m.input_keep_prob = parse(key, value)?,
            "use_acc_loss" => m.use_acc_loss = parse_bool(key, value)?,
            "use_acc_inputs" => m.use_acc_inputs = parse_bool(key, value)?,
            "scheme" => {
                let scheme: NormalizationScheme = value.parse()?;
                *m = m.clone().with_scheme(scheme);
            }
            "initial_lr" => t.initial_lr = parse(key, value)?,
            "decay_rate" => t.decay_rate = parse(key, value)?,
            "decay_steps" => t.decay_steps = parse(key, value)?,
            "clip_norm" => t.clip_norm = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "max_epochs" => t.max_epochs = parse(key, value)?,
            "early_stop_patience" => t.early_stop_patience = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "beta1" => t.beta1 = parse(key, value)?,
            "beta2" => t.beta2 = parse(key, value)?,
            "epsilon" => t.epsilon = parse(key, value)?,
            "window_frames" => t.window_frames = parse(key, value)?,
            "window_stride" => t.window_stride = parse(key, value)?,
            _ => return Err(Error::invalid(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every assignment in `text` on top of the current values.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::invalid(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    /// Loads `explicit` if given, else the file named by [`CONFIG_ENV`],
    /// else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        let from_env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        match explicit.map(Path::to_path_buf).or(from_env) {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }

    /// Canonical text form; parsing it yields `self`.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let t = &self.train;
        format!(
            "hidden_units = {}\ndense_units = {}\nnum_layers = {}\nbidirectional = {}\ninput_keep_prob = {}\n\
             use_acc_loss = {}\nuse_acc_inputs = {}\nscheme = {}\ninitial_lr = {}\ndecay_rate = {}\n\
             decay_steps = {}\nclip_norm = {}\nbatch_size = {}\nmax_epochs = {}\nearly_stop_patience = {}\n\
             seed = {}\nbeta1 = {}\nbeta2 = {}\nepsilon = {}\nwindow_frames = {}\nwindow_stride = {}\n",
            m.hidden_units,
            m.dense_units,
            m.num_layers,
            m.bidirectional,
            m.input_keep_prob,
            m.use_acc_loss,
            m.use_acc_inputs,
            m.scheme,
            t.initial_lr,
            t.decay_rate,
            t.decay_steps,
            t.clip_norm,
            t.batch_size,
            t.max_epochs,
            t.early_stop_patience,
            t.seed,
            t.beta1,
            t.beta2,
            t.epsilon,
            t.window_frames,
            t.window_stride,
        )
    }
}
