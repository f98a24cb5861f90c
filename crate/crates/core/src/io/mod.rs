//! Files, configuration and the streaming server.

mod binary;
pub mod config;
pub mod dataset;
pub mod formats;
pub mod server;
pub mod wire;

pub use config::{RunConfig, CONFIG_ENV};
pub use dataset::{load_samples, save_sequence};
pub use formats::{
    load_calibration, load_checkpoint, load_imu, load_poses, save_calibration, save_checkpoint,
    save_imu, save_poses,
};
