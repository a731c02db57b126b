//! File formats, experiment configuration and sweep orchestration on top of
//! [`satee_core`]. The `satee` binary is a thin CLI over this crate.

pub mod channel_file;
pub mod config;
pub mod experiment;

pub use channel_file::{load_channel, save_channel, ChannelFileError};
pub use config::{Algorithm, ConfigError, ExperimentConfig, Preset};
