//! File formats, experiment configuration and commands built on `sbcm-core`.
//!
//! * [`audio`]: 16-bit PCM mono WAV
//! * [`protocol`], [`manifest`], [`scores`]: trial lists and score files
//! * [`features`]: binary feature cache
//! * [`model_io`], [`heatmap_io`]: text records for models, heat-maps and reports
//! * [`config`]: TOML experiment config and synthetic-data specs
//! * [`commands`], [`cli`]: the `sbcm` subcommands

pub mod audio;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod features;
pub mod heatmap_io;
pub mod manifest;
pub mod model_io;
pub mod protocol;
pub mod scores;

pub use error::{Error, Result};
