//! File formats, parallel drivers and the `okd` command line on top of
//! [`okd_core`].

pub mod cli;
pub mod config;
pub mod records;
pub mod sweep;
pub mod validate;
pub mod waveform;
