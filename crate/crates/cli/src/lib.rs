//! Library surface of the harness: configuration, presets, the ensemble
//! runner, the bounds pipeline, output writers, and the property suite. The
//! `netsa` binary is a thin CLI over these.

pub mod bounds;
pub mod config;
pub mod output;
pub mod presets;
pub mod report;
pub mod runner;
pub mod verify;
