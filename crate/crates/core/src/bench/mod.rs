//! Experiment plumbing behind the command-line tool: run manifests, config
//! resolution, versioned CSV tables, SVG charts and the command bodies.

pub mod cache;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;
pub mod run;
pub mod table;

pub use commands::{Axis, Outcome, Status, StreamReport};
pub use manifest::RunManifest;
pub use run::{execute, replay, resolve_command, Command, Replay};
