//! Manifest parsing and command dispatch behind the `catramp` binary.

pub mod manifest;
pub mod run;

pub use manifest::{parse_override, RunManifest, COMMANDS, KEYS};
pub use run::{execute, property_checks, Check, Outcome, Status};
