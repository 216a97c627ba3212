//! Jamming-policy recognition over a multi-channel network.
//!
//! The crate simulates users and a policy-switching jammer hopping over `L`
//! orthogonal channels, encodes each slot's channel occupancy into binary
//! vectors, trains a GRU sequence classifier on them, and evaluates how
//! reliably the active jamming policy is recognized as a function of the
//! jammer's policy switching time.
//!
//! - [`sim`] — the discrete-time simulator (five jamming policies, uniform
//!   policy redraw every K slots).
//! - [`encoding`] — occupancy vectors, training chunks and test windows.
//! - [`gru`] — the GRU cell, softmax head, backpropagation through time,
//!   optimizers, training loop and checkpointing.
//! - [`eval`] — train/test experiment orchestration, accuracy curves,
//!   per-policy accuracies and confusion matrices.
//! - [`trace`] / [`report`] — the CSV/JSON file formats produced by the CLI.
//!
//! All randomness flows through explicitly seeded generators; identical
//! seeds give bit-identical traces, models and reports.

pub mod encoding;
pub mod error;
pub mod eval;
pub mod gru;
mod io;
pub mod report;
pub mod seed;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
pub use eval::{EvalReport, ExperimentConfig};
pub use gru::{GruParams, Hyperparams};
pub use sim::{ChannelSet, PolicyKind, SimConfig, SlotRecord};

pub use io::write_atomic;
