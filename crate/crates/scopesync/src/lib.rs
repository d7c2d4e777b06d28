//! scopesync: simulation, latency characterization and cross-modal
//! synchronization for multimodal robotic endoscope telemetry.
//!
//! The toolkit covers the full pipeline for working with asynchronous
//! action / state / pose / video streams from a motorized scope rig:
//!
//! * [`sim`] — a deterministic simulator of the retrofitted scope drive
//!   train with constant-curvature tip kinematics, procedural video, and
//!   injectable per-channel latency, jitter, noise and dropout;
//! * [`sync`] — sinusoid-excitation latency characterization, offset
//!   calibration, multi-rate resampling onto the 30 Hz video grid and
//!   residual-lag analysis of aligned pairs;
//! * [`flow`] — single-level Lucas-Kanade optical flow and the
//!   keypoint-averaged motion signal that serves as the video-derived
//!   modality;
//! * [`dataset`] — a self-documented episode dataset format (CSV + PGM +
//!   JSON) with bit-exact round-trips, task taxonomy, validation and
//!   episode statistics;
//! * [`cli`] — the `scopesync` command-line front end chaining
//!   simulate → characterize → align → lag → stats → validate.
//!
//! Every runnable capability also has a standalone program under
//! `examples/`.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod flow;
pub mod geom;
pub mod sim;
pub mod sync;
pub mod types;

pub use error::{Error, Result};
pub use geom::{quat_slerp, Quat, Vec3};
pub use types::{
    validate_channel, ActionSample, Channel, FrameSample, Modality, PoseSample, Sample,
    StateSample, Timestamp, ValidationReport,
};
