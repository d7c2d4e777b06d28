//! Latency characterization and cross-modal synchronization: fixed-frequency
//! sinusoid fits, phase-derived offsets, velocity-norm residual lag and
//! multi-rate alignment onto the 30 Hz video grid.
//!
//! Everything here is a pure function over immutable inputs; lag curves for
//! different channel pairs can be evaluated concurrently.

mod align;
mod characterize;
mod lag;
mod resample;
mod sinusoid;
mod vnorm;

pub use align::align_episode;
pub use characterize::{
    characterize_latency, characterize_latency_with, principal_axis, CalibrationReference,
    ChannelOffsetsMs, CharacterizeOptions, OffsetCalibration,
};
pub use lag::{residual_lag, LagEstimate, LagSample};
pub use resample::{resample_channel, ChannelRef, ResampleMethod, ResampledSeries};
pub use sinusoid::{fit_sinusoid, phase_offset, SinusoidFit, PHASE_CONFIDENCE_RATIO};
pub use vnorm::{
    minmax_normalize, pearson, velocity_norm, velocity_norm_arrays, VelocityNormSeries,
};
