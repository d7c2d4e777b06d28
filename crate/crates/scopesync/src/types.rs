//! Shared domain types: timestamps, per-modality samples and channels.
//!
//! Timestamps are integer nanoseconds since the stream epoch so that
//! serialization round-trips are bit exact. All sample types are immutable
//! values once constructed and safe to share across threads.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Quat, Vec3};

pub const DEFAULT_FRAME_WIDTH: u32 = 383;
pub const DEFAULT_FRAME_HEIGHT: u32 = 396;

/// Nanoseconds since the stream epoch. Non-negative by construction.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn from_nanos(ns: i64) -> Result<Self> {
        if ns < 0 {
            return Err(Error::InvalidArgument(format!(
                "timestamp must be non-negative, got {ns} ns"
            )));
        }
        Ok(Timestamp(ns))
    }

    /// Seconds-to-nanoseconds conversion, rounding to the nearest
    /// nanosecond and clamping negatives produced by jitter to zero.
    pub fn from_secs_f64_clamped(secs: f64) -> Self {
        let ns = (secs * 1e9).round();
        Timestamp((ns.max(0.0)) as i64)
    }

    pub fn as_nanos(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn offset_by_ms(self, offset_ms: f64) -> i64 {
        // May go negative; callers treat the result as a query time, not a
        // channel timestamp.
        self.0 - (offset_ms * 1e6).round() as i64
    }
}

/// The four logged modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Action,
    State,
    Pose,
    Frame,
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Modality::Action => "action",
            Modality::State => "state",
            Modality::Pose => "pose",
            Modality::Frame => "frame",
        };
        f.write_str(s)
    }
}

/// Normalized operator command: two bending axes, insertion and a homing
/// flag. Continuous components live in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSample {
    pub t: Timestamp,
    pub bend_x: f64,
    pub bend_y: f64,
    pub insertion: f64,
    pub home: bool,
}

impl ActionSample {
    pub fn new(t: Timestamp, bend_x: f64, bend_y: f64, insertion: f64, home: bool) -> Result<Self> {
        let s = ActionSample {
            t,
            bend_x,
            bend_y,
            insertion,
            home,
        };
        match s.invariant_violation() {
            None => Ok(s),
            Some(msg) => Err(Error::InvalidArgument(msg)),
        }
    }

    pub fn axes(&self) -> [f64; 3] {
        [self.bend_x, self.bend_y, self.insertion]
    }

    pub fn as_vec4(&self) -> [f64; 4] {
        [
            self.bend_x,
            self.bend_y,
            self.insertion,
            if self.home { 1.0 } else { 0.0 },
        ]
    }

    fn invariant_violation(&self) -> Option<String> {
        for (name, v) in [
            ("bend_x", self.bend_x),
            ("bend_y", self.bend_y),
            ("insertion", self.insertion),
        ] {
            if !v.is_finite() {
                return Some(format!("action {name} is not finite"));
            }
            if !(-1.0..=1.0).contains(&v) {
                return Some(format!("action {name} = {v} outside [-1, 1]"));
            }
        }
        None
    }
}

/// Encoder-derived output-shaft angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSample {
    pub t: Timestamp,
    pub bend_x_deg: f64,
    pub bend_y_deg: f64,
    pub insertion_deg: f64,
}

impl StateSample {
    pub fn new(t: Timestamp, bend_x_deg: f64, bend_y_deg: f64, insertion_deg: f64) -> Result<Self> {
        let s = StateSample {
            t,
            bend_x_deg,
            bend_y_deg,
            insertion_deg,
        };
        if !s.is_finite() {
            return Err(Error::InvalidArgument("non-finite state sample".into()));
        }
        Ok(s)
    }

    pub fn axes(&self) -> [f64; 3] {
        [self.bend_x_deg, self.bend_y_deg, self.insertion_deg]
    }

    fn is_finite(&self) -> bool {
        self.bend_x_deg.is_finite() && self.bend_y_deg.is_finite() && self.insertion_deg.is_finite()
    }
}

/// Output-shaft quantization steps, in degrees, for the two transmission
/// paths of a state channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateQuantization {
    pub bend_step_deg: f64,
    pub feed_step_deg: f64,
}

impl StateQuantization {
    /// True when `value` is an integer multiple of `step` within float
    /// round-off.
    pub fn is_multiple(value: f64, step: f64) -> bool {
        if step <= 0.0 {
            return false;
        }
        let k = (value / step).round();
        (value - k * step).abs() <= step * 1e-6
    }
}

/// Tracked distal tip pose: position in meters, unit quaternion orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t: Timestamp,
    pub position: Vec3,
    pub orientation: Quat,
}

impl PoseSample {
    /// Normalizes the orientation on construction so the stored quaternion
    /// is unit to 1e-9.
    pub fn new(t: Timestamp, position: Vec3, orientation: Quat) -> Result<Self> {
        if !position.is_finite() {
            return Err(Error::InvalidArgument("non-finite pose position".into()));
        }
        let orientation = orientation.normalized()?;
        Ok(PoseSample {
            t,
            position,
            orientation,
        })
    }
}

/// One grayscale video frame, row-major 8-bit pixels. The pixel buffer is
/// reference counted so frames clone cheaply.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub t: Timestamp,
    pub width: u32,
    pub height: u32,
    pub pixels: Arc<[u8]>,
}

impl FrameSample {
    pub fn new(t: Timestamp, width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != (width as usize) * (height as usize) {
            return Err(Error::InvalidArgument(format!(
                "frame buffer length {} does not match {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        Ok(FrameSample {
            t,
            width,
            height,
            pixels: pixels.into(),
        })
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y as usize) * (self.width as usize) + x as usize]
    }
}

/// Behaviour shared by all per-modality samples so channels can be
/// validated generically.
pub trait Sample: Clone {
    const MODALITY: Modality;
    fn timestamp(&self) -> Timestamp;
    /// Human-readable invariant violations for this sample, if any.
    fn issues(&self, quant: Option<&StateQuantization>) -> Vec<String>;
}

impl Sample for ActionSample {
    const MODALITY: Modality = Modality::Action;
    fn timestamp(&self) -> Timestamp {
        self.t
    }
    fn issues(&self, _quant: Option<&StateQuantization>) -> Vec<String> {
        self.invariant_violation().into_iter().collect()
    }
}

impl Sample for StateSample {
    const MODALITY: Modality = Modality::State;
    fn timestamp(&self) -> Timestamp {
        self.t
    }
    fn issues(&self, quant: Option<&StateQuantization>) -> Vec<String> {
        let mut out = Vec::new();
        if !self.is_finite() {
            out.push("non-finite state value".to_string());
        }
        if let Some(q) = quant {
            for (name, v, step) in [
                ("bend_x_deg", self.bend_x_deg, q.bend_step_deg),
                ("bend_y_deg", self.bend_y_deg, q.bend_step_deg),
                ("insertion_deg", self.insertion_deg, q.feed_step_deg),
            ] {
                if !StateQuantization::is_multiple(v, step) {
                    out.push(format!("{name} = {v} is not a multiple of {step}"));
                }
            }
        }
        out
    }
}

impl Sample for PoseSample {
    const MODALITY: Modality = Modality::Pose;
    fn timestamp(&self) -> Timestamp {
        self.t
    }
    fn issues(&self, _quant: Option<&StateQuantization>) -> Vec<String> {
        let mut out = Vec::new();
        if !self.position.is_finite() {
            out.push("non-finite pose position".to_string());
        }
        if (self.orientation.norm() - 1.0).abs() > 1e-6 {
            out.push("pose orientation is not unit".to_string());
        }
        out
    }
}

impl Sample for FrameSample {
    const MODALITY: Modality = Modality::Frame;
    fn timestamp(&self) -> Timestamp {
        self.t
    }
    fn issues(&self, _quant: Option<&StateQuantization>) -> Vec<String> {
        let mut out = Vec::new();
        if self.pixels.len() != (self.width as usize) * (self.height as usize) {
            out.push("frame buffer length mismatch".to_string());
        }
        out
    }
}

/// A timestamped, rate-annotated sequence of samples of one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T: Sample> {
    pub nominal_rate_hz: f64,
    /// Set on state channels emitted by the simulator; drives the
    /// quantization part of validation.
    pub quantization: Option<StateQuantization>,
    pub samples: Vec<T>,
}

impl<T: Sample> Channel<T> {
    pub fn new(nominal_rate_hz: f64, samples: Vec<T>) -> Self {
        Channel {
            nominal_rate_hz,
            quantization: None,
            samples,
        }
    }

    pub fn with_quantization(mut self, q: StateQuantization) -> Self {
        self.quantization = Some(q);
        self
    }

    pub fn modality(&self) -> Modality {
        T::MODALITY
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn timestamps(&self) -> Vec<Timestamp> {
        self.samples.iter().map(|s| s.timestamp()).collect()
    }
}

/// Where the nominal rate check counts as violated: observed mean interval
/// off by more than this fraction of the nominal interval.
pub const RATE_DEVIATION_TOLERANCE: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateDeviation {
    pub nominal_hz: f64,
    pub observed_hz: f64,
}

/// Outcome of `validate_channel`. Empty report (no violations) means valid.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ValidationReport {
    pub modality: Option<Modality>,
    pub sample_count: usize,
    /// Indices whose timestamp is not strictly greater than the previous one.
    pub monotonicity_violations: Vec<usize>,
    pub rate_deviation: Option<RateDeviation>,
    /// (sample index, description) pairs.
    pub sample_issues: Vec<(usize, String)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.monotonicity_violations.is_empty()
            && self.rate_deviation.is_none()
            && self.sample_issues.is_empty()
    }
}

/// Validates monotonicity, nominal-rate adherence and per-sample invariants.
/// Never fails; idempotent and side-effect free.
pub fn validate_channel<T: Sample>(c: &Channel<T>) -> ValidationReport {
    let mut report = ValidationReport {
        modality: Some(T::MODALITY),
        sample_count: c.samples.len(),
        ..ValidationReport::default()
    };

    for (i, s) in c.samples.iter().enumerate() {
        if s.timestamp().as_nanos() < 0 {
            report
                .sample_issues
                .push((i, "negative timestamp".to_string()));
        }
        if i > 0 && s.timestamp() <= c.samples[i - 1].timestamp() {
            report.monotonicity_violations.push(i);
        }
        for issue in s.issues(c.quantization.as_ref()) {
            report.sample_issues.push((i, issue));
        }
    }

    if c.samples.len() >= 2 && c.nominal_rate_hz > 0.0 {
        let span = c.samples.last().unwrap().timestamp().as_secs_f64()
            - c.samples[0].timestamp().as_secs_f64();
        let mean_interval = span / (c.samples.len() - 1) as f64;
        let nominal_interval = 1.0 / c.nominal_rate_hz;
        if mean_interval > 0.0
            && (mean_interval - nominal_interval).abs() > RATE_DEVIATION_TOLERANCE * nominal_interval
        {
            report.rate_deviation = Some(RateDeviation {
                nominal_hz: c.nominal_rate_hz,
                observed_hz: 1.0 / mean_interval,
            });
        }
    }

    report
}
