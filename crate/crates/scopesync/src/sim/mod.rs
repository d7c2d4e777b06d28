//! Deterministic simulator of a retrofitted endoscope rig: action-driven
//! transmission, constant-curvature tip kinematics, procedural frame
//! rendering and asynchronous multi-channel stream emission with injected
//! latency, jitter, noise and dropout.
//!
//! A simulation run is single-owner and sequential; the emitted channels are
//! immutable values that concurrent readers may consume afterwards.

mod emit;
mod kinematics;
mod profile;
mod render;

pub mod bundle;

pub use emit::{emit_streams, StreamBundle};
pub use kinematics::tip_pose;
pub use profile::{sinusoid_profile, teleop_profile, Axis, CommandProfile, ProfileKnot};
pub use render::render_frame;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::types::{ActionSample, StateQuantization, Timestamp};

/// Gearing and encoder model of the retrofit drive train.
///
/// `max_motor_speed_dps` is the motor-side speed; the output shaft of an
/// axis moves at `max_motor_speed_dps / gear_ratio` for a full-scale
/// command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionConfig {
    /// Total bend reduction: 1:270 gearbox times the extra 1:2 collet stage.
    pub bend_gear_ratio: f64,
    /// Feed roller reduction (1:350 gearbox).
    pub feed_gear_ratio: f64,
    /// Encoder resolution in degrees (12-bit absolute encoder).
    pub encoder_resolution_deg: f64,
    /// Full-scale motor speed in degrees/second.
    pub max_motor_speed_dps: f64,
}

impl Default for TransmissionConfig {
    fn default() -> Self {
        TransmissionConfig {
            bend_gear_ratio: 540.0,
            feed_gear_ratio: 350.0,
            encoder_resolution_deg: 0.088,
            max_motor_speed_dps: 60.0,
        }
    }
}

impl TransmissionConfig {
    /// Drive-train profile for excitation runs. The stock profile moves the
    /// output shaft at only 0.111 deg/s full scale, which produces tip
    /// excursions far below millimeter-level tracker noise within one
    /// low-frequency period; this one reaches 45 deg/s at the bend output.
    pub fn fast_actuation() -> Self {
        TransmissionConfig {
            max_motor_speed_dps: 24_300.0,
            ..TransmissionConfig::default()
        }
    }

    pub fn bend_output_speed_dps(&self) -> f64 {
        self.max_motor_speed_dps / self.bend_gear_ratio
    }

    pub fn feed_output_speed_dps(&self) -> f64 {
        self.max_motor_speed_dps / self.feed_gear_ratio
    }

    /// Smallest representable output-shaft increment per axis.
    pub fn quantization(&self) -> StateQuantization {
        StateQuantization {
            bend_step_deg: self.encoder_resolution_deg / self.bend_gear_ratio,
            feed_step_deg: self.encoder_resolution_deg / self.feed_gear_ratio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bend_gear_ratio", self.bend_gear_ratio),
            ("feed_gear_ratio", self.feed_gear_ratio),
            ("encoder_resolution_deg", self.encoder_resolution_deg),
            ("max_motor_speed_dps", self.max_motor_speed_dps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "transmission {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Geometry of the bendable distal segment plus rendering constants.
///
/// The joint-to-task map of the real device is not unique; this explicit
/// constant-curvature stand-in keeps the simulated pose smooth and easy to
/// reason about.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScopeConfig {
    /// Length of the bendable distal segment in meters.
    pub segment_length_m: f64,
    /// Per-axis bend limit in degrees, in (0, 180].
    pub max_bend_deg: f64,
    /// Millimeters of insertion per output-shaft degree of the feed roller.
    pub feed_mm_per_deg: f64,
    /// Direction of the lumen in the tracker frame.
    pub lumen_axis: Vec3,
    /// Time constant of the optional first-order low-pass between motor
    /// state and tip curvature, modeling compliance of the deformable
    /// environment. Zero disables the filter.
    pub compliance_tau_s: f64,
    pub frame_width: u32,
    pub frame_height: u32,
    /// Texture translation per output-shaft bend degree.
    pub px_per_deg: f64,
    /// Texture zoom per output-shaft feed degree.
    pub zoom_per_feed_deg: f64,
}

impl Default for ScopeConfig {
    fn default() -> Self {
        ScopeConfig {
            segment_length_m: 0.10,
            max_bend_deg: 180.0,
            feed_mm_per_deg: 0.25,
            lumen_axis: Vec3::new(0.0, 0.0, 1.0),
            compliance_tau_s: 0.0,
            frame_width: crate::types::DEFAULT_FRAME_WIDTH,
            frame_height: crate::types::DEFAULT_FRAME_HEIGHT,
            px_per_deg: 1.25,
            zoom_per_feed_deg: 5e-5,
        }
    }
}

impl ScopeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.segment_length_m.is_finite() && self.segment_length_m > 0.0) {
            return Err(Error::InvalidArgument(
                "segment_length_m must be strictly positive".into(),
            ));
        }
        if !(self.max_bend_deg > 0.0 && self.max_bend_deg <= 180.0) {
            return Err(Error::InvalidArgument(
                "max_bend_deg must lie in (0, 180]".into(),
            ));
        }
        if !(self.feed_mm_per_deg.is_finite() && self.feed_mm_per_deg > 0.0) {
            return Err(Error::InvalidArgument(
                "feed_mm_per_deg must be strictly positive".into(),
            ));
        }
        if self.lumen_axis.norm() == 0.0 || !self.lumen_axis.is_finite() {
            return Err(Error::InvalidArgument("lumen_axis must be non-zero".into()));
        }
        if self.compliance_tau_s < 0.0 {
            return Err(Error::InvalidArgument(
                "compliance_tau_s must be non-negative".into(),
            ));
        }
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err(Error::InvalidArgument("frame dimensions must be non-zero".into()));
        }
        Ok(())
    }
}

/// Per-channel acquisition latency in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ChannelLatenciesMs {
    pub action: f64,
    pub state: f64,
    pub pose: f64,
    pub frame: f64,
}

impl ChannelLatenciesMs {
    pub fn get(&self, m: crate::types::Modality) -> f64 {
        match m {
            crate::types::Modality::Action => self.action,
            crate::types::Modality::State => self.state,
            crate::types::Modality::Pose => self.pose,
            crate::types::Modality::Frame => self.frame,
        }
    }

    pub fn max(&self) -> f64 {
        self.action.max(self.state).max(self.pose).max(self.frame)
    }
}

/// Injected acquisition imperfections. The seed fully determines all
/// randomness, so identical configs emit bit-identical channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyConfig {
    pub latency_ms: ChannelLatenciesMs,
    /// Standard deviation of the zero-mean timestamp jitter, clamped to
    /// three sigma and never allowed to reorder samples.
    pub jitter_std_ms: f64,
    /// Gaussian noise on pose position, meters per axis. Orientation is
    /// left untouched.
    pub pose_noise_std_m: f64,
    /// Per-sample dropout probability in [0, 1).
    pub dropout_prob: f64,
    pub seed: u64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            latency_ms: ChannelLatenciesMs::default(),
            jitter_std_ms: 0.0,
            pose_noise_std_m: 0.0,
            dropout_prob: 0.0,
            seed: 0,
        }
    }
}

impl LatencyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("latency_ms.action", self.latency_ms.action),
            ("latency_ms.state", self.latency_ms.state),
            ("latency_ms.pose", self.latency_ms.pose),
            ("latency_ms.frame", self.latency_ms.frame),
            ("jitter_std_ms", self.jitter_std_ms),
            ("pose_noise_std_m", self.pose_noise_std_m),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::InvalidArgument(format!(
                "dropout_prob must lie in [0, 1), got {}",
                self.dropout_prob
            )));
        }
        Ok(())
    }
}

/// Nominal emission rates of the four channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamRates {
    pub action_hz: f64,
    pub state_hz: f64,
    pub pose_hz: f64,
    pub frame_hz: f64,
}

impl Default for StreamRates {
    fn default() -> Self {
        StreamRates {
            action_hz: 50.0,
            state_hz: 50.0,
            pose_hz: 40.0,
            frame_hz: 30.0,
        }
    }
}

/// Everything a simulation run needs besides the command profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub transmission: TransmissionConfig,
    pub scope: ScopeConfig,
    pub latency: LatencyConfig,
    pub rates: StreamRates,
    /// Master integration step of the ground-truth trajectory, seconds.
    pub sim_step_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            transmission: TransmissionConfig::default(),
            scope: ScopeConfig::default(),
            latency: LatencyConfig::default(),
            rates: StreamRates::default(),
            sim_step_s: 1e-3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.transmission.validate()?;
        self.scope.validate()?;
        self.latency.validate()?;
        for (name, v) in [
            ("action_hz", self.rates.action_hz),
            ("state_hz", self.rates.state_hz),
            ("pose_hz", self.rates.pose_hz),
            ("frame_hz", self.rates.frame_hz),
            ("sim_step_s", self.sim_step_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// True (unquantized) output-shaft angles of the three axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScopeState {
    pub t: Timestamp,
    pub bend_x_deg: f64,
    pub bend_y_deg: f64,
    pub feed_deg: f64,
}

impl ScopeState {
    pub fn at_rest(t: Timestamp) -> Self {
        ScopeState {
            t,
            bend_x_deg: 0.0,
            bend_y_deg: 0.0,
            feed_deg: 0.0,
        }
    }
}

/// Advances the state by one control interval.
///
/// Actions are rate commands: each axis integrates
/// `action * max_motor_speed_dps / gear_ratio` at the output shaft, bending
/// axes clamped to `[-max_bend_deg, max_bend_deg]`. A set home flag
/// overrides the other components and drives every axis toward zero at full
/// speed, stopping exactly at zero.
pub fn step(
    state: &ScopeState,
    action: &ActionSample,
    dt_s: f64,
    tcfg: &TransmissionConfig,
    scfg: &ScopeConfig,
) -> Result<ScopeState> {
    if !(dt_s.is_finite() && dt_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be strictly positive, got {dt_s}"
        )));
    }
    let axes = action.axes();
    if axes.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite action".into()));
    }

    let v_bend = tcfg.bend_output_speed_dps();
    let v_feed = tcfg.feed_output_speed_dps();
    let limit = scfg.max_bend_deg;

    let next_t = Timestamp::from_nanos(state.t.as_nanos() + (dt_s * 1e9).round() as i64)?;

    if action.home {
        let toward_zero = |x: f64, speed: f64| -> f64 {
            let step = speed * dt_s;
            if x.abs() <= step {
                0.0
            } else {
                x - step * x.signum()
            }
        };
        return Ok(ScopeState {
            t: next_t,
            bend_x_deg: toward_zero(state.bend_x_deg, v_bend),
            bend_y_deg: toward_zero(state.bend_y_deg, v_bend),
            feed_deg: toward_zero(state.feed_deg, v_feed),
        });
    }

    Ok(ScopeState {
        t: next_t,
        bend_x_deg: (state.bend_x_deg + axes[0] * v_bend * dt_s).clamp(-limit, limit),
        bend_y_deg: (state.bend_y_deg + axes[1] * v_bend * dt_s).clamp(-limit, limit),
        feed_deg: state.feed_deg + axes[2] * v_feed * dt_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ts0() -> Timestamp {
        Timestamp::from_nanos(0).unwrap()
    }

    fn act(bx: f64, by: f64, ins: f64, home: bool) -> ActionSample {
        ActionSample::new(ts0(), bx, by, ins, home).unwrap()
    }

    #[test]
    fn zero_action_only_advances_time() {
        let tcfg = TransmissionConfig::default();
        let scfg = ScopeConfig::default();
        let s0 = ScopeState {
            t: ts0(),
            bend_x_deg: 5.0,
            bend_y_deg: -3.0,
            feed_deg: 12.0,
        };
        let s1 = step(&s0, &act(0.0, 0.0, 0.0, false), 0.25, &tcfg, &scfg).unwrap();
        assert_eq!(s1.bend_x_deg, 5.0);
        assert_eq!(s1.bend_y_deg, -3.0);
        assert_eq!(s1.feed_deg, 12.0);
        assert_eq!(s1.t.as_nanos(), 250_000_000);
    }

    #[test]
    fn full_scale_bend_for_one_second_moves_one_ninth_degree() {
        // 60 dps motor over a 540:1 reduction.
        let tcfg = TransmissionConfig::default();
        let scfg = ScopeConfig::default();
        let s1 = step(
            &ScopeState::at_rest(ts0()),
            &act(1.0, 0.0, 0.0, false),
            1.0,
            &tcfg,
            &scfg,
        )
        .unwrap();
        assert_relative_eq!(s1.bend_x_deg, 60.0 / 540.0, max_relative = 1e-12);
        assert_relative_eq!(s1.bend_x_deg, 0.111111111111, epsilon = 1e-9);
    }

    #[test]
    fn homing_reaches_zero_exactly_and_stays() {
        let tcfg = TransmissionConfig::fast_actuation();
        let scfg = ScopeConfig::default();
        let mut s = ScopeState {
            t: ts0(),
            bend_x_deg: 10.0,
            bend_y_deg: -5.0,
            feed_deg: 0.0,
        };
        let home = act(0.5, -0.2, 0.9, true);
        for _ in 0..50 {
            s = step(&s, &home, 0.02, &tcfg, &scfg).unwrap();
        }
        assert_eq!(s.bend_x_deg, 0.0);
        assert_eq!(s.bend_y_deg, 0.0);
        assert_eq!(s.feed_deg, 0.0);
        let s2 = step(&s, &home, 0.02, &tcfg, &scfg).unwrap();
        assert_eq!(s2.bend_x_deg, 0.0);
    }

    #[test]
    fn bend_clamped_at_limit() {
        let tcfg = TransmissionConfig::fast_actuation();
        let scfg = ScopeConfig::default();
        let mut s = ScopeState::at_rest(ts0());
        let a = act(1.0, 0.0, 0.0, false);
        for _ in 0..1000 {
            s = step(&s, &a, 0.02, &tcfg, &scfg).unwrap();
            assert!(s.bend_x_deg <= scfg.max_bend_deg);
        }
        assert_eq!(s.bend_x_deg, scfg.max_bend_deg);
    }

    #[test]
    fn non_positive_dt_rejected() {
        let tcfg = TransmissionConfig::default();
        let scfg = ScopeConfig::default();
        let s = ScopeState::at_rest(ts0());
        assert!(step(&s, &act(0.0, 0.0, 0.0, false), 0.0, &tcfg, &scfg).is_err());
        assert!(step(&s, &act(0.0, 0.0, 0.0, false), -0.1, &tcfg, &scfg).is_err());
    }
}
