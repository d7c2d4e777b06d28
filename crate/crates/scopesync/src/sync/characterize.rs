//! Cross-modal latency characterization from a single-axis sinusoidal
//! excitation run.
//!
//! Each measured channel gets a fixed-frequency sinusoid fit and a phase
//! comparison against the action command:
//!
//! * state and pose integrate the rate command, so their raw signals are
//!   compared against the analytic time-integral of the action fit, which
//!   keeps every comparison on the action's phase without differentiating
//!   noisy measurements;
//! * the optical-flow motion signal is a speed magnitude and therefore
//!   rectified; its square is a single harmonic at twice the excitation
//!   frequency, so it is fitted at `2f` against the squared action command.
//!
//! Offsets are first estimated relative to the action channel, then
//! re-based to the frame (video) channel, whose own offset is zero by
//! definition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{motion_signal, select_keypoints, Keypoint};
use crate::geom::Vec3;
use crate::sim::StreamBundle;
use crate::sync::sinusoid::{fit_sinusoid, phase_offset, SinusoidFit};
use crate::types::Modality;

/// Constant per-channel time offsets relative to the frame (video) channel.
///
/// `offset_ms` is the amount a channel *leads* the reference: alignment
/// reads the channel at `grid_time - offset`. The frame channel's offset is
/// zero by definition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetCalibration {
    pub reference: CalibrationReference,
    pub offsets_ms: ChannelOffsetsMs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationReference {
    Frame,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelOffsetsMs {
    pub action: f64,
    pub state: f64,
    pub pose: f64,
}

impl OffsetCalibration {
    /// Calibration in which every channel already shares the frame clock.
    pub fn zero() -> Self {
        OffsetCalibration {
            reference: CalibrationReference::Frame,
            offsets_ms: ChannelOffsetsMs {
                action: 0.0,
                state: 0.0,
                pose: 0.0,
            },
        }
    }

    /// Builds the calibration from per-channel acquisition lags measured
    /// relative to the action command (positive = the channel arrives
    /// later than the action).
    pub fn from_lags_behind_action_ms(state: f64, pose: f64, frame: f64) -> Self {
        OffsetCalibration {
            reference: CalibrationReference::Frame,
            offsets_ms: ChannelOffsetsMs {
                action: frame,
                state: frame - state,
                pose: frame - pose,
            },
        }
    }

    pub fn offset_ms(&self, m: Modality) -> f64 {
        match m {
            Modality::Action => self.offsets_ms.action,
            Modality::State => self.offsets_ms.state,
            Modality::Pose => self.offsets_ms.pose,
            Modality::Frame => 0.0,
        }
    }

    /// Acquisition lag of a channel behind the action command, recovered
    /// from the frame-referenced offsets.
    pub fn lag_behind_action_ms(&self, m: Modality) -> f64 {
        self.offsets_ms.action - self.offset_ms(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterizeOptions {
    pub flow_window: usize,
    pub keypoint_count: usize,
}

impl Default for CharacterizeOptions {
    fn default() -> Self {
        CharacterizeOptions {
            flow_window: crate::flow::DEFAULT_WINDOW,
            keypoint_count: crate::flow::DEFAULT_KEYPOINT_COUNT,
        }
    }
}

/// First principal axis (largest-variance direction) of a 3-D point cloud,
/// found by power iteration on the covariance with a deterministic start.
pub fn principal_axis(points: &[Vec3]) -> Result<Vec3> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "principal axis needs at least 2 points".into(),
        ));
    }
    let n = points.len() as f64;
    let mean = points
        .iter()
        .fold(Vec3::ZERO, |acc, p| acc.add(*p))
        .scale(1.0 / n);
    let mut c = [[0.0f64; 3]; 3];
    for p in points {
        let d = p.sub(mean);
        let v = [d.x, d.y, d.z];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] += v[i] * v[j];
            }
        }
    }
    let diag = [c[0][0], c[1][1], c[2][2]];
    let start = (0..3)
        .max_by(|&a, &b| diag[a].total_cmp(&diag[b]))
        .unwrap();
    let mut v = [0.0f64; 3];
    v[start] = 1.0;
    for _ in 0..256 {
        let w = [
            c[0][0] * v[0] + c[0][1] * v[1] + c[0][2] * v[2],
            c[1][0] * v[0] + c[1][1] * v[1] + c[1][2] * v[2],
            c[2][0] * v[0] + c[2][1] * v[1] + c[2][2] * v[2],
        ];
        let norm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateFit(
                "point cloud has zero variance".into(),
            ));
        }
        let next = [w[0] / norm, w[1] / norm, w[2] / norm];
        let delta = (next[0] - v[0]).abs() + (next[1] - v[1]).abs() + (next[2] - v[2]).abs();
        v = next;
        if delta < 1e-14 {
            break;
        }
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn wrap_ms(dt_ms: f64, period_ms: f64) -> f64 {
    let mut x = dt_ms - period_ms * (dt_ms / period_ms).round();
    if x <= -period_ms / 2.0 {
        x += period_ms;
    }
    if x > period_ms / 2.0 {
        x -= period_ms;
    }
    x
}

fn fit_channel(samples: &[(f64, f64)], freq_hz: f64, what: &str) -> Result<SinusoidFit> {
    fit_sinusoid(samples, freq_hz).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::InvalidArgument(format!("{what}: {msg}")),
        Error::DegenerateFit(msg) => Error::DegenerateFit(format!("{what}: {msg}")),
        other => other,
    })
}

/// Estimates per-channel offsets from channels recorded under a single-axis
/// sinusoidal excitation at `freq_hz`, re-based to the frame channel.
pub fn characterize_latency(bundle: &StreamBundle, freq_hz: f64) -> Result<OffsetCalibration> {
    characterize_latency_with(bundle, freq_hz, &CharacterizeOptions::default())
}

pub fn characterize_latency_with(
    bundle: &StreamBundle,
    freq_hz: f64,
    opts: &CharacterizeOptions,
) -> Result<OffsetCalibration> {
    for (name, empty) in [
        ("action", bundle.action.is_empty()),
        ("state", bundle.state.is_empty()),
        ("pose", bundle.pose.is_empty()),
        ("frame", bundle.frame.is_empty()),
    ] {
        if empty {
            return Err(Error::InvalidArgument(format!("{name} channel is empty")));
        }
    }

    // (i) Action reference: fit each commandable axis, keep the strongest.
    let action_axis_samples = |axis: usize| -> Vec<(f64, f64)> {
        bundle
            .action
            .samples
            .iter()
            .map(|s| (s.t.as_secs_f64(), s.axes()[axis]))
            .collect()
    };
    let mut action_fit: Option<(usize, SinusoidFit)> = None;
    for axis in 0..3 {
        let fit = fit_channel(&action_axis_samples(axis), freq_hz, "action")?;
        if action_fit
            .as_ref()
            .map(|(_, best)| fit.amplitude() > best.amplitude())
            .unwrap_or(true)
        {
            action_fit = Some((axis, fit));
        }
    }
    let (active_axis, action_fit) = action_fit.expect("three axes fitted");
    let integrated_ref = action_fit.integral();

    // (ii) State: the excited axis integrates the command, so compare its
    // raw fit against the integrated action reference.
    let state_samples: Vec<(f64, f64)> = bundle
        .state
        .samples
        .iter()
        .map(|s| (s.t.as_secs_f64(), s.axes()[active_axis]))
        .collect();
    let state_fit = fit_channel(&state_samples, freq_hz, "state")?;
    let state_lag_ms = phase_offset(&integrated_ref, &state_fit)?;

    // (iii) Pose: displacement projected on the principal motion axis. The
    // projection sign is arbitrary, which shifts the phase by half a
    // period; resolve the ambiguity toward the smaller offset.
    let positions: Vec<Vec3> = bundle.pose.samples.iter().map(|p| p.position).collect();
    let axis = principal_axis(&positions)?;
    let pose_samples: Vec<(f64, f64)> = bundle
        .pose
        .samples
        .iter()
        .map(|p| (p.t.as_secs_f64(), axis.dot(p.position)))
        .collect();
    let pose_fit = fit_channel(&pose_samples, freq_hz, "pose")?;
    let pose_raw_ms = phase_offset(&integrated_ref, &pose_fit)?;
    let period_ms = 1e3 / freq_hz;
    let pose_flipped_ms = wrap_ms(pose_raw_ms + period_ms / 2.0, period_ms);
    let pose_lag_ms = if pose_flipped_ms.abs() < pose_raw_ms.abs() {
        pose_flipped_ms
    } else {
        pose_raw_ms
    };

    // (iv) Frames: squared motion magnitude against the squared command,
    // both fitted at twice the excitation frequency.
    let keypoints: Vec<Keypoint> =
        select_keypoints(&bundle.frame.samples[0], opts.keypoint_count, opts.flow_window)?;
    let motion = motion_signal(&bundle.frame, &keypoints, opts.flow_window)?;
    let motion_sq: Vec<(f64, f64)> = motion
        .t_mid_s
        .iter()
        .zip(motion.values.iter())
        .map(|(&t, &v)| (t, v * v))
        .collect();
    let motion_fit = fit_channel(&motion_sq, 2.0 * freq_hz, "flow motion")?;
    let action_sq: Vec<(f64, f64)> = bundle
        .action
        .samples
        .iter()
        .map(|s| {
            let v = s.axes()[active_axis];
            (s.t.as_secs_f64(), v * v)
        })
        .collect();
    let action_sq_fit = fit_channel(&action_sq, 2.0 * freq_hz, "squared action")?;
    let frame_lag_ms = phase_offset(&action_sq_fit, &motion_fit)?;

    Ok(OffsetCalibration::from_lags_behind_action_ms(
        state_lag_ms,
        pose_lag_ms,
        frame_lag_ms,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{
        emit_streams, sinusoid_profile, Axis, ScopeConfig, SimConfig, TransmissionConfig,
    };

    fn excitation_cfg(seed: u64) -> SimConfig {
        let mut cfg = SimConfig {
            transmission: TransmissionConfig::fast_actuation(),
            scope: ScopeConfig {
                frame_width: 160,
                frame_height: 120,
                ..ScopeConfig::default()
            },
            ..SimConfig::default()
        };
        cfg.latency.seed = seed;
        cfg
    }

    #[test]
    fn zero_latency_characterization_is_near_zero() {
        let profile = sinusoid_profile(0.2, 0.5, Axis::BendX).unwrap();
        let cfg = excitation_cfg(1);
        let bundle = emit_streams(&profile, 60.0, &cfg).unwrap();
        let cal = characterize_latency(&bundle, 0.2).unwrap();
        for m in [Modality::Action, Modality::State, Modality::Pose, Modality::Frame] {
            let lag = cal.lag_behind_action_ms(m) - cal.lag_behind_action_ms(Modality::Action);
            assert!(lag.abs() < 5.0, "{m} lag {lag} ms");
        }
        assert_eq!(cal.offset_ms(Modality::Frame), 0.0);
    }

    #[test]
    fn injected_latencies_recovered_noise_free() {
        let profile = sinusoid_profile(0.2, 0.5, Axis::BendX).unwrap();
        let mut cfg = excitation_cfg(7);
        cfg.latency.latency_ms.state = 102.0;
        cfg.latency.latency_ms.pose = 435.0;
        cfg.latency.latency_ms.frame = 412.0;
        let bundle = emit_streams(&profile, 60.0, &cfg).unwrap();
        let cal = characterize_latency(&bundle, 0.2).unwrap();
        let s = cal.lag_behind_action_ms(Modality::State);
        let p = cal.lag_behind_action_ms(Modality::Pose);
        let f = cal.lag_behind_action_ms(Modality::Frame);
        assert!((s - 102.0).abs() < 10.0, "state {s}");
        assert!((p - 435.0).abs() < 10.0, "pose {p}");
        assert!((f - 412.0).abs() < 10.0, "frame {f}");
        // Frame-referenced offsets re-base those lags.
        assert!((cal.offsets_ms.action - f).abs() < 1e-9);
        assert!((cal.offsets_ms.state - (f - s)).abs() < 1e-9);
        assert!((cal.offsets_ms.pose - (f - p)).abs() < 1e-9);
    }

    #[test]
    fn excited_axis_is_autodetected() {
        let profile = sinusoid_profile(0.2, 0.5, Axis::BendY).unwrap();
        let mut cfg = excitation_cfg(3);
        cfg.latency.latency_ms.state = 150.0;
        let bundle = emit_streams(&profile, 30.0, &cfg).unwrap();
        let cal = characterize_latency(&bundle, 0.2).unwrap();
        let s = cal.lag_behind_action_ms(Modality::State);
        assert!((s - 150.0).abs() < 10.0, "state {s}");
    }

    #[test]
    fn principal_axis_recovers_dominant_direction() {
        let dir = Vec3::new(3.0, -1.0, 0.5).normalized().unwrap();
        let points: Vec<Vec3> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.05;
                dir.scale(t.sin()).add(Vec3::new(0.0, 0.001 * t.cos(), 0.0))
            })
            .collect();
        let axis = principal_axis(&points).unwrap();
        assert!(axis.dot(dir).abs() > 0.999, "axis {axis:?}");
    }

    #[test]
    fn principal_axis_zero_variance_is_degenerate() {
        let points = vec![Vec3::new(1.0, 2.0, 3.0); 10];
        assert!(matches!(
            principal_axis(&points),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn calibration_round_trips_through_json() {
        let cal = OffsetCalibration::from_lags_behind_action_ms(102.0, 435.0, 412.0);
        let text = serde_json::to_string(&cal).unwrap();
        let back: OffsetCalibration = serde_json::from_str(&text).unwrap();
        assert_eq!(cal, back);
        assert!(text.contains("\"reference\":\"frame\""));
    }
}
