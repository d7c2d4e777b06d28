//! Asynchronous multi-channel stream emission.
//!
//! The ground-truth trajectory is integrated once on a fine master grid;
//! each channel then samples it on its own nominal grid, delayed by its
//! configured latency. A sample stamped `t` carries the ground truth at
//! `t - latency`, which is how a delayed acquisition pipeline presents
//! data under a shared system clock. Timestamps are then perturbed by
//! clamped Gaussian jitter and samples thinned by dropout, all driven by
//! per-channel seeded RNG streams.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::sim::{
    render_frame, step, tip_pose, CommandProfile, ScopeState, SimConfig,
};
use crate::types::{ActionSample, Channel, FrameSample, PoseSample, StateSample, Timestamp};

/// The four emitted channels of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamBundle {
    pub action: Channel<ActionSample>,
    pub state: Channel<StateSample>,
    pub pose: Channel<PoseSample>,
    pub frame: Channel<FrameSample>,
}

/// Ground-truth joint trajectory tabulated on the master grid.
struct Truth {
    dt: f64,
    duration: f64,
    bend_x: Vec<f64>,
    bend_y: Vec<f64>,
    feed: Vec<f64>,
    // Compliance-filtered copies driving the pose channel (aliases the
    // motor trajectory when the filter is disabled).
    tip_bend_x: Vec<f64>,
    tip_bend_y: Vec<f64>,
    tip_feed: Vec<f64>,
}

impl Truth {
    fn sample(series: &[f64], dt: f64, t: f64) -> f64 {
        let pos = (t / dt).clamp(0.0, (series.len() - 1) as f64);
        let i = pos.floor() as usize;
        if i + 1 >= series.len() {
            return series[series.len() - 1];
        }
        let u = pos - i as f64;
        series[i] + (series[i + 1] - series[i]) * u
    }

    fn motor_state(&self, t: Timestamp) -> ScopeState {
        let secs = t.as_secs_f64();
        ScopeState {
            t,
            bend_x_deg: Self::sample(&self.bend_x, self.dt, secs),
            bend_y_deg: Self::sample(&self.bend_y, self.dt, secs),
            feed_deg: Self::sample(&self.feed, self.dt, secs),
        }
    }

    fn tip_state(&self, t: Timestamp) -> ScopeState {
        let secs = t.as_secs_f64();
        ScopeState {
            t,
            bend_x_deg: Self::sample(&self.tip_bend_x, self.dt, secs),
            bend_y_deg: Self::sample(&self.tip_bend_y, self.dt, secs),
            feed_deg: Self::sample(&self.tip_feed, self.dt, secs),
        }
    }
}

fn integrate_truth(profile: &CommandProfile, duration_s: f64, cfg: &SimConfig) -> Result<Truth> {
    let dt = cfg.sim_step_s;
    let n = (duration_s / dt).ceil() as usize;
    let mut bend_x = Vec::with_capacity(n + 1);
    let mut bend_y = Vec::with_capacity(n + 1);
    let mut feed = Vec::with_capacity(n + 1);

    let mut state = ScopeState::at_rest(Timestamp::from_nanos(0)?);
    bend_x.push(0.0);
    bend_y.push(0.0);
    feed.push(0.0);

    for k in 0..n {
        // Evaluate the command at the interval midpoint; centering the
        // rectangle rule removes the half-step phase bias of a left-edge
        // Euler sweep.
        let t_mid = (k as f64 + 0.5) * dt;
        let cmd = profile.eval(t_mid);
        let action = ActionSample::new(
            state.t,
            cmd.bend_x.clamp(-1.0, 1.0),
            cmd.bend_y.clamp(-1.0, 1.0),
            cmd.insertion.clamp(-1.0, 1.0),
            cmd.home,
        )?;
        state = step(&state, &action, dt, &cfg.transmission, &cfg.scope)?;
        bend_x.push(state.bend_x_deg);
        bend_y.push(state.bend_y_deg);
        feed.push(state.feed_deg);
    }

    let (tip_bend_x, tip_bend_y, tip_feed) = if cfg.scope.compliance_tau_s > 0.0 {
        let alpha = dt / (cfg.scope.compliance_tau_s + dt);
        let filter = |src: &[f64]| {
            let mut out = Vec::with_capacity(src.len());
            let mut y = src[0];
            out.push(y);
            for &x in &src[1..] {
                y += alpha * (x - y);
                out.push(y);
            }
            out
        };
        (filter(&bend_x), filter(&bend_y), filter(&feed))
    } else {
        (bend_x.clone(), bend_y.clone(), feed.clone())
    };

    Ok(Truth {
        dt,
        duration: duration_s,
        bend_x,
        bend_y,
        feed,
        tip_bend_x,
        tip_bend_y,
        tip_feed,
    })
}

/// Sampling clock of one channel: nominal grid stamps delayed by the
/// channel latency, jittered, and thinned by dropout.
struct ChannelClock {
    rng: ChaCha12Rng,
    jitter: Normal<f64>,
    jitter_std_s: f64,
    dropout: f64,
    prev_stamp_ns: i64,
}

impl ChannelClock {
    fn new(seed: u64, stream: u64, jitter_std_ms: f64, dropout: f64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        ChannelClock {
            rng,
            jitter: Normal::new(0.0, 1.0).expect("unit normal"),
            jitter_std_s: jitter_std_ms * 1e-3,
            dropout,
            prev_stamp_ns: -1,
        }
    }

    /// Returns the jittered stamp for nominal time `t`, or None when the
    /// sample is dropped. Jitter is clamped to three sigma and stamps are
    /// forced strictly increasing.
    fn stamp(&mut self, t_nominal_s: f64) -> Option<Timestamp> {
        let j_raw: f64 = self.jitter.sample(&mut self.rng) * self.jitter_std_s;
        let bound = 3.0 * self.jitter_std_s;
        let jitter = j_raw.clamp(-bound, bound);
        let dropped = self.rng.gen::<f64>() < self.dropout;
        if dropped {
            return None;
        }
        let mut ns = ((t_nominal_s + jitter) * 1e9).round().max(0.0) as i64;
        if ns <= self.prev_stamp_ns {
            ns = self.prev_stamp_ns + 1;
        }
        self.prev_stamp_ns = ns;
        Some(Timestamp::from_nanos(ns).expect("clamped non-negative"))
    }
}

/// Nominal sample times of one channel: grid points `k / rate` that can see
/// ground truth, i.e. those at or after the channel latency.
fn channel_grid(rate_hz: f64, latency_s: f64, duration_s: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = (latency_s * rate_hz - 1e-9).ceil().max(0.0) as u64;
    loop {
        let t = k as f64 / rate_hz;
        if t >= duration_s - 1e-12 {
            break;
        }
        out.push(t);
        k += 1;
    }
    out
}

fn quantize(value: f64, stepsize: f64) -> f64 {
    (value / stepsize).round() * stepsize
}

/// Emits the four channels for `profile` over `duration_s` seconds.
///
/// Identical `(profile, cfg)` pairs produce bit-identical bundles. Errors
/// when any channel latency meets or exceeds the duration, since such a
/// channel could never emit a sample.
pub fn emit_streams(
    profile: &CommandProfile,
    duration_s: f64,
    cfg: &SimConfig,
) -> Result<StreamBundle> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration must be strictly positive, got {duration_s}"
        )));
    }
    cfg.validate()?;
    let lat = &cfg.latency.latency_ms;
    if lat.max() * 1e-3 >= duration_s {
        return Err(Error::InvalidArgument(format!(
            "latency {} ms exceeds the {duration_s} s duration",
            lat.max()
        )));
    }

    let truth = integrate_truth(profile, duration_s, cfg)?;
    let quant = cfg.transmission.quantization();
    let seed = cfg.latency.seed;
    let jit = cfg.latency.jitter_std_ms;
    let drop = cfg.latency.dropout_prob;

    // Action channel: the commanded profile on its native grid.
    let mut clock = ChannelClock::new(seed, 0, jit, drop);
    let delay = lat.action * 1e-3;
    let mut action_samples = Vec::new();
    for t in channel_grid(cfg.rates.action_hz, delay, truth.duration) {
        if let Some(stamp) = clock.stamp(t) {
            let cmd = profile.eval(t - delay);
            action_samples.push(ActionSample::new(
                stamp,
                cmd.bend_x.clamp(-1.0, 1.0),
                cmd.bend_y.clamp(-1.0, 1.0),
                cmd.insertion.clamp(-1.0, 1.0),
                cmd.home,
            )?);
        }
    }

    // State channel: encoder-quantized output-shaft readings.
    let mut clock = ChannelClock::new(seed, 1, jit, drop);
    let delay = lat.state * 1e-3;
    let mut state_samples = Vec::new();
    for t in channel_grid(cfg.rates.state_hz, delay, truth.duration) {
        if let Some(stamp) = clock.stamp(t) {
            let s = truth.motor_state(Timestamp::from_secs_f64_clamped(t - delay));
            state_samples.push(StateSample::new(
                stamp,
                quantize(s.bend_x_deg, quant.bend_step_deg),
                quantize(s.bend_y_deg, quant.bend_step_deg),
                quantize(s.feed_deg, quant.feed_step_deg),
            )?);
        }
    }

    // Pose channel: constant-curvature tip pose plus position noise.
    let mut clock = ChannelClock::new(seed, 2, jit, drop);
    let mut noise_rng = ChaCha12Rng::seed_from_u64(seed);
    noise_rng.set_stream(4);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let sigma = cfg.latency.pose_noise_std_m;
    let delay = lat.pose * 1e-3;
    let mut pose_samples = Vec::new();
    for t in channel_grid(cfg.rates.pose_hz, delay, truth.duration) {
        let stamp = clock.stamp(t);
        let noise = Vec3::new(
            normal.sample(&mut noise_rng) * sigma,
            normal.sample(&mut noise_rng) * sigma,
            normal.sample(&mut noise_rng) * sigma,
        );
        if let Some(stamp) = stamp {
            let s = truth.tip_state(Timestamp::from_secs_f64_clamped(t - delay));
            let clean = tip_pose(&ScopeState { t: stamp, ..s }, &cfg.scope);
            pose_samples.push(PoseSample::new(
                stamp,
                clean.position.add(noise),
                clean.orientation,
            )?);
        }
    }

    // Frame channel: rendered views of the motor state.
    let mut clock = ChannelClock::new(seed, 3, jit, drop);
    let delay = lat.frame * 1e-3;
    let mut frame_samples = Vec::new();
    for t in channel_grid(cfg.rates.frame_hz, delay, truth.duration) {
        if let Some(stamp) = clock.stamp(t) {
            let s = truth.motor_state(Timestamp::from_secs_f64_clamped(t - delay));
            let f = render_frame(&ScopeState { t: stamp, ..s }, &cfg.scope);
            frame_samples.push(f);
        }
    }

    Ok(StreamBundle {
        action: Channel::new(cfg.rates.action_hz, action_samples),
        state: Channel::new(cfg.rates.state_hz, state_samples).with_quantization(quant),
        pose: Channel::new(cfg.rates.pose_hz, pose_samples),
        frame: Channel::new(cfg.rates.frame_hz, frame_samples),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{sinusoid_profile, Axis, TransmissionConfig};
    use crate::types::{validate_channel, StateQuantization};

    fn small_cfg(seed: u64) -> SimConfig {
        let mut cfg = SimConfig {
            transmission: TransmissionConfig::fast_actuation(),
            ..SimConfig::default()
        };
        cfg.latency.seed = seed;
        // Small frames keep unit tests quick.
        cfg.scope.frame_width = 32;
        cfg.scope.frame_height = 24;
        cfg
    }

    #[test]
    fn zero_action_profile_emits_constant_streams() {
        let profile = CommandProfile::from_knots(vec![
            crate::sim::ProfileKnot {
                t_s: 0.0,
                bend_x: 0.0,
                bend_y: 0.0,
                insertion: 0.0,
                home: false,
            },
        ])
        .unwrap();
        let cfg = small_cfg(1);
        let b = emit_streams(&profile, 2.0, &cfg).unwrap();
        assert!(b.state.samples.iter().all(|s| s.bend_x_deg == 0.0
            && s.bend_y_deg == 0.0
            && s.insertion_deg == 0.0));
        let p0 = b.pose.samples[0];
        assert!(b
            .pose
            .samples
            .iter()
            .all(|p| p.position == p0.position && p.orientation == p0.orientation));
        let f0 = &b.frame.samples[0];
        assert!(b.frame.samples.iter().all(|f| f.pixels == f0.pixels));
    }

    #[test]
    fn emitted_channels_validate_and_count() {
        let profile = sinusoid_profile(0.2, 0.5, Axis::BendX).unwrap();
        let cfg = small_cfg(7);
        let b = emit_streams(&profile, 60.0, &cfg).unwrap();
        assert_eq!(b.state.samples.len(), 3000);
        assert_eq!(b.action.samples.len(), 3000);
        assert_eq!(b.pose.samples.len(), 2400);
        assert_eq!(b.frame.samples.len(), 1800);
        assert!(validate_channel(&b.action).is_valid());
        assert!(validate_channel(&b.state).is_valid());
        assert!(validate_channel(&b.pose).is_valid());
        assert!(validate_channel(&b.frame).is_valid());
    }

    #[test]
    fn identical_seeds_give_bit_identical_output() {
        let profile = sinusoid_profile(0.2, 0.5, Axis::BendX).unwrap();
        let mut cfg = small_cfg(99);
        cfg.latency.jitter_std_ms = 2.0;
        cfg.latency.pose_noise_std_m = 1e-3;
        cfg.latency.dropout_prob = 0.05;
        let a = emit_streams(&profile, 5.0, &cfg).unwrap();
        let b = emit_streams(&profile, 5.0, &cfg).unwrap();
        assert_eq!(a, b);
        let mut cfg2 = cfg;
        cfg2.latency.seed = 100;
        let c = emit_streams(&profile, 5.0, &cfg2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn latency_exceeding_duration_is_an_error() {
        let profile = sinusoid_profile(0.2, 0.5, Axis::BendX).unwrap();
        let mut cfg = small_cfg(3);
        cfg.latency.latency_ms.pose = 3000.0;
        assert!(emit_streams(&profile, 2.0, &cfg).is_err());
    }

    #[test]
    fn state_values_are_quantized_multiples() {
        let profile = sinusoid_profile(0.2, 0.5, Axis::BendX).unwrap();
        let cfg = small_cfg(11);
        let b = emit_streams(&profile, 10.0, &cfg).unwrap();
        let q = cfg.transmission.quantization();
        for s in &b.state.samples {
            assert!(StateQuantization::is_multiple(s.bend_x_deg, q.bend_step_deg));
            assert!(StateQuantization::is_multiple(s.bend_y_deg, q.bend_step_deg));
            assert!(StateQuantization::is_multiple(s.insertion_deg, q.feed_step_deg));
        }
    }

    #[test]
    fn dropout_count_within_binomial_bounds() {
        let profile = sinusoid_profile(0.2, 0.5, Axis::BendX).unwrap();
        let mut cfg = small_cfg(21);
        // Frames are the slow part; shrink them further for this long run.
        cfg.scope.frame_width = 8;
        cfg.scope.frame_height = 8;
        cfg.latency.dropout_prob = 0.1;
        let b = emit_streams(&profile, 60.0, &cfg).unwrap();
        // Binomial(3000, 0.9): mean 2700, sigma ~16.4; assert three sigma.
        let n = b.state.samples.len() as f64;
        assert!((n - 2700.0).abs() <= 3.0 * 16.5, "state count {n}");
    }

    #[test]
    fn jitter_never_reorders_samples() {
        let profile = sinusoid_profile(0.2, 0.5, Axis::BendX).unwrap();
        let mut cfg = small_cfg(5);
        cfg.latency.jitter_std_ms = 2.0;
        let b = emit_streams(&profile, 10.0, &cfg).unwrap();
        assert!(validate_channel(&b.action).is_valid());
        assert!(validate_channel(&b.state).is_valid());
    }

    #[test]
    fn delayed_channel_starts_at_its_latency() {
        let profile = sinusoid_profile(0.2, 0.5, Axis::BendX).unwrap();
        let mut cfg = small_cfg(2);
        cfg.latency.latency_ms.state = 102.0;
        let b = emit_streams(&profile, 5.0, &cfg).unwrap();
        let first = b.state.samples[0].t.as_secs_f64();
        assert!(first >= 0.102 - 1e-9, "first state stamp {first}");
        // 50 Hz grid: first stamp is the first grid point at/after 102 ms.
        assert!((first - 0.12).abs() < 1e-9);
    }
}
