//! Command profiles: analytic sinusoid excitation, teleoperation-like
//! band-noise, and piecewise-linear knot tables loadable from JSON.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    BendX,
    BendY,
    Insertion,
}

/// One knot of a tabulated profile. Continuous axes are linearly
/// interpolated between knots; the home flag holds until the next knot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileKnot {
    pub t_s: f64,
    pub bend_x: f64,
    pub bend_y: f64,
    pub insertion: f64,
    #[serde(default)]
    pub home: bool,
}

/// Deterministic command source evaluated at arbitrary times.
#[derive(Debug, Clone, PartialEq)]
pub enum CommandProfile {
    Sinusoid {
        freq_hz: f64,
        amplitude: f64,
        axis: Axis,
    },
    Knots(Vec<ProfileKnot>),
}

/// Values of the four command components at one instant, before being
/// wrapped into an `ActionSample`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandValue {
    pub bend_x: f64,
    pub bend_y: f64,
    pub insertion: f64,
    pub home: bool,
}

impl CommandProfile {
    pub fn eval(&self, t_s: f64) -> CommandValue {
        match self {
            CommandProfile::Sinusoid {
                freq_hz,
                amplitude,
                axis,
            } => {
                let v = amplitude * (2.0 * std::f64::consts::PI * freq_hz * t_s).sin();
                let mut cmd = CommandValue {
                    bend_x: 0.0,
                    bend_y: 0.0,
                    insertion: 0.0,
                    home: false,
                };
                match axis {
                    Axis::BendX => cmd.bend_x = v,
                    Axis::BendY => cmd.bend_y = v,
                    Axis::Insertion => cmd.insertion = v,
                }
                cmd
            }
            CommandProfile::Knots(knots) => eval_knots(knots, t_s),
        }
    }

    /// Loads a knot table from a JSON array of
    /// `{t_s, bend_x, bend_y, insertion, home}` objects.
    pub fn from_json_file(path: &Path) -> Result<CommandProfile> {
        let text = std::fs::read_to_string(path)?;
        let knots: Vec<ProfileKnot> = serde_json::from_str(&text)?;
        Self::from_knots(knots)
    }

    pub fn from_knots(knots: Vec<ProfileKnot>) -> Result<CommandProfile> {
        if knots.is_empty() {
            return Err(Error::InvalidArgument("profile has no knots".into()));
        }
        for w in knots.windows(2) {
            if w[1].t_s <= w[0].t_s {
                return Err(Error::InvalidArgument(
                    "profile knot times must be strictly increasing".into(),
                ));
            }
        }
        for k in &knots {
            for v in [k.bend_x, k.bend_y, k.insertion] {
                if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!(
                        "profile value {v} at t={} outside [-1, 1]",
                        k.t_s
                    )));
                }
            }
        }
        Ok(CommandProfile::Knots(knots))
    }
}

fn eval_knots(knots: &[ProfileKnot], t_s: f64) -> CommandValue {
    let first = &knots[0];
    let last = knots.last().unwrap();
    if t_s <= first.t_s {
        return knot_value(first);
    }
    if t_s >= last.t_s {
        return knot_value(last);
    }
    // partition_point: first knot with t > t_s; its predecessor brackets.
    let hi = knots.partition_point(|k| k.t_s <= t_s);
    let a = &knots[hi - 1];
    let b = &knots[hi];
    let u = (t_s - a.t_s) / (b.t_s - a.t_s);
    CommandValue {
        bend_x: a.bend_x + (b.bend_x - a.bend_x) * u,
        bend_y: a.bend_y + (b.bend_y - a.bend_y) * u,
        insertion: a.insertion + (b.insertion - a.insertion) * u,
        home: a.home,
    }
}

fn knot_value(k: &ProfileKnot) -> CommandValue {
    CommandValue {
        bend_x: k.bend_x,
        bend_y: k.bend_y,
        insertion: k.insertion,
        home: k.home,
    }
}

/// Single-axis sinusoidal excitation `amplitude * sin(2*pi*freq*t)`.
pub fn sinusoid_profile(freq_hz: f64, amplitude: f64, axis: Axis) -> Result<CommandProfile> {
    if !(freq_hz.is_finite() && freq_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "frequency must be strictly positive, got {freq_hz}"
        )));
    }
    if !amplitude.is_finite() || amplitude.abs() > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "amplitude must lie in [-1, 1], got {amplitude}"
        )));
    }
    Ok(CommandProfile::Sinusoid {
        freq_hz,
        amplitude,
        axis,
    })
}

/// Teleoperation-like profile: per-axis band-limited carrier multiplied by
/// a bursty positive envelope, tabulated at 50 Hz. The envelope gives the
/// action and state speed signals common amplitude modulation, which is what
/// residual-lag analysis keys on; a pure sinusoid has no such structure.
pub fn teleop_profile(seed: u64, duration_s: f64) -> Result<CommandProfile> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::InvalidArgument(
            "profile duration must be strictly positive".into(),
        ));
    }
    const RATE: f64 = 50.0;
    let n = (duration_s * RATE).ceil() as usize + 1;
    let dt = 1.0 / RATE;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut knots = Vec::with_capacity(n);

    // One-pole low-pass coefficients.
    let alpha = |fc: f64| 1.0 - (-2.0 * std::f64::consts::PI * fc * dt).exp();
    let a_env = alpha(2.5);
    let a_carrier = alpha(8.0);

    let gains = [0.8, 0.6, 0.4]; // bend_x, bend_y, insertion
    let mut env = [0.0f64; 3];
    let mut carrier = [0.0f64; 3];
    let mut raw = vec![[0.0f64; 3]; n];
    let mut peak = [0.0f64; 3];

    for row in raw.iter_mut() {
        for ax in 0..3 {
            let we: f64 = rng.gen_range(-1.0..1.0);
            let wc: f64 = rng.gen_range(-1.0..1.0);
            env[ax] += a_env * (we - env[ax]);
            carrier[ax] += a_carrier * (wc - carrier[ax]);
            // Rectified envelope: quiet stretches alternate with bursts.
            row[ax] = env[ax].max(0.0) * carrier[ax];
            peak[ax] = peak[ax].max(row[ax].abs());
        }
    }

    for (i, row) in raw.iter().enumerate() {
        let mut v = [0.0f64; 3];
        for ax in 0..3 {
            if peak[ax] > 0.0 {
                v[ax] = (gains[ax] * row[ax] / peak[ax]).clamp(-1.0, 1.0);
            }
        }
        knots.push(ProfileKnot {
            t_s: i as f64 * dt,
            bend_x: v[0],
            bend_y: v[1],
            insertion: v[2],
            home: false,
        });
    }

    CommandProfile::from_knots(knots)
}
