//! Single-level Lucas-Kanade optical flow on grayscale frames and the
//! keypoint-averaged motion-magnitude signal used as the video-derived
//! modality during latency characterization.
//!
//! Flow solves the classic 2x2 least-squares system from central-difference
//! spatial gradients and the temporal difference over a square window. The
//! gradient tensor is built once on the first frame; the temporal residual
//! is re-evaluated at the warped position for a few Gauss-Newton updates,
//! which removes the first-order bias that a single solve leaves on
//! displacements beyond a fraction of a pixel. A point is valid only when
//! the structure tensor's smaller eigenvalue clears a threshold relative to
//! the strongest gradient in the window, so texture amplitude does not
//! change validity.

use crate::error::{Error, Result};
use crate::types::{Channel, FrameSample};

pub const DEFAULT_WINDOW: usize = 15;
pub const DEFAULT_KEYPOINT_COUNT: usize = 5;

/// Relative conditioning gate: smaller eigenvalue of the structure tensor
/// must reach this fraction of `window_area * max_gradient^2`.
const CONDITIONING_RATIO: f64 = 1e-3;

const MAX_ITERATIONS: usize = 8;
const CONVERGENCE_PX: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowVector {
    pub dx: f64,
    pub dy: f64,
    pub valid: bool,
    /// Smaller eigenvalue of the windowed structure tensor.
    pub conditioning: f64,
}

impl FlowVector {
    fn invalid(conditioning: f64) -> Self {
        FlowVector {
            dx: 0.0,
            dy: 0.0,
            valid: false,
            conditioning,
        }
    }

    pub fn magnitude(&self) -> f64 {
        self.dx.hypot(self.dy)
    }
}

/// Bilinear sample with edge clamping.
fn sample(frame: &FrameSample, x: f64, y: f64) -> f64 {
    let w = frame.width as i64;
    let h = frame.height as i64;
    let x0 = x.floor() as i64;
    let y0 = y.floor() as i64;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let clamp = |v: i64, hi: i64| v.clamp(0, hi - 1) as u32;
    let p = |xi: i64, yi: i64| frame.get(clamp(xi, w), clamp(yi, h)) as f64;
    let top = p(x0, y0) * (1.0 - fx) + p(x0 + 1, y0) * fx;
    let bottom = p(x0, y0 + 1) * (1.0 - fx) + p(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

struct Tensor {
    gxx: f64,
    gxy: f64,
    gyy: f64,
    max_grad_sq: f64,
    /// Per-pixel gradients and template values, window row-major.
    gx: Vec<f64>,
    gy: Vec<f64>,
    template: Vec<f64>,
}

/// Gradient structure of the template window around a keypoint.
fn window_tensor(prev: &FrameSample, kp: &Keypoint, half: i64) -> Tensor {
    let n = ((2 * half + 1) * (2 * half + 1)) as usize;
    let mut t = Tensor {
        gxx: 0.0,
        gxy: 0.0,
        gyy: 0.0,
        max_grad_sq: 0.0,
        gx: Vec::with_capacity(n),
        gy: Vec::with_capacity(n),
        template: Vec::with_capacity(n),
    };
    for j in -half..=half {
        for i in -half..=half {
            let x = kp.x + i as f64;
            let y = kp.y + j as f64;
            let gx = (sample(prev, x + 1.0, y) - sample(prev, x - 1.0, y)) * 0.5;
            let gy = (sample(prev, x, y + 1.0) - sample(prev, x, y - 1.0)) * 0.5;
            t.gxx += gx * gx;
            t.gxy += gx * gy;
            t.gyy += gy * gy;
            t.max_grad_sq = t.max_grad_sq.max(gx * gx + gy * gy);
            t.gx.push(gx);
            t.gy.push(gy);
            t.template.push(sample(prev, x, y));
        }
    }
    t
}

fn min_eigenvalue(gxx: f64, gxy: f64, gyy: f64) -> f64 {
    let trace = gxx + gyy;
    let disc = ((gxx - gyy) * (gxx - gyy) + 4.0 * gxy * gxy).sqrt();
    (trace - disc) * 0.5
}

fn check_window(window: usize) -> Result<i64> {
    if window < 5 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "window must be odd and at least 5, got {window}"
        )));
    }
    Ok((window / 2) as i64)
}

fn inside_margin(frame: &FrameSample, kp: &Keypoint, half: i64) -> bool {
    // Central differences reach one pixel beyond the window.
    let m = (half + 1) as f64;
    kp.x >= m
        && kp.y >= m
        && kp.x <= frame.width as f64 - 1.0 - m
        && kp.y <= frame.height as f64 - 1.0 - m
}

/// Per-keypoint flow from `prev` to `next`. Keypoints without at least half
/// a window of margin, or with a weak structure tensor, come back invalid.
/// Results are order-stable with respect to the keypoint list.
pub fn lucas_kanade(
    prev: &FrameSample,
    next: &FrameSample,
    keypoints: &[Keypoint],
    window: usize,
) -> Result<Vec<FlowVector>> {
    if prev.width != next.width || prev.height != next.height {
        return Err(Error::InvalidArgument(format!(
            "frame dimensions differ: {}x{} vs {}x{}",
            prev.width, prev.height, next.width, next.height
        )));
    }
    let half = check_window(window)?;
    let area = (window * window) as f64;

    Ok(keypoints
        .iter()
        .map(|kp| {
            if !kp.x.is_finite() || !kp.y.is_finite() || !inside_margin(prev, kp, half) {
                return FlowVector::invalid(0.0);
            }
            let t = window_tensor(prev, kp, half);
            let lambda_min = min_eigenvalue(t.gxx, t.gxy, t.gyy);
            let threshold = CONDITIONING_RATIO * area * t.max_grad_sq;
            if t.max_grad_sq <= 0.0 || lambda_min < threshold {
                return FlowVector::invalid(lambda_min);
            }
            let det = t.gxx * t.gyy - t.gxy * t.gxy;
            if det <= 0.0 {
                return FlowVector::invalid(lambda_min);
            }

            let mut dx = 0.0;
            let mut dy = 0.0;
            for _ in 0..MAX_ITERATIONS {
                let mut bx = 0.0;
                let mut by = 0.0;
                let mut idx = 0;
                for j in -half..=half {
                    for i in -half..=half {
                        let warped =
                            sample(next, kp.x + i as f64 + dx, kp.y + j as f64 + dy);
                        let dt = warped - t.template[idx];
                        bx -= t.gx[idx] * dt;
                        by -= t.gy[idx] * dt;
                        idx += 1;
                    }
                }
                let delta_x = (t.gyy * bx - t.gxy * by) / det;
                let delta_y = (t.gxx * by - t.gxy * bx) / det;
                dx += delta_x;
                dy += delta_y;
                if delta_x.hypot(delta_y) < CONVERGENCE_PX {
                    break;
                }
            }
            FlowVector {
                dx,
                dy,
                valid: true,
                conditioning: lambda_min,
            }
        })
        .collect())
}

/// Picks the `count` best-conditioned points on a coarse grid of the frame,
/// a deterministic stand-in for hand-selected tracking targets.
pub fn select_keypoints(frame: &FrameSample, count: usize, window: usize) -> Result<Vec<Keypoint>> {
    let half = check_window(window)?;
    let margin = (half + 2) as u32;
    if frame.width <= 2 * margin || frame.height <= 2 * margin {
        return Err(Error::InvalidArgument(
            "frame too small for the requested window".into(),
        ));
    }
    let stride = (window as u32).max(8);
    let mut scored: Vec<(f64, Keypoint)> = Vec::new();
    let mut y = margin;
    while y < frame.height - margin {
        let mut x = margin;
        while x < frame.width - margin {
            let kp = Keypoint {
                x: x as f64,
                y: y as f64,
            };
            let t = window_tensor(frame, &kp, half);
            scored.push((min_eigenvalue(t.gxx, t.gxy, t.gyy), kp));
            x += stride;
        }
        y += stride;
    }
    // Highest conditioning first; grid order breaks exact ties.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(scored.into_iter().take(count).map(|(_, kp)| kp).collect())
}

/// Keypoint-averaged motion magnitude per consecutive frame pair.
///
/// Values are timestamped at the midpoint of their frame pair, since the
/// displacement measures the mean motion over the interval. Pairs where no
/// keypoint was valid are linearly interpolated from their neighbors and
/// flagged; more than half the pairs missing is a low-confidence error.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSignal {
    pub t_mid_s: Vec<f64>,
    pub values: Vec<f64>,
    pub interpolated: Vec<bool>,
    pub rate_hz: f64,
}

pub fn motion_signal(
    frames: &Channel<FrameSample>,
    keypoints: &[Keypoint],
    window: usize,
) -> Result<MotionSignal> {
    if frames.samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "motion signal needs at least 2 frames".into(),
        ));
    }
    if keypoints.is_empty() {
        return Err(Error::InvalidArgument(
            "motion signal needs at least 1 keypoint".into(),
        ));
    }
    let n_pairs = frames.samples.len() - 1;
    let mut t_mid_s = Vec::with_capacity(n_pairs);
    let mut raw: Vec<Option<f64>> = Vec::with_capacity(n_pairs);

    for w in frames.samples.windows(2) {
        let flows = lucas_kanade(&w[0], &w[1], keypoints, window)?;
        let valid: Vec<f64> = flows
            .iter()
            .filter(|f| f.valid)
            .map(|f| f.magnitude())
            .collect();
        raw.push(if valid.is_empty() {
            None
        } else {
            Some(valid.iter().sum::<f64>() / valid.len() as f64)
        });
        t_mid_s.push((w[0].t.as_secs_f64() + w[1].t.as_secs_f64()) * 0.5);
    }

    let missing = raw.iter().filter(|v| v.is_none()).count();
    if missing * 2 > n_pairs {
        return Err(Error::LowConfidence(format!(
            "{missing}/{n_pairs} frame pairs had no valid keypoint"
        )));
    }

    let interpolated: Vec<bool> = raw.iter().map(|v| v.is_none()).collect();
    let values = fill_gaps(&raw, &t_mid_s);

    Ok(MotionSignal {
        t_mid_s,
        values,
        interpolated,
        rate_hz: frames.nominal_rate_hz,
    })
}

/// Linear interpolation over missing entries; leading and trailing gaps
/// take the nearest defined value.
fn fill_gaps(raw: &[Option<f64>], t: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; raw.len()];
    let defined: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].is_some()).collect();
    for i in 0..raw.len() {
        if let Some(v) = raw[i] {
            out[i] = v;
            continue;
        }
        let next = defined.partition_point(|&d| d < i);
        let right = defined.get(next).copied();
        let left = next.checked_sub(1).map(|k| defined[k]);
        out[i] = match (left, right) {
            (Some(l), Some(r)) => {
                let u = (t[i] - t[l]) / (t[r] - t[l]);
                raw[l].unwrap() + (raw[r].unwrap() - raw[l].unwrap()) * u
            }
            (Some(l), None) => raw[l].unwrap(),
            (None, Some(r)) => raw[r].unwrap(),
            (None, None) => 0.0,
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{render_frame, ScopeConfig, ScopeState};
    use crate::types::Timestamp;

    fn ts(ms: f64) -> Timestamp {
        Timestamp::from_nanos((ms * 1e6).round() as i64).unwrap()
    }

    fn textured_frame(bend_x_deg: f64, bend_y_deg: f64, t_ms: f64) -> FrameSample {
        let cfg = ScopeConfig {
            frame_width: 160,
            frame_height: 120,
            px_per_deg: 1.0,
            ..ScopeConfig::default()
        };
        let state = ScopeState {
            t: ts(t_ms),
            bend_x_deg,
            bend_y_deg,
            feed_deg: 0.0,
        };
        render_frame(&state, &cfg)
    }

    #[test]
    fn identical_frames_give_exactly_zero_flow() {
        let f = textured_frame(0.0, 0.0, 0.0);
        let kps = select_keypoints(&f, 5, DEFAULT_WINDOW).unwrap();
        assert_eq!(kps.len(), 5);
        let flows = lucas_kanade(&f, &f, &kps, DEFAULT_WINDOW).unwrap();
        for fl in flows {
            assert!(fl.valid);
            assert_eq!((fl.dx, fl.dy), (0.0, 0.0));
        }
    }

    #[test]
    fn unit_translation_recovered() {
        let a = textured_frame(0.0, 0.0, 0.0);
        let b = textured_frame(1.0, 0.0, 33.0); // exactly 1 px in x
        let kps = select_keypoints(&a, 5, DEFAULT_WINDOW).unwrap();
        let flows = lucas_kanade(&a, &b, &kps, DEFAULT_WINDOW).unwrap();
        let valid: Vec<&FlowVector> = flows.iter().filter(|f| f.valid).collect();
        assert!(!valid.is_empty());
        let mean_dx: f64 = valid.iter().map(|f| f.dx).sum::<f64>() / valid.len() as f64;
        let mean_dy: f64 = valid.iter().map(|f| f.dy).sum::<f64>() / valid.len() as f64;
        assert!((0.75..=1.25).contains(&mean_dx), "mean dx {mean_dx}");
        assert!((-0.25..=0.25).contains(&mean_dy), "mean dy {mean_dy}");
    }

    #[test]
    fn translations_up_to_two_px_within_quarter_px() {
        let a = textured_frame(0.0, 0.0, 0.0);
        let kps = select_keypoints(&a, 5, DEFAULT_WINDOW).unwrap();
        for (dx, dy) in [(1.0, 0.0), (0.0, 1.0), (2.0, 0.0), (1.0, 1.0), (2.0, 2.0)] {
            let b = textured_frame(dx, dy, 33.0);
            let flows = lucas_kanade(&a, &b, &kps, DEFAULT_WINDOW).unwrap();
            let valid: Vec<&FlowVector> = flows.iter().filter(|f| f.valid).collect();
            let mean_dx: f64 = valid.iter().map(|f| f.dx).sum::<f64>() / valid.len() as f64;
            let mean_dy: f64 = valid.iter().map(|f| f.dy).sum::<f64>() / valid.len() as f64;
            let err = ((mean_dx - dx).powi(2) + (mean_dy - dy).powi(2)).sqrt();
            assert!(err < 0.25, "translation ({dx},{dy}) recovered with error {err}");
        }
    }

    #[test]
    fn flat_frames_are_all_invalid() {
        let flat = FrameSample::new(ts(0.0), 64, 64, vec![128; 64 * 64]).unwrap();
        let kps = vec![
            Keypoint { x: 32.0, y: 32.0 },
            Keypoint { x: 20.0, y: 40.0 },
        ];
        let flows = lucas_kanade(&flat, &flat, &kps, DEFAULT_WINDOW).unwrap();
        assert!(flows.iter().all(|f| !f.valid));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = FrameSample::new(ts(0.0), 32, 32, vec![0; 1024]).unwrap();
        let b = FrameSample::new(ts(33.0), 64, 64, vec![0; 4096]).unwrap();
        assert!(lucas_kanade(&a, &b, &[Keypoint { x: 16.0, y: 16.0 }], 15).is_err());
    }

    #[test]
    fn even_or_tiny_window_rejected() {
        let a = textured_frame(0.0, 0.0, 0.0);
        assert!(lucas_kanade(&a, &a, &[], 14).is_err());
        assert!(lucas_kanade(&a, &a, &[], 3).is_err());
    }

    #[test]
    fn out_of_margin_keypoint_is_invalid_not_fatal() {
        let a = textured_frame(0.0, 0.0, 0.0);
        let flows = lucas_kanade(&a, &a, &[Keypoint { x: 2.0, y: 2.0 }], 15).unwrap();
        assert!(!flows[0].valid);
    }

    #[test]
    fn static_video_gives_zero_signal() {
        let f = textured_frame(0.0, 0.0, 0.0);
        let frames: Vec<FrameSample> = (0..10)
            .map(|k| FrameSample {
                t: ts(33.0 * k as f64),
                ..f.clone()
            })
            .collect();
        let chan = Channel::new(30.0, frames);
        let kps = select_keypoints(&chan.samples[0], 5, DEFAULT_WINDOW).unwrap();
        let sig = motion_signal(&chan, &kps, DEFAULT_WINDOW).unwrap();
        assert_eq!(sig.values.len(), 9);
        assert!(sig.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn three_frame_sequence_with_known_steps() {
        let frames = vec![
            textured_frame(0.0, 0.0, 0.0),
            textured_frame(1.0, 0.0, 33.0),
            textured_frame(3.0, 0.0, 67.0),
        ];
        let chan = Channel::new(30.0, frames);
        let kps = select_keypoints(&chan.samples[0], 5, DEFAULT_WINDOW).unwrap();
        let sig = motion_signal(&chan, &kps, DEFAULT_WINDOW).unwrap();
        assert_eq!(sig.values.len(), 2);
        assert!((sig.values[0] - 1.0).abs() < 0.25, "step 1: {}", sig.values[0]);
        assert!((sig.values[1] - 2.0).abs() < 0.25, "step 2: {}", sig.values[1]);
        // Midpoint timestamps.
        assert!((sig.t_mid_s[0] - 0.0165).abs() < 1e-9);
    }

    #[test]
    fn all_invalid_video_is_low_confidence() {
        let flat = FrameSample::new(ts(0.0), 64, 64, vec![7; 64 * 64]).unwrap();
        let frames: Vec<FrameSample> = (0..6)
            .map(|k| FrameSample {
                t: ts(33.0 * k as f64),
                ..flat.clone()
            })
            .collect();
        let chan = Channel::new(30.0, frames);
        let kps = vec![Keypoint { x: 32.0, y: 32.0 }];
        assert!(matches!(
            motion_signal(&chan, &kps, DEFAULT_WINDOW),
            Err(Error::LowConfidence(_))
        ));
    }

    #[test]
    fn motion_signal_nonnegative_and_length() {
        let frames: Vec<FrameSample> = (0..8)
            .map(|k| textured_frame(0.3 * k as f64, -0.2 * k as f64, 33.0 * k as f64))
            .collect();
        let chan = Channel::new(30.0, frames);
        let kps = select_keypoints(&chan.samples[0], 5, DEFAULT_WINDOW).unwrap();
        let sig = motion_signal(&chan, &kps, DEFAULT_WINDOW).unwrap();
        assert_eq!(sig.values.len(), 7);
        assert!(sig.values.iter().all(|&v| v >= 0.0));
    }

    /// Naive DFT magnitude at bin k over n samples.
    fn dft_mag(values: &[f64], k: usize) -> f64 {
        let n = values.len() as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, &v) in values.iter().enumerate() {
            let arg = -2.0 * std::f64::consts::PI * k as f64 * i as f64 / n;
            re += v * arg.cos();
            im += v * arg.sin();
        }
        (re * re + im * im).sqrt() / n
    }

    #[test]
    fn sinusoidal_sweep_motion_peaks_at_twice_the_excitation() {
        // 0.2 Hz bend sweep: displacement is sinusoidal at 0.2 Hz, so its
        // per-frame speed magnitude is a rectified cosine whose fundamental
        // sits at 0.4 Hz.
        let cfg = ScopeConfig {
            frame_width: 160,
            frame_height: 120,
            px_per_deg: 1.0,
            ..ScopeConfig::default()
        };
        let fps = 30.0;
        let dur = 20.0;
        let n = (fps * dur) as usize;
        let frames: Vec<FrameSample> = (0..n)
            .map(|k| {
                let t = k as f64 / fps;
                let bend = 12.0 * (2.0 * std::f64::consts::PI * 0.2 * t).sin();
                render_frame(
                    &ScopeState {
                        t: ts(t * 1e3),
                        bend_x_deg: bend,
                        bend_y_deg: 0.0,
                        feed_deg: 0.0,
                    },
                    &cfg,
                )
            })
            .collect();
        let chan = Channel::new(fps, frames);
        let kps = select_keypoints(&chan.samples[0], 5, DEFAULT_WINDOW).unwrap();
        let sig = motion_signal(&chan, &kps, DEFAULT_WINDOW).unwrap();
        // 20 s of signal: bin k corresponds to k/20 Hz. Expect the peak at
        // 0.4 Hz (bin 8 of 599 samples ~ k = round(0.4 * 599 / 30)).
        let n_sig = sig.values.len();
        let expected_bin = (0.4 * n_sig as f64 / fps).round() as usize;
        let mut best_bin = 1;
        let mut best = 0.0;
        for k in 1..n_sig / 2 {
            let m = dft_mag(&sig.values, k);
            if m > best {
                best = m;
                best_bin = k;
            }
        }
        assert_eq!(best_bin, expected_bin, "dominant non-DC bin");
    }
}
