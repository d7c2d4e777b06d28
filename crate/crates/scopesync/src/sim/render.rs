//! Procedural frame rendering.
//!
//! Each frame samples a fixed, periodic, high-contrast texture built from
//! sinusoidal gratings. The sample window translates proportionally to the
//! bend angles and zooms with insertion, so optical flow on consecutive
//! frames sees the joint motion. The texture is separable in x and y, which
//! keeps rendering to two 1-D tables per frame.

use crate::sim::{ScopeConfig, ScopeState};
use crate::types::FrameSample;

// Grating periods in pixels; incommensurate pairs per axis so windows a few
// pixels wide always see structure and correlation peaks are unambiguous
// over small shifts.
const PERIODS_X: [f64; 2] = [31.0, 53.0];
const PERIODS_Y: [f64; 2] = [37.0, 59.0];
const CONTRAST: f64 = 30.0;

fn grating(u: f64, periods: &[f64; 2]) -> f64 {
    periods
        .iter()
        .map(|p| (2.0 * std::f64::consts::PI * u / p).sin())
        .sum()
}

/// Renders the 8-bit grayscale view for a joint state.
///
/// The sample coordinate of pixel `x` is
/// `(x - cx) / zoom + cx - px_per_deg * bend_x_deg` (and likewise for y
/// with `bend_y_deg`), with `zoom = 1 + zoom_per_feed_deg * feed_deg`.
/// Deterministic: identical states render pixel-identical frames.
pub fn render_frame(state: &ScopeState, cfg: &ScopeConfig) -> FrameSample {
    let w = cfg.frame_width as usize;
    let h = cfg.frame_height as usize;
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let zoom = (1.0 + cfg.zoom_per_feed_deg * state.feed_deg).max(0.1);
    let dx = cfg.px_per_deg * state.bend_x_deg;
    let dy = cfg.px_per_deg * state.bend_y_deg;

    let mut col: Vec<f64> = Vec::with_capacity(w);
    for x in 0..w {
        let u = (x as f64 - cx) / zoom + cx - dx;
        col.push(grating(u, &PERIODS_X));
    }
    let mut row: Vec<f64> = Vec::with_capacity(h);
    for y in 0..h {
        let v = (y as f64 - cy) / zoom + cy - dy;
        row.push(grating(v, &PERIODS_Y));
    }

    let mut pixels = vec![0u8; w * h];
    for y in 0..h {
        let base = y * w;
        let gy = row[y];
        for x in 0..w {
            let value = 127.5 + CONTRAST * (col[x] + gy);
            pixels[base + x] = value.round().clamp(0.0, 255.0) as u8;
        }
    }

    FrameSample::new(state.t, cfg.frame_width, cfg.frame_height, pixels)
        .expect("buffer sized to width*height")
}
