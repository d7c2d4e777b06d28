//! Known-frequency sinusoid fitting and phase-to-offset conversion.
//!
//! The model is `y(t) = a*sin(2*pi*f*t) + b*cos(2*pi*f*t) + c` with `f`
//! fixed, which makes the least-squares problem linear: the 3x3 normal
//! equations are solved directly. Phases are measured against the shared
//! stream epoch (t = 0), so fits from different channels are comparable.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub freq_hz: f64,
    pub a_sin: f64,
    pub b_cos: f64,
    pub c_offset: f64,
    pub residual_rms: f64,
}

impl SinusoidFit {
    pub fn amplitude(&self) -> f64 {
        (self.a_sin * self.a_sin + self.b_cos * self.b_cos).sqrt()
    }

    /// Phase in (-pi, pi]: `y ~ R*sin(2*pi*f*t + phase) + c`.
    pub fn phase(&self) -> f64 {
        let phi = self.b_cos.atan2(self.a_sin);
        if phi <= -std::f64::consts::PI {
            std::f64::consts::PI
        } else {
            phi
        }
    }

    /// Fit of the time-integral of the model, with the constant term (and
    /// the ramp it would produce) dropped. Amplitude scales by 1/omega and
    /// the phase retards by 90 degrees; the residual is scaled the same way
    /// so confidence ratios carry over. Used to compare a rate signal's fit
    /// against fits of channels that integrate it.
    pub fn integral(&self) -> SinusoidFit {
        let omega = 2.0 * std::f64::consts::PI * self.freq_hz;
        SinusoidFit {
            freq_hz: self.freq_hz,
            a_sin: self.b_cos / omega,
            b_cos: -self.a_sin / omega,
            c_offset: 0.0,
            residual_rms: self.residual_rms / omega,
        }
    }
}

/// Solves a 3x3 linear system by Gaussian elimination with partial
/// pivoting. Returns None when the pivot collapses (rank deficiency).
fn solve3(mut m: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot_row);
        let pivot = m[col][col];
        if pivot.abs() < 1e-12 {
            return None;
        }
        for row in (col + 1)..3 {
            let factor = m[row][col] / pivot;
            for k in col..4 {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = m[row][3];
        for k in (row + 1)..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Least-squares fit of a fixed-frequency sinusoid to `(t_s, y)` samples.
///
/// Requires at least three samples spanning one full period. Samples at
/// (effectively) identical phase make the normal equations rank deficient
/// and produce a `DegenerateFit` error.
pub fn fit_sinusoid(samples: &[(f64, f64)], freq_hz: f64) -> Result<SinusoidFit> {
    if !(freq_hz.is_finite() && freq_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fit frequency must be strictly positive, got {freq_hz}"
        )));
    }
    if samples.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    let t_min = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let t_max = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    if !(t_min.is_finite() && t_max.is_finite()) || t_max - t_min < 1.0 / freq_hz {
        return Err(Error::InvalidArgument(format!(
            "samples span {:.6} s but one period is {:.6} s",
            t_max - t_min,
            1.0 / freq_hz
        )));
    }

    let omega = 2.0 * std::f64::consts::PI * freq_hz;
    // Normal equations for the basis {sin, cos, 1}.
    let (mut ss, mut sc, mut cc, mut s1, mut c1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut cy, mut y1) = (0.0, 0.0, 0.0);
    let n = samples.len() as f64;
    for &(t, y) in samples {
        if !t.is_finite() || !y.is_finite() {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        let s = (omega * t).sin();
        let c = (omega * t).cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
        s1 += s;
        c1 += c;
        sy += s * y;
        cy += c * y;
        y1 += y;
    }
    let solution = solve3([
        [ss, sc, s1, sy],
        [sc, cc, c1, cy],
        [s1, c1, n, y1],
    ])
    .ok_or_else(|| {
        Error::DegenerateFit("design matrix is rank deficient (samples at one phase?)".into())
    })?;
    let [a, b, c] = solution;

    let mut sq = 0.0;
    for &(t, y) in samples {
        let model = a * (omega * t).sin() + b * (omega * t).cos() + c;
        let r = y - model;
        sq += r * r;
    }

    Ok(SinusoidFit {
        freq_hz,
        a_sin: a,
        b_cos: b,
        c_offset: c,
        residual_rms: (sq / n).sqrt(),
    })
}

/// Amplitude must exceed this multiple of the residual for a phase read to
/// count as trustworthy.
pub const PHASE_CONFIDENCE_RATIO: f64 = 10.0;

/// Wraps a time offset into `(-T/2, T/2]`.
fn wrap_half_period(dt_s: f64, period_s: f64) -> f64 {
    let mut x = dt_s - period_s * (dt_s / period_s).round();
    // `round` half-away-from-zero can land exactly on -T/2; push it to +T/2.
    if x <= -period_s / 2.0 {
        x += period_s;
    }
    if x > period_s / 2.0 {
        x -= period_s;
    }
    x
}

/// Relative time offset between two fits of the same frequency, in
/// milliseconds, wrapped to `(-T/2, T/2]`. Positive means `sig` lags `ref`:
/// `sig(t) = ref(t - dt)` yields `+dt`.
pub fn phase_offset(ref_fit: &SinusoidFit, sig_fit: &SinusoidFit) -> Result<f64> {
    if (ref_fit.freq_hz - sig_fit.freq_hz).abs() > 1e-9 * ref_fit.freq_hz.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "fits have different frequencies: {} vs {}",
            ref_fit.freq_hz, sig_fit.freq_hz
        )));
    }
    for (name, fit) in [("reference", ref_fit), ("signal", sig_fit)] {
        if fit.amplitude() <= PHASE_CONFIDENCE_RATIO * fit.residual_rms {
            return Err(Error::LowConfidence(format!(
                "{name} fit amplitude {:.3e} does not dominate residual {:.3e}",
                fit.amplitude(),
                fit.residual_rms
            )));
        }
    }
    let omega = 2.0 * std::f64::consts::PI * ref_fit.freq_hz;
    let period = 1.0 / ref_fit.freq_hz;
    // A lag of dt shifts the phase by -omega*dt, so invert the difference.
    let dt = (ref_fit.phase() - sig_fit.phase()) / omega;
    Ok(wrap_half_period(dt, period) * 1e3)
}
