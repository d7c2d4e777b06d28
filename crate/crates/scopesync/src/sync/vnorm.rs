//! Velocity-norm series, min-max normalization and Pearson correlation —
//! the dimensionless footing on which heterogeneous modalities are
//! compared.

use crate::error::{Error, Result};

/// Per-step Euclidean norm of consecutive sample differences. Length is
/// one less than the source series.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityNormSeries {
    pub values: Vec<f64>,
    pub rate_hz: f64,
    pub normalized: bool,
    /// Set by min-max normalization when the input was constant.
    pub degenerate: bool,
}

/// `v[t] = ||x[t] - x[t-1]||_2` over rows of a d-dimensional series sampled
/// at `rate_hz`.
pub fn velocity_norm(series: &[Vec<f64>], rate_hz: f64) -> Result<VelocityNormSeries> {
    if series.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "velocity norm needs at least 2 samples, got {}",
            series.len()
        )));
    }
    let dim = series[0].len();
    let mut values = Vec::with_capacity(series.len() - 1);
    for w in series.windows(2) {
        if w[1].len() != dim || w[0].len() != dim {
            return Err(Error::InvalidArgument(
                "inconsistent sample dimension".into(),
            ));
        }
        let sq: f64 = w[0]
            .iter()
            .zip(w[1].iter())
            .map(|(a, b)| (b - a) * (b - a))
            .sum();
        values.push(sq.sqrt());
    }
    Ok(VelocityNormSeries {
        values,
        rate_hz,
        normalized: false,
        degenerate: false,
    })
}

/// Convenience for fixed-width rows.
pub fn velocity_norm_arrays<const D: usize>(
    series: &[[f64; D]],
    rate_hz: f64,
) -> Result<VelocityNormSeries> {
    let rows: Vec<Vec<f64>> = series.iter().map(|r| r.to_vec()).collect();
    velocity_norm(&rows, rate_hz)
}

/// `v_hat = (v - min) / (max - min)`. A constant input maps to all zeros
/// with the degenerate flag set; downstream correlation then reports an
/// undefined value for it instead of fabricating one.
pub fn minmax_normalize(v: &VelocityNormSeries) -> VelocityNormSeries {
    let min = v.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if v.values.is_empty() || max == min {
        return VelocityNormSeries {
            values: vec![0.0; v.values.len()],
            rate_hz: v.rate_hz,
            normalized: true,
            degenerate: true,
        };
    }
    let span = max - min;
    VelocityNormSeries {
        values: v.values.iter().map(|x| (x - min) / span).collect(),
        rate_hz: v.rate_hz,
        normalized: true,
        degenerate: false,
    }
}

/// Sample Pearson correlation coefficient.
///
/// Two-pass form: means first, then centered products, with
/// `rho = sxy / (sqrt(sxx) * sqrt(syy))`. Keep the accumulation order
/// stable; exactness tests compare this against an independent evaluation
/// bit for bit.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "pearson needs at least 2 samples".into(),
        ));
    }
    let n = a.len() as f64;
    let mut sum_a = 0.0;
    let mut sum_b = 0.0;
    for i in 0..a.len() {
        sum_a += a[i];
        sum_b += b[i];
    }
    let mean_a = sum_a / n;
    let mean_b = sum_b / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..a.len() {
        let da = a[i] - mean_a;
        let db = b[i] - mean_b;
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "zero variance in an input".into(),
        ));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}
