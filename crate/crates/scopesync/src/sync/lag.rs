//! Residual lag search: the integer-sample shift maximizing Pearson
//! correlation between two velocity-norm series over a bounded symmetric
//! window.

use crate::error::{Error, Result};
use crate::sync::vnorm::{pearson, VelocityNormSeries};

/// One evaluated lag. `rho` is None when the overlap had zero variance and
/// the correlation is undefined there; such lags are excluded from the
/// argmax rather than treated as anti-correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagSample {
    pub tau_samples: i64,
    pub tau_ms: f64,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagEstimate {
    pub tau_star_samples: i64,
    pub tau_star_ms: f64,
    pub rho_max: f64,
    pub curve: Vec<LagSample>,
}

const MIN_OVERLAP: usize = 10;

/// Evaluates `rho(x[t], y[t + tau])` at every integer-sample lag in
/// `[-tau_max, tau_max]` over the valid temporal overlap, and returns the
/// argmax under a deterministic tie-break: highest rho, then smallest
/// |tau|, then the negative lag. Positive `tau_star` means `y` lags `x`.
///
/// Both series must share a rate, and the overlap at the window edges must
/// be at least 10 samples (resample first).
pub fn residual_lag(
    x: &VelocityNormSeries,
    y: &VelocityNormSeries,
    tau_max_ms: f64,
) -> Result<LagEstimate> {
    if (x.rate_hz - y.rate_hz).abs() > 1e-9 * x.rate_hz.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "series rates differ: {} vs {} Hz",
            x.rate_hz, y.rate_hz
        )));
    }
    if !(tau_max_ms.is_finite() && tau_max_ms >= 0.0) {
        return Err(Error::InvalidArgument(
            "tau_max_ms must be non-negative".into(),
        ));
    }
    let rate = x.rate_hz;
    let max_lag = (tau_max_ms * 1e-3 * rate).floor() as i64;
    let n_x = x.values.len() as i64;
    let n_y = y.values.len() as i64;
    let worst_overlap = n_x.min(n_y) - max_lag;
    if worst_overlap < MIN_OVERLAP as i64 {
        return Err(Error::InvalidArgument(format!(
            "overlap at the window edge is {worst_overlap} samples, need at least {MIN_OVERLAP}"
        )));
    }

    let ms_per_sample = 1e3 / rate;
    let mut curve = Vec::with_capacity((2 * max_lag + 1) as usize);
    let mut best: Option<(f64, i64)> = None;

    for tau in -max_lag..=max_lag {
        // Overlapping index range for pairs (x[t], y[t + tau]).
        let t_lo = 0.max(-tau);
        let t_hi = (n_x - 1).min(n_y - 1 - tau);
        let rho = if t_hi - t_lo + 1 >= MIN_OVERLAP as i64 {
            let xs = &x.values[t_lo as usize..=t_hi as usize];
            let ys = &y.values[(t_lo + tau) as usize..=(t_hi + tau) as usize];
            pearson(xs, ys).ok()
        } else {
            None
        };
        curve.push(LagSample {
            tau_samples: tau,
            tau_ms: tau as f64 * ms_per_sample,
            rho,
        });
        if let Some(r) = rho {
            let better = match best {
                None => true,
                Some((best_r, best_tau)) => {
                    r > best_r
                        || (r == best_r
                            && (tau.abs() < best_tau.abs()
                                || (tau.abs() == best_tau.abs() && tau < best_tau)))
                }
            };
            if better {
                best = Some((r, tau));
            }
        }
    }

    let (rho_max, tau_star) = best.ok_or_else(|| {
        Error::UndefinedCorrelation("correlation undefined at every lag".into())
    })?;
    Ok(LagEstimate {
        tau_star_samples: tau_star,
        tau_star_ms: tau_star as f64 * ms_per_sample,
        rho_max,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sync::vnorm::minmax_normalize;
    use rand::{Rng, SeedableRng};

    fn series(values: Vec<f64>, rate: f64) -> VelocityNormSeries {
        VelocityNormSeries {
            values,
            rate_hz: rate,
            normalized: false,
            degenerate: false,
        }
    }

    fn random_series(seed: u64, n: usize, rate: f64) -> VelocityNormSeries {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        series((0..n).map(|_| rng.gen_range(0.0..1.0)).collect(), rate)
    }

    #[test]
    fn identical_series_peak_at_zero() {
        let x = random_series(1, 300, 30.0);
        let est = residual_lag(&x, &x, 500.0).unwrap();
        assert_eq!(est.tau_star_samples, 0);
        assert!((est.rho_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constructed_shift_recovered_with_sign() {
        // y[t] = x[t - 3]: y lags x by 3 samples = +100 ms at 30 Hz.
        let x = random_series(2, 400, 30.0);
        let mut y_values = vec![0.0; x.values.len()];
        for t in 3..x.values.len() {
            y_values[t] = x.values[t - 3];
        }
        let y = series(y_values, 30.0);
        let est = residual_lag(&x, &y, 1000.0).unwrap();
        assert_eq!(est.tau_star_samples, 3);
        assert!((est.tau_star_ms - 100.0).abs() < 1e-9);
    }

    #[test]
    fn shift_property_across_window() {
        let x = random_series(3, 500, 30.0);
        for k in [-10i64, -4, 0, 4, 10] {
            let shifted: Vec<f64> = (0..x.values.len() as i64)
                .map(|t| {
                    let src = t - k;
                    if src >= 0 && (src as usize) < x.values.len() {
                        x.values[src as usize]
                    } else {
                        0.0
                    }
                })
                .collect();
            let y = series(shifted, 30.0);
            let est = residual_lag(&x, &y, 800.0).unwrap();
            assert_eq!(est.tau_star_samples, k, "shift {k} not recovered");
        }
    }

    #[test]
    fn argmax_invariant_under_positive_affine_maps() {
        let x = random_series(4, 400, 30.0);
        let mut y_values = vec![0.0; x.values.len()];
        for t in 5..x.values.len() {
            y_values[t] = x.values[t - 5];
        }
        let y = series(y_values.clone(), 30.0);
        let y_affine = series(y_values.iter().map(|v| 7.0 * v + 2.0).collect(), 30.0);
        let base = residual_lag(&x, &y, 1000.0).unwrap();
        let mapped = residual_lag(&x, &y_affine, 1000.0).unwrap();
        assert_eq!(base.tau_star_samples, mapped.tau_star_samples);
        // Normalization is itself a positive affine map.
        let normalized = residual_lag(&minmax_normalize(&x), &minmax_normalize(&y), 1000.0).unwrap();
        assert_eq!(base.tau_star_samples, normalized.tau_star_samples);
    }

    #[test]
    fn degenerate_lags_excluded_not_fatal() {
        // Constant head makes small-|tau| overlaps still fine, but an
        // all-constant y is undefined everywhere.
        let x = random_series(5, 100, 30.0);
        let y = series(vec![1.0; 100], 30.0);
        assert!(matches!(
            residual_lag(&x, &y, 500.0),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn window_larger_than_series_rejected() {
        let x = random_series(6, 20, 30.0);
        assert!(residual_lag(&x, &x, 1000.0).is_err());
    }

    #[test]
    fn tie_break_prefers_small_then_negative() {
        // Alternating 0/1 self-correlation: the windows at lags +2 and -2
        // contain bit-identical sequences, so their rho values tie exactly.
        let values: Vec<f64> = (0..64).map(|t| (t % 2) as f64).collect();
        let x = series(values, 30.0);
        let est = residual_lag(&x, &x, 2000.0 / 30.0).unwrap();
        let rho_at = |tau: i64| {
            est.curve
                .iter()
                .find(|l| l.tau_samples == tau)
                .and_then(|l| l.rho)
                .unwrap()
        };
        assert_eq!(rho_at(-2).to_bits(), rho_at(2).to_bits());
        // The positive member of an exact tie can never win.
        assert_ne!(est.tau_star_samples, 2);
        if rho_at(0).to_bits() == rho_at(-2).to_bits() {
            assert_eq!(est.tau_star_samples, 0, "smallest |tau| wins ties");
        }
    }
}
