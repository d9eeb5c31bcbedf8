//! Augmented Dickey-Fuller unit-root test (constant, no trend) with
//! AIC-based lag selection, and the stationarity-repair step built on it.

use std::collections::BTreeMap;

use serde::Serialize;

use super::EconError;
use crate::linalg::{lstsq, LinalgError, Mat};

#[derive(Debug, Clone, Serialize)]
pub struct AdfResult {
    /// t-statistic on the lagged-level coefficient.
    pub gamma_t_stat: f64,
    pub lag_used: usize,
    /// Rejection of the unit-root null at the 5% level.
    pub reject_unit_root: bool,
    /// Critical values keyed by significance percent (1, 5, 10).
    pub critical_values: BTreeMap<u8, f64>,
}

/// What stationarity repair did to a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Transform {
    None,
    Diff1,
    Dropped,
}

impl std::fmt::Display for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Transform::None => write!(f, "none"),
            Transform::Diff1 => write!(f, "diff1"),
            Transform::Dropped => write!(f, "dropped"),
        }
    }
}

// MacKinnon (2010) response-surface coefficients for the constant-only
// Dickey-Fuller t distribution: cv = b0 + b1/n + b2/n^2 + b3/n^3.
const CV_COEFFS: [(u8, [f64; 4]); 3] = [
    (1, [-3.43035, -6.5393, -16.786, -79.433]),
    (5, [-2.86154, -2.8903, -4.234, -40.040]),
    (10, [-2.56677, -1.5384, -2.809, 0.0]),
];

/// Finite-sample critical values at the given regression sample size.
pub fn critical_values(nobs: usize) -> BTreeMap<u8, f64> {
    let n = nobs as f64;
    CV_COEFFS
        .iter()
        .map(|(level, b)| {
            (
                *level,
                b[0] + b[1] / n + b[2] / (n * n) + b[3] / (n * n * n),
            )
        })
        .collect()
}

/// Schwert's rule for the maximum lag to scan.
pub fn schwert_max_lag(t_len: usize) -> usize {
    (12.0 * (t_len as f64 / 100.0).powf(0.25)).floor() as usize
}

struct AdfFit {
    t_stat: f64,
    nobs: usize,
    ssr: f64,
    n_params: usize,
}

/// Fits dy_t = alpha + gamma*y_{t-1} + sum delta_i dy_{t-i} on rows
/// t = start..T, where start >= k+1.
fn fit_adf(y: &[f64], k: usize, start: usize) -> Result<AdfFit, EconError> {
    let t_len = y.len();
    let n = t_len - start;
    let p = k + 2;
    if n < p + 1 {
        return Err(EconError::SeriesTooShort {
            needed: start + p + 1,
            got: t_len,
        });
    }
    let mut design = Mat::zeros(n, p);
    let mut dy = Vec::with_capacity(n);
    for (row, t) in (start..t_len).enumerate() {
        design[(row, 0)] = 1.0;
        design[(row, 1)] = y[t - 1];
        for i in 1..=k {
            design[(row, 1 + i)] = y[t - i] - y[t - i - 1];
        }
        dy.push(y[t] - y[t - 1]);
    }
    let fit = lstsq(&design, &dy).map_err(|e| match e {
        LinalgError::RankDeficient { .. } => EconError::ConstantSeries,
        other => EconError::DomainError(other.to_string()),
    })?;
    let df = n - p;
    let s2 = fit.residual_ssr / df as f64;
    let se = (s2 * fit.xtx_inv_diag[1]).sqrt();
    if se == 0.0 {
        return Err(EconError::ConstantSeries);
    }
    Ok(AdfFit {
        t_stat: fit.coefficients[1] / se,
        nobs: n,
        ssr: fit.residual_ssr,
        n_params: p,
    })
}

fn aic(fit: &AdfFit) -> f64 {
    let n = fit.nobs as f64;
    n * (fit.ssr / n).ln() + 2.0 * fit.n_params as f64
}

/// ADF test with constant-only specification.
///
/// The number of lagged differences is chosen by an AIC scan from 0 to the
/// Schwert bound, with every candidate fit on the common sample implied by
/// the largest lag; the reported statistic comes from a refit of the chosen
/// lag on its own maximal sample.
pub fn adf_test(series: &[f64]) -> Result<AdfResult, EconError> {
    adf_test_with_max_lag(series, None)
}

pub fn adf_test_with_max_lag(
    series: &[f64],
    max_lag: Option<usize>,
) -> Result<AdfResult, EconError> {
    let t_len = series.len();
    if t_len < 15 {
        return Err(EconError::SeriesTooShort {
            needed: 15,
            got: t_len,
        });
    }
    let mean = series.iter().sum::<f64>() / t_len as f64;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t_len as f64;
    let scale = series.iter().map(|v| v * v).sum::<f64>() / t_len as f64;
    if var <= scale.max(1.0) * 1e-14 {
        return Err(EconError::ConstantSeries);
    }

    // Keep at least 12 usable rows in the common comparison sample.
    let k_max = max_lag
        .unwrap_or_else(|| schwert_max_lag(t_len))
        .min(t_len.saturating_sub(14));
    let start = k_max + 1;

    let mut best_k = 0;
    let mut best_aic = f64::INFINITY;
    for k in 0..=k_max {
        let fit = fit_adf(series, k, start)?;
        let score = aic(&fit);
        if score < best_aic {
            best_aic = score;
            best_k = k;
        }
    }

    // Refit the winner on its maximal sample.
    let fit = fit_adf(series, best_k, best_k + 1)?;
    let critical_values = critical_values(fit.nobs);
    let reject_unit_root = fit.t_stat < critical_values[&5];

    Ok(AdfResult {
        gamma_t_stat: fit.t_stat,
        lag_used: best_k,
        reject_unit_root,
        critical_values,
    })
}

/// Repairs a monthly series for Granger screening.
///
/// Leading and trailing gaps are trimmed. Up to two interior gaps are
/// linearly interpolated; more than two drops the series. A series that
/// fails ADF is differenced once and retested; failing again drops it. A
/// constant series is degenerate, not stationary, so it is dropped too.
pub fn make_stationary(series: &[Option<f64>]) -> Result<(Vec<f64>, Transform), EconError> {
    let first = series.iter().position(|v| v.is_some());
    let last = series.iter().rposition(|v| v.is_some());
    let (first, last) = match (first, last) {
        (Some(f), Some(l)) => (f, l),
        _ => return Ok((Vec::new(), Transform::Dropped)),
    };
    let interior = &series[first..=last];
    let gap_count = interior.iter().filter(|v| v.is_none()).count();
    if gap_count > 2 {
        return Ok((Vec::new(), Transform::Dropped));
    }

    let mut values: Vec<f64> = Vec::with_capacity(interior.len());
    for (i, v) in interior.iter().enumerate() {
        match v {
            Some(x) => values.push(*x),
            None => {
                // Interior gap: endpoints exist by construction.
                let prev = interior[..i]
                    .iter()
                    .rev()
                    .flatten()
                    .next()
                    .copied()
                    .unwrap();
                let (offset, next) = interior[i + 1..]
                    .iter()
                    .enumerate()
                    .find_map(|(j, v)| v.map(|x| (j, x)))
                    .unwrap();
                let span = offset as f64 + 2.0;
                let back = interior[..i]
                    .iter()
                    .rev()
                    .position(|v| v.is_some())
                    .unwrap() as f64;
                let frac = (back + 1.0) / (span + back);
                values.push(prev + frac * (next - prev));
            }
        }
    }

    match adf_test(&values) {
        Ok(res) if res.reject_unit_root => return Ok((values, Transform::None)),
        Ok(_) => {}
        Err(EconError::ConstantSeries) => return Ok((values, Transform::Dropped)),
        Err(e) => return Err(e),
    }

    let diffed: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    match adf_test(&diffed) {
        Ok(res) if res.reject_unit_root => Ok((diffed, Transform::Diff1)),
        Ok(_) => Ok((Vec::new(), Transform::Dropped)),
        Err(EconError::ConstantSeries) => Ok((Vec::new(), Transform::Dropped)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_seed_indexed, stream};
    use rand::Rng;

    fn gauss(rng: &mut crate::rng::Rng) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn random_walk(n: usize, seed_idx: u64) -> Vec<f64> {
        let mut rng = stream(derive_seed_indexed(17, "adf-rw", seed_idx));
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = y[t - 1] + gauss(&mut rng);
        }
        y
    }

    fn ar1(phi: f64, n: usize, seed_idx: u64) -> Vec<f64> {
        let mut rng = stream(derive_seed_indexed(17, "adf-ar1", seed_idx));
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = phi * y[t - 1] + gauss(&mut rng);
        }
        y
    }

    #[test]
    fn constant_series_is_degenerate() {
        let y = vec![3.5; 60];
        assert!(matches!(adf_test(&y), Err(EconError::ConstantSeries)));
    }

    #[test]
    fn rejects_stationary_keeps_random_walk() {
        // Smoke-sized check; the calibrated rates live in the acceptance suite.
        let mut reject_ar = 0;
        let mut reject_rw = 0;
        for s in 0..20 {
            if adf_test(&ar1(0.5, 240, s)).unwrap().reject_unit_root {
                reject_ar += 1;
            }
            if adf_test(&random_walk(240, s)).unwrap().reject_unit_root {
                reject_rw += 1;
            }
        }
        assert!(reject_ar >= 18, "AR(1) rejections: {reject_ar}/20");
        assert!(reject_rw <= 3, "random-walk rejections: {reject_rw}/20");
    }

    #[test]
    fn decision_invariant_under_level_shift() {
        for s in 0..5 {
            let y = ar1(0.4, 200, 100 + s);
            let shifted: Vec<f64> = y.iter().map(|v| v + 500.0).collect();
            let a = adf_test(&y).unwrap();
            let b = adf_test(&shifted).unwrap();
            assert_eq!(a.reject_unit_root, b.reject_unit_root);
            assert!((a.gamma_t_stat - b.gamma_t_stat).abs() < 1e-6);
        }
    }

    #[test]
    fn critical_values_ordering() {
        let cv = critical_values(249);
        assert!(cv[&1] < cv[&5] && cv[&5] < cv[&10]);
        assert!((cv[&5] - (-2.8732)).abs() < 5e-4);
    }

    #[test]
    fn make_stationary_handles_gaps() {
        let base = ar1(0.3, 120, 7);
        let mut with_gaps: Vec<Option<f64>> = base.iter().copied().map(Some).collect();
        with_gaps[40] = None;
        with_gaps[80] = None;
        let (series, transform) = make_stationary(&with_gaps).unwrap();
        assert_eq!(transform, Transform::None);
        assert_eq!(series.len(), 120);
        // Interpolated point sits between its neighbours.
        let lo = base[39].min(base[41]);
        let hi = base[39].max(base[41]);
        assert!(series[40] >= lo && series[40] <= hi);
    }

    #[test]
    fn make_stationary_drops_gappy_series() {
        let base = ar1(0.3, 120, 8);
        let mut with_gaps: Vec<Option<f64>> = base.iter().copied().map(Some).collect();
        for idx in [30, 50, 70] {
            with_gaps[idx] = None;
        }
        let (_, transform) = make_stationary(&with_gaps).unwrap();
        assert_eq!(transform, Transform::Dropped);
    }

    #[test]
    fn make_stationary_differences_random_walk() {
        let rw: Vec<Option<f64>> = random_walk(240, 42).into_iter().map(Some).collect();
        let (series, transform) = make_stationary(&rw).unwrap();
        assert_eq!(transform, Transform::Diff1);
        assert_eq!(series.len(), 239);
        assert!(adf_test(&series).unwrap().reject_unit_root);
    }

    #[test]
    fn make_stationary_drops_double_integration() {
        let rw = random_walk(240, 43);
        let mut double = vec![0.0; rw.len()];
        for t in 1..rw.len() {
            double[t] = double[t - 1] + rw[t];
        }
        let wrapped: Vec<Option<f64>> = double.into_iter().map(Some).collect();
        let (_, transform) = make_stationary(&wrapped).unwrap();
        assert_eq!(transform, Transform::Dropped);
    }
}
