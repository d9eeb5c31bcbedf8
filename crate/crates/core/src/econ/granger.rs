//! Granger-causality screening: SSR-based F test of whether lags of `x`
//! improve the autoregressive prediction of `y`, plus the lagged
//! cross-correlation reported alongside it.

use serde::Serialize;

use super::dist::f_p_value;
use super::ols::pearson;
use super::EconError;
use crate::linalg::{lstsq, LinalgError, Mat};

#[derive(Debug, Clone, Serialize)]
pub struct GrangerResult {
    pub lag: usize,
    pub f_stat: f64,
    pub p_value: f64,
    pub df_num: usize,
    pub df_den: usize,
    /// Pearson correlation of (x_{t-lag}, y_t).
    pub cc: f64,
    /// True when the unrestricted model fit the sample exactly (SSR = 0);
    /// `p_value` is then 0 by convention.
    pub degenerate: bool,
}

fn lag_design(y: &[f64], x: Option<&[f64]>, lag: usize) -> (Mat, Vec<f64>) {
    let t_len = y.len();
    let n = t_len - lag;
    let k = if x.is_some() { 1 + 2 * lag } else { 1 + lag };
    let mut design = Mat::zeros(n, k);
    let mut response = Vec::with_capacity(n);
    for (row, t) in (lag..t_len).enumerate() {
        design[(row, 0)] = 1.0;
        for l in 1..=lag {
            design[(row, l)] = y[t - l];
        }
        if let Some(xs) = x {
            for l in 1..=lag {
                design[(row, lag + l)] = xs[t - l];
            }
        }
        response.push(y[t]);
    }
    (design, response)
}

fn ssr_of(design: &Mat, response: &[f64]) -> Result<f64, EconError> {
    lstsq(design, response)
        .map(|f| f.residual_ssr)
        .map_err(|e| match e {
            LinalgError::RankDeficient { column } => EconError::RankDeficient { column },
            other => EconError::DomainError(other.to_string()),
        })
}

/// Tests whether `x` Granger-causes `y` at the given lag.
///
/// Both series must already be stationary-processed and aligned. The
/// restricted model regresses y_t on its own lags; the unrestricted model
/// adds the same number of lags of x; both are fit on the common sample
/// t = lag..T.
pub fn granger_test(x: &[f64], y: &[f64], lag: usize) -> Result<GrangerResult, EconError> {
    if lag == 0 {
        return Err(EconError::DomainError("granger lag must be >= 1".into()));
    }
    if x.len() != y.len() {
        return Err(EconError::DomainError(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let t_len = y.len();
    // Unrestricted model has 1 + 2*lag parameters over T - lag usable rows.
    let df_den = t_len as i64 - 3 * lag as i64 - 1;
    if df_den < 8 {
        return Err(EconError::InsufficientObservations {
            needed: 3 * lag + 9,
            got: t_len,
        });
    }
    let df_den = df_den as usize;

    let (design_r, response) = lag_design(y, None, lag);
    let (design_u, _) = lag_design(y, Some(x), lag);
    let ssr_r = ssr_of(&design_r, &response)?;
    let ssr_u = ssr_of(&design_u, &response)?;

    let cc = cross_correlation(x, y, lag)?;

    let scale = response.iter().map(|v| v * v).sum::<f64>().max(1.0);
    if ssr_u <= scale * 1e-14 {
        return Ok(GrangerResult {
            lag,
            f_stat: f64::INFINITY,
            p_value: 0.0,
            df_num: lag,
            df_den,
            cc,
            degenerate: true,
        });
    }

    let f_stat = ((ssr_r - ssr_u) / lag as f64) / (ssr_u / df_den as f64);
    let f_stat = f_stat.max(0.0); // guard tiny negative from rounding
    let p_value = f_p_value(f_stat, lag, df_den as f64)?;

    Ok(GrangerResult {
        lag,
        f_stat,
        p_value,
        df_num: lag,
        df_den,
        cc,
        degenerate: false,
    })
}

/// Picks the result with the smallest p-value; exact ties go to the
/// smaller lag.
pub fn best_by_p(results: Vec<GrangerResult>) -> Option<GrangerResult> {
    results.into_iter().min_by(|a, b| {
        a.p_value
            .partial_cmp(&b.p_value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.lag.cmp(&b.lag))
    })
}

/// Runs [`granger_test`] at each lag and keeps the smallest p-value,
/// breaking ties toward the smaller lag.
pub fn scan_lags(x: &[f64], y: &[f64], lags: &[usize]) -> Result<GrangerResult, EconError> {
    let mut results = Vec::with_capacity(lags.len());
    for &lag in lags {
        results.push(granger_test(x, y, lag)?);
    }
    best_by_p(results).ok_or_else(|| EconError::DomainError("empty lag set".into()))
}

/// Pearson correlation between x shifted forward by `lag` and y on the
/// overlap, i.e. over pairs (x_{t-lag}, y_t).
pub fn cross_correlation(x: &[f64], y: &[f64], lag: usize) -> Result<f64, EconError> {
    if x.len() != y.len() {
        return Err(EconError::DomainError(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let t_len = y.len();
    if t_len < lag + 3 {
        return Err(EconError::InsufficientObservations {
            needed: lag + 3,
            got: t_len,
        });
    }
    let shifted: Vec<f64> = x[..t_len - lag].to_vec();
    let target: Vec<f64> = y[lag..].to_vec();
    pearson(&shifted, &target)
}
