//! Univariate and bivariate statistics: stationarity testing and repair,
//! Granger screening, lagged cross-correlation, OLS, two-sample t-tests,
//! and the distribution functions behind their p-values.
//!
//! Everything here is a pure function over immutable inputs; callers may
//! fan out across series and states freely.

use thiserror::Error;

pub mod adf;
pub mod dist;
pub mod granger;
pub mod ols;
pub mod ttest;

pub use adf::{adf_test, critical_values, make_stationary, schwert_max_lag, AdfResult, Transform};
pub use dist::{f_p_value, inc_beta, ln_gamma, t_p_value};
pub use granger::{cross_correlation, granger_test, scan_lags, GrangerResult};
pub use ols::{ols_fit, pearson, OlsResult};
pub use ttest::{t_test, welch_t_test, TTestResult, VarianceAssumption};

/// Benjamini-Hochberg step-up adjustment. Off by default everywhere; the
/// screening tables report raw p-values unless explicitly enabled.
pub fn bh_adjust(p_values: &[f64]) -> Vec<f64> {
    let n = p_values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        p_values[a]
            .partial_cmp(&p_values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut adjusted = vec![0.0; n];
    let mut running_min = 1.0f64;
    for (rank, &idx) in order.iter().enumerate().rev() {
        let candidate = (p_values[idx] * n as f64 / (rank + 1) as f64).min(1.0);
        running_min = running_min.min(candidate);
        adjusted[idx] = running_min;
    }
    adjusted
}

#[derive(Debug, Error, PartialEq)]
pub enum EconError {
    #[error("series too short: need {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("series has zero variance")]
    ConstantSeries,
    #[error("insufficient observations: need {needed}, got {got}")]
    InsufficientObservations { needed: usize, got: usize },
    #[error("design matrix is rank deficient at column {column}; reduce collinear features first")]
    RankDeficient { column: usize },
    #[error("sample too small: need {needed} per group, got {got}")]
    SampleTooSmall { needed: usize, got: usize },
    #[error("both samples are constant")]
    BothConstant,
    #[error("zero variance in correlation input")]
    ZeroVariance,
    #[error("domain error: {0}")]
    DomainError(String),
}
