//! Ordinary least squares with fit-quality statistics.

use serde::Serialize;

use super::dist::f_p_value;
use super::EconError;
use crate::linalg::{lstsq, LinalgError, Mat};

/// Fitted regression with the statistics the screening reports carry.
#[derive(Debug, Clone, Serialize)]
pub struct OlsResult {
    /// Intercept first, then one coefficient per predictor column.
    pub coefficients: Vec<f64>,
    /// Pearson correlation of fitted vs actual.
    pub r: f64,
    pub r_squared: f64,
    /// Overall-F p-value against the intercept-only model.
    pub p_value: f64,
    pub residual_ssr: f64,
    /// Set when the fit is degenerate (zero-variance response or perfect
    /// fit), in which case `p_value` is reported by convention.
    pub degenerate: bool,
}

/// Pearson correlation. Errors on zero variance in either input.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EconError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(EconError::InsufficientObservations {
            needed: 2,
            got: x.len().min(y.len()),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EconError::ZeroVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Fits `y` on the columns of `predictors` plus an internally added
/// intercept, via QR rather than the normal equations.
pub fn ols_fit(predictors: &Mat, y: &[f64]) -> Result<OlsResult, EconError> {
    let n = predictors.rows();
    let k = predictors.cols();
    if y.len() != n {
        return Err(EconError::DomainError(format!(
            "response has {} rows, design has {n}",
            y.len()
        )));
    }
    if n <= k + 1 {
        return Err(EconError::InsufficientObservations {
            needed: k + 2,
            got: n,
        });
    }

    let mut design = Mat::zeros(n, k + 1);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for j in 0..k {
            design[(i, j + 1)] = predictors[(i, j)];
        }
    }

    let fit = lstsq(&design, y).map_err(|e| match e {
        LinalgError::RankDeficient { column } => EconError::RankDeficient { column },
        other => EconError::DomainError(other.to_string()),
    })?;

    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    let ssr = fit.residual_ssr;

    // Degenerate cases: constant response, or an exact fit. Both make the
    // F ratio undefined; report by convention and flag it.
    let scale = sst.max(y.iter().map(|v| v * v).sum::<f64>()).max(1.0);
    if sst <= scale * 1e-14 {
        return Ok(OlsResult {
            coefficients: fit.coefficients,
            r: 0.0,
            r_squared: 0.0,
            p_value: 1.0,
            residual_ssr: ssr,
            degenerate: true,
        });
    }
    if ssr <= sst * 1e-14 {
        return Ok(OlsResult {
            coefficients: fit.coefficients,
            r: 1.0,
            r_squared: 1.0,
            p_value: 0.0,
            residual_ssr: ssr,
            degenerate: true,
        });
    }

    let r = pearson(&fit.fitted, y)?;
    let r_squared = 1.0 - ssr / sst;
    let df_num = k;
    let df_den = (n - k - 1) as f64;
    let f = ((sst - ssr) / df_num as f64) / (ssr / df_den);
    let p_value = f_p_value(f, df_num, df_den)?;

    Ok(OlsResult {
        coefficients: fit.coefficients,
        r,
        r_squared,
        p_value,
        residual_ssr: ssr,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: &[Vec<f64>]) -> Mat {
        Mat::from_cols(cols).unwrap()
    }

    #[test]
    fn exact_linear_fit() {
        let x = design(&[vec![0.0, 1.0, 2.0, 3.0, 4.0]]);
        let y: Vec<f64> = (0..5).map(|i| 2.0 + 3.0 * i as f64).collect();
        let res = ols_fit(&x, &y).unwrap();
        assert!((res.r_squared - 1.0).abs() < 1e-12);
        assert!(res.residual_ssr < 1e-18);
        assert!(res.p_value < 1e-10);
        assert!(res.degenerate);
    }

    #[test]
    fn orthogonal_response() {
        // y orthogonal to the centered predictor: slope 0, r^2 ~ 0.
        let x = design(&[vec![-2.0, -1.0, 0.0, 1.0, 2.0, -2.0, -1.0, 0.0, 1.0, 2.0]]);
        let y = vec![1.0, -1.0, 0.0, -1.0, 1.0, 1.0, -1.0, 0.0, -1.0, 1.0];
        let res = ols_fit(&x, &y).unwrap();
        assert!(res.coefficients[1].abs() < 1e-12);
        assert!(res.r_squared.abs() < 1e-12);
    }

    #[test]
    fn r_squared_is_r_squared_single_predictor() {
        let x = design(&[vec![0.1, 0.9, 1.7, 2.2, 3.4, 4.1, 5.3]]);
        let y = vec![0.3, 1.2, 1.4, 2.9, 3.1, 4.4, 4.8];
        let res = ols_fit(&x, &y).unwrap();
        assert!((res.r_squared - res.r * res.r).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_error() {
        let c1 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let c2: Vec<f64> = c1.iter().map(|v| 2.0 * v).collect();
        let x = design(&[c1, c2]);
        let y = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(matches!(
            ols_fit(&x, &y),
            Err(EconError::RankDeficient { .. })
        ));
    }

    #[test]
    fn constant_response_flagged() {
        let x = design(&[vec![1.0, 2.0, 3.0, 4.0, 5.0]]);
        let y = vec![2.0; 5];
        let res = ols_fit(&x, &y).unwrap();
        assert!(res.degenerate);
        assert_eq!(res.p_value, 1.0);
        assert!(res.coefficients[1].abs() < 1e-12);
    }
}
