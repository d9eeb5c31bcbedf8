//! The multivariate stage: standard scaling, PCA with an explained-variance
//! target, loading-based feature attribution, screened-feature selection,
//! and the one-lag VAR with joint significance.

use serde::Serialize;
use thiserror::Error;

use crate::econ::{f_p_value, ols_fit, EconError, GrangerResult, OlsResult};
use crate::linalg::{eigh, lstsq, LinalgError, Mat};

#[derive(Debug, Error)]
pub enum MultivarError {
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("insufficient observations: need {needed}, got {got}")]
    InsufficientObservations { needed: usize, got: usize },
    #[error("rank-deficient design at column {column}")]
    RankDeficient { column: usize },
    #[error(transparent)]
    Econ(#[from] EconError),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl From<LinalgError> for MultivarError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::Empty => MultivarError::EmptyMatrix,
            LinalgError::RankDeficient { column } => MultivarError::RankDeficient { column },
            other => MultivarError::Linalg(other.to_string()),
        }
    }
}

/// Column-standardized data plus the statistics that produced it.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub matrix: Mat,
    pub means: Vec<f64>,
    /// Population standard deviations of the kept columns.
    pub sds: Vec<f64>,
    pub kept_names: Vec<String>,
    /// Constant columns removed before scaling, named for the run report.
    pub dropped_names: Vec<String>,
}

/// Centers and scales every column to mean 0, population sd 1. Constant
/// columns cannot be scaled and are dropped with a warning entry.
pub fn standardize(matrix: &Mat, names: &[String]) -> Result<Standardized, MultivarError> {
    let n = matrix.rows();
    let p = matrix.cols();
    if n == 0 || p == 0 {
        return Err(MultivarError::EmptyMatrix);
    }
    assert_eq!(names.len(), p, "one name per column");

    let mut kept_cols: Vec<Vec<f64>> = Vec::new();
    let mut means = Vec::new();
    let mut sds = Vec::new();
    let mut kept_names = Vec::new();
    let mut dropped_names = Vec::new();

    for (j, name) in names.iter().enumerate() {
        let col = matrix.col(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let scale = col.iter().map(|v| v * v).sum::<f64>() / n as f64;
        if var <= scale.max(1.0) * 1e-14 {
            dropped_names.push(name.clone());
            continue;
        }
        let sd = var.sqrt();
        kept_cols.push(col.iter().map(|v| (v - mean) / sd).collect());
        means.push(mean);
        sds.push(sd);
        kept_names.push(name.clone());
    }

    if kept_cols.is_empty() {
        return Err(MultivarError::EmptyMatrix);
    }
    Ok(Standardized {
        matrix: Mat::from_cols(&kept_cols)?,
        means,
        sds,
        kept_names,
        dropped_names,
    })
}

#[derive(Debug, Clone)]
pub struct PcaModel {
    /// All principal axes, one component per row, in descending
    /// explained-variance order.
    pub component_vectors: Mat,
    /// Ratios for every component; sums to 1.
    pub explained_variance_ratios: Vec<f64>,
    /// Smallest k whose cumulative ratio reaches the variance target.
    pub n_components: usize,
    pub feature_names: Vec<String>,
}

/// PCA via eigendecomposition of the covariance of standardized data.
pub fn pca_fit(
    standardized: &Mat,
    feature_names: &[String],
    variance_target: f64,
) -> Result<PcaModel, MultivarError> {
    let n = standardized.rows();
    let p = standardized.cols();
    if n == 0 || p == 0 {
        return Err(MultivarError::EmptyMatrix);
    }

    // Population covariance; on standardized input this is the correlation
    // matrix.
    let mut cov = Mat::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut s = 0.0;
            for row in 0..n {
                s += standardized[(row, i)] * standardized[(row, j)];
            }
            let v = s / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let (eigenvalues, vectors) = eigh(&cov)?;
    let total: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();
    if total <= 0.0 {
        return Err(MultivarError::EmptyMatrix);
    }
    let ratios: Vec<f64> = eigenvalues.iter().map(|v| v.max(0.0) / total).collect();

    let mut n_components = p;
    let mut cum = 0.0;
    for (k, ratio) in ratios.iter().enumerate() {
        cum += ratio;
        if cum >= variance_target - 1e-12 {
            n_components = k + 1;
            break;
        }
    }

    // Components as rows, sign-fixed so the dominant loading is positive.
    let mut components = Mat::zeros(p, p);
    for comp in 0..p {
        let mut dominant = 0;
        for j in 1..p {
            if vectors[(j, comp)].abs() > vectors[(dominant, comp)].abs() {
                dominant = j;
            }
        }
        let sign = if vectors[(dominant, comp)] < 0.0 {
            -1.0
        } else {
            1.0
        };
        for j in 0..p {
            components[(comp, j)] = sign * vectors[(j, comp)];
        }
    }

    Ok(PcaModel {
        component_vectors: components,
        explained_variance_ratios: ratios,
        n_components,
        feature_names: feature_names.to_vec(),
    })
}

/// Maps each retained component back to the original feature with the
/// largest absolute loading; duplicates collapse, preserving component
/// order.
pub fn attribute_features(model: &PcaModel) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for comp in 0..model.n_components {
        let mut best = 0;
        for j in 1..model.feature_names.len() {
            if model.component_vectors[(comp, j)].abs()
                > model.component_vectors[(comp, best)].abs()
            {
                best = j;
            }
        }
        let name = &model.feature_names[best];
        if !out.contains(name) {
            out.push(name.clone());
        }
    }
    out
}

/// A screened topic-sentiment series entering feature selection.
#[derive(Debug, Clone)]
pub struct ScreenedSeries {
    pub name: String,
    pub values: Vec<f64>,
    pub granger: GrangerResult,
}

#[derive(Debug, Clone)]
pub struct SelectedFeatures {
    pub features: Vec<ScreenedSeries>,
    /// Set when fewer than the requested k features survived.
    pub fewer_than_k: bool,
}

fn screen_rank(a: &ScreenedSeries, b: &ScreenedSeries) -> std::cmp::Ordering {
    b.granger
        .cc
        .abs()
        .partial_cmp(&a.granger.cc.abs())
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(
            a.granger
                .p_value
                .partial_cmp(&b.granger.p_value)
                .unwrap_or(std::cmp::Ordering::Equal),
        )
        .then(a.name.cmp(&b.name))
}

/// Picks the k most explanatory screened series: ranked by |cc| (ties by
/// smaller p, then name), after dropping series that PCA marks as redundant
/// (only each component's dominant loader survives).
pub fn select_features(
    screened: &[ScreenedSeries],
    k: usize,
    variance_target: f64,
) -> Result<SelectedFeatures, MultivarError> {
    if screened.is_empty() {
        return Err(MultivarError::EmptyMatrix);
    }
    let mut ranked: Vec<ScreenedSeries> = screened.to_vec();
    ranked.sort_by(screen_rank);

    let survivors: Vec<ScreenedSeries> = if ranked.len() > 1 {
        let names: Vec<String> = ranked.iter().map(|s| s.name.clone()).collect();
        let cols: Vec<Vec<f64>> = ranked.iter().map(|s| s.values.clone()).collect();
        let matrix = Mat::from_cols(&cols)?;
        let std = standardize(&matrix, &names)?;
        let pca = pca_fit(&std.matrix, &std.kept_names, variance_target)?;
        let reps = attribute_features(&pca);
        ranked
            .into_iter()
            .filter(|s| reps.contains(&s.name))
            .collect()
    } else {
        ranked
    };

    let fewer_than_k = survivors.len() < k;
    let features = survivors.into_iter().take(k).collect();
    Ok(SelectedFeatures {
        features,
        fewer_than_k,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VarResult {
    pub selected_features: Vec<String>,
    pub lag: usize,
    /// One row per equation (sentiment first, then features); columns are
    /// intercept followed by the lag-1 coefficient of each variable in the
    /// same order.
    pub coefficient_matrix: Vec<Vec<f64>>,
    /// F-test p-value for jointly excluding every feature lag from the
    /// sentiment equation.
    pub joint_p: f64,
    /// OLS of sentiment on its VAR fitted values; carries the reported r
    /// and r-squared.
    pub fit: OlsResult,
}

/// Fits a VAR(1) over sentiment plus the selected features.
pub fn var_fit(
    sentiment: &[f64],
    features: &[(String, Vec<f64>)],
    lag: usize,
) -> Result<VarResult, MultivarError> {
    assert_eq!(lag, 1, "the pipeline fixes the VAR at one lag");
    let t_len = sentiment.len();
    for (name, values) in features {
        if values.len() != t_len {
            return Err(MultivarError::Linalg(format!(
                "feature {name} has {} observations, sentiment has {t_len}",
                values.len()
            )));
        }
    }
    let m = features.len();
    let n = t_len.saturating_sub(1);
    let needed = 4 * (m + 1);
    if n < needed.max(m + 3) {
        return Err(MultivarError::InsufficientObservations {
            needed: needed.max(m + 3),
            got: n,
        });
    }

    // Shared design: intercept + one lag of every variable.
    let k_vars = m + 1;
    let mut design = Mat::zeros(n, k_vars + 1);
    for row in 0..n {
        design[(row, 0)] = 1.0;
        design[(row, 1)] = sentiment[row];
        for (j, (_, values)) in features.iter().enumerate() {
            design[(row, 2 + j)] = values[row];
        }
    }

    let mut coefficient_matrix = Vec::with_capacity(k_vars);
    let mut sentiment_fitted = Vec::new();
    let mut sentiment_ssr_u = 0.0;
    for eq in 0..k_vars {
        let response: Vec<f64> = (1..t_len)
            .map(|t| {
                if eq == 0 {
                    sentiment[t]
                } else {
                    features[eq - 1].1[t]
                }
            })
            .collect();
        let fit = lstsq(&design, &response).map_err(MultivarError::from)?;
        if eq == 0 {
            sentiment_fitted = fit.fitted.clone();
            sentiment_ssr_u = fit.residual_ssr;
        }
        coefficient_matrix.push(fit.coefficients);
    }

    // Joint exclusion test on the sentiment equation.
    let response: Vec<f64> = sentiment[1..].to_vec();
    let mut restricted = Mat::zeros(n, 2);
    for row in 0..n {
        restricted[(row, 0)] = 1.0;
        restricted[(row, 1)] = sentiment[row];
    }
    let restricted_fit = lstsq(&restricted, &response).map_err(MultivarError::from)?;
    let df_den = n as i64 - (k_vars + 1) as i64;
    if df_den < 1 {
        return Err(MultivarError::InsufficientObservations {
            needed: k_vars + 2,
            got: n,
        });
    }
    let scale = response.iter().map(|v| v * v).sum::<f64>().max(1.0);
    let joint_p = if sentiment_ssr_u <= scale * 1e-14 {
        0.0
    } else {
        let f = ((restricted_fit.residual_ssr - sentiment_ssr_u) / m as f64)
            / (sentiment_ssr_u / df_den as f64);
        f_p_value(f.max(0.0), m, df_den as f64)?
    };

    let fitted_design = Mat::from_cols(&[sentiment_fitted])?;
    let fit = ols_fit(&fitted_design, &response)?;

    Ok(VarResult {
        selected_features: features.iter().map(|(name, _)| name.clone()).collect(),
        lag,
        coefficient_matrix,
        joint_p,
        fit,
    })
}
