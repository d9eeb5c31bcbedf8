//! Small dense linear algebra: row-major matrices, Householder QR least
//! squares, and a cyclic Jacobi eigensolver for symmetric matrices.
//!
//! The design matrices here are tiny (tens of columns at most), so a plain
//! `Vec<f64>` backing with deterministic, allocation-light algorithms beats
//! pulling in a LAPACK binding.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is empty")]
    Empty,
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(LinalgError::Empty);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(LinalgError::Shape(format!(
                    "ragged rows: expected {cols}, got {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds a matrix whose columns are the given series.
    pub fn from_cols(cols: &[Vec<f64>]) -> Result<Self, LinalgError> {
        if cols.is_empty() || cols[0].is_empty() {
            return Err(LinalgError::Empty);
        }
        let n = cols[0].len();
        if cols.iter().any(|c| c.len() != n) {
            return Err(LinalgError::Shape("ragged columns".into()));
        }
        let mut m = Mat::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Least-squares solution of `X b = y` by Householder QR.
pub struct LstsqFit {
    pub coefficients: Vec<f64>,
    pub residual_ssr: f64,
    pub fitted: Vec<f64>,
    /// Diagonal of (X'X)^-1, for coefficient standard errors.
    pub xtx_inv_diag: Vec<f64>,
}

/// Solves min ||X b - y||^2 without forming the normal equations.
///
/// Returns `RankDeficient` when an R diagonal entry collapses relative to
/// the column scale, which is how collinear designs surface.
pub fn lstsq(x: &Mat, y: &[f64]) -> Result<LstsqFit, LinalgError> {
    let n = x.rows();
    let p = x.cols();
    if n == 0 || p == 0 {
        return Err(LinalgError::Empty);
    }
    if y.len() != n {
        return Err(LinalgError::Shape(format!(
            "y has {} rows, X has {n}",
            y.len()
        )));
    }
    if n < p {
        return Err(LinalgError::Shape(format!(
            "underdetermined: {n} rows, {p} cols"
        )));
    }

    // Work on copies; r becomes R in place, qty accumulates Q'y.
    let mut r = x.clone();
    let mut qty = y.to_vec();

    let col_scale = (0..p)
        .map(|j| (0..n).map(|i| r[(i, j)] * r[(i, j)]).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max)
        .max(1e-300);

    for k in 0..p {
        // Householder vector for column k below the diagonal.
        let mut norm = 0.0;
        for i in k..n {
            norm += r[(i, k)] * r[(i, k)];
        }
        let norm = norm.sqrt();
        if norm < col_scale * 1e-12 {
            return Err(LinalgError::RankDeficient { column: k });
        }
        let alpha = if r[(k, k)] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - k];
        v[0] = r[(k, k)] - alpha;
        for i in k + 1..n {
            v[i - k] = r[(i, k)];
        }
        let vtv: f64 = v.iter().map(|a| a * a).sum();
        if vtv == 0.0 {
            continue;
        }
        // Apply H = I - 2 v v'/v'v to remaining columns and to qty.
        for j in k..p {
            let dot: f64 = (k..n).map(|i| v[i - k] * r[(i, j)]).sum();
            let scale = 2.0 * dot / vtv;
            for i in k..n {
                r[(i, j)] -= scale * v[i - k];
            }
        }
        let dot: f64 = (k..n).map(|i| v[i - k] * qty[i]).sum();
        let scale = 2.0 * dot / vtv;
        for i in k..n {
            qty[i] -= scale * v[i - k];
        }
        r[(k, k)] = alpha;
        for i in k + 1..n {
            r[(i, k)] = 0.0;
        }
    }

    for k in 0..p {
        if r[(k, k)].abs() < col_scale * 1e-12 {
            return Err(LinalgError::RankDeficient { column: k });
        }
    }

    // Back-substitute R b = Q'y (top p rows).
    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = qty[k];
        for j in k + 1..p {
            s -= r[(k, j)] * beta[j];
        }
        beta[k] = s / r[(k, k)];
    }

    // (X'X)^-1 = R^-1 R^-T; we only need its diagonal.
    // Column j of R^-1 solves R u = e_j.
    let mut xtx_inv_diag = vec![0.0; p];
    let mut rinv = Mat::zeros(p, p);
    for j in 0..p {
        let mut u = vec![0.0; p];
        u[j] = 1.0;
        for k in (0..=j).rev() {
            let mut s = u[k];
            for m in k + 1..p {
                s -= r[(k, m)] * rinv[(m, j)];
            }
            rinv[(k, j)] = s / r[(k, k)];
            u[k] = 0.0;
        }
    }
    for i in 0..p {
        xtx_inv_diag[i] = (i..p).map(|j| rinv[(i, j)] * rinv[(i, j)]).sum();
    }

    let fitted = x.mul_vec(&beta);
    let residual_ssr = fitted
        .iter()
        .zip(y)
        .map(|(f, yi)| (yi - f) * (yi - f))
        .sum();

    Ok(LstsqFit {
        coefficients: beta,
        residual_ssr,
        fitted,
        xtx_inv_diag,
    })
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order with matching eigenvectors as
/// columns of the returned matrix. Deterministic: sweep order is fixed and
/// ties sort by original index.
pub fn eigh(a: &Mat) -> Result<(Vec<f64>, Mat), LinalgError> {
    let n = a.rows();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    if a.cols() != n {
        return Err(LinalgError::Shape(format!(
            "not square: {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let mut m = a.clone();
    let mut v = Mat::zeros(n, n);
    for i in 0..n {
        v[(i, i)] = 1.0;
    }

    let off = |m: &Mat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s
    };

    let scale: f64 = (0..n).map(|i| m[(i, i)].abs()).fold(1e-300, f64::max);
    let tol = (scale * 1e-14).powi(2);

    for _sweep in 0..100 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= scale * 1e-15 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .partial_cmp(&m[(i, i)])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new_j)] = v[(i, old_j)];
        }
    }
    Ok((eigenvalues, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_exact_fit() {
        // y = 1 + 2 x
        let x = Mat::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
            vec![1.0, 3.0],
        ])
        .unwrap();
        let y = [1.0, 3.0, 5.0, 7.0];
        let fit = lstsq(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.residual_ssr < 1e-20);
    }

    #[test]
    fn lstsq_detects_collinearity() {
        let x = Mat::from_rows(&[
            vec![1.0, 2.0, 4.0],
            vec![1.0, 3.0, 6.0],
            vec![1.0, 4.0, 8.0],
            vec![1.0, 5.0, 10.0],
        ])
        .unwrap();
        let y = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            lstsq(&x, &y),
            Err(LinalgError::RankDeficient { .. })
        ));
    }

    #[test]
    fn lstsq_residuals_orthogonal_to_design() {
        let x = Mat::from_rows(&[
            vec![1.0, 0.3, -1.2],
            vec![1.0, 1.7, 0.4],
            vec![1.0, -0.6, 2.2],
            vec![1.0, 0.9, -0.5],
            vec![1.0, 2.4, 1.1],
            vec![1.0, -1.3, 0.7],
        ])
        .unwrap();
        let y = [0.2, 1.4, -0.7, 0.9, 2.2, -0.4];
        let fit = lstsq(&x, &y).unwrap();
        for j in 0..x.cols() {
            let dot: f64 = (0..x.rows())
                .map(|i| (y[i] - fit.fitted[i]) * x[(i, j)])
                .sum();
            assert!(dot.abs() < 1e-10, "column {j} not orthogonal: {dot}");
        }
    }

    #[test]
    fn eigh_recovers_diagonal() {
        let mut a = Mat::zeros(3, 3);
        a[(0, 0)] = 3.0;
        a[(1, 1)] = 1.0;
        a[(2, 2)] = 2.0;
        let (vals, vecs) = eigh(&a).unwrap();
        assert_eq!(vals, vec![3.0, 2.0, 1.0]);
        // eigenvectors are signed unit basis vectors
        assert!((vecs[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((vecs[(2, 1)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_orthonormal_and_reconstructs() {
        let a = Mat::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, -0.7],
            vec![0.5, -0.7, 2.0],
        ])
        .unwrap();
        let (vals, vecs) = eigh(&a).unwrap();
        // V'V = I
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| vecs[(k, i)] * vecs[(k, j)]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
        // A v = lambda v
        for j in 0..3 {
            let v: Vec<f64> = (0..3).map(|i| vecs[(i, j)]).collect();
            let av = a.mul_vec(&v);
            for i in 0..3 {
                assert!((av[i] - vals[j] * v[i]).abs() < 1e-9);
            }
        }
    }
}
