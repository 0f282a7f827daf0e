//! Least-squares solver: Householder QR with a ridge fallback on rank
//! deficiency.
//!
//! Randomized controls can produce near-collinear design columns (a path
//! with `a = 0` pins `pi = 0`, absorbed wealth pins whole monomial blocks),
//! so the solver detects a collapsing pivot and falls back to a lightly
//! regularized normal-equations solve instead of returning garbage
//! coefficients. The fallback is recorded on the fitted model.

use serde::{Deserialize, Serialize};

use super::basis::BasisSpec;
use crate::{GmwbError, Result};

/// A fitted polynomial regression: coefficients aligned to the basis terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OlsModel {
    pub basis: BasisSpec,
    pub coef: Vec<f64>,
    /// Ridge parameter actually used; `None` when the plain QR solve held.
    pub ridge: Option<f64>,
}

impl OlsModel {
    pub fn predict(&self, w: f64, a: f64, pi: f64, r: f64) -> f64 {
        let mut row = vec![0.0; self.basis.len()];
        self.basis.eval_into(&mut row, w, a, pi, r);
        dot(&self.coef, &row)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw least-squares coefficients for a row-major `n_rows x n_cols` design.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub ridge: Option<f64>,
}

/// Solves `min ||design beta - targets||_2`.
///
/// Householder QR without forming Q; if any pivot collapses below
/// `1e-10 x` the largest column norm, the solve restarts as
/// `(X'X + lambda I) beta = X'y` with `lambda = 1e-8 x mean(diag(X'X))`.
pub fn ols_fit(design: &[f64], n_rows: usize, n_cols: usize, targets: &[f64]) -> Result<OlsFit> {
    if n_rows == 0 || n_cols == 0 {
        return Err(GmwbError::Regression("empty design matrix".into()));
    }
    if design.len() != n_rows * n_cols || targets.len() != n_rows {
        return Err(GmwbError::Regression(format!(
            "shape mismatch: design {} for {n_rows}x{n_cols}, targets {}",
            design.len(),
            targets.len()
        )));
    }
    if n_rows < n_cols {
        return Err(GmwbError::Regression(format!(
            "underdetermined system: {n_rows} rows for {n_cols} columns"
        )));
    }
    if design.iter().any(|x| !x.is_finite()) || targets.iter().any(|x| !x.is_finite()) {
        return Err(GmwbError::Regression("non-finite entries in design or targets".into()));
    }

    if let Some(coef) = householder_solve(design, n_rows, n_cols, targets) {
        return Ok(OlsFit { coef, ridge: None });
    }

    let (gram, xty, mean_diag) = normal_equations(design, n_rows, n_cols, targets);
    let lambda = 1e-8 * mean_diag;
    let mut regularized = gram;
    for j in 0..n_cols {
        regularized[j * n_cols + j] += lambda;
    }
    let coef = cholesky_solve(&regularized, n_cols, &xty).ok_or_else(|| {
        GmwbError::Regression("ridge-regularized normal equations are singular".into())
    })?;
    Ok(OlsFit {
        coef,
        ridge: Some(lambda),
    })
}

/// In-place Householder QR least squares. Returns `None` on rank deficiency.
fn householder_solve(design: &[f64], m: usize, n: usize, targets: &[f64]) -> Option<Vec<f64>> {
    // Column-major working copy; reflectors overwrite the strict lower part.
    let mut a = vec![0.0f64; m * n];
    for i in 0..m {
        for j in 0..n {
            a[j * m + i] = design[i * n + j];
        }
    }
    let mut y = targets.to_vec();
    let mut r_diag = vec![0.0f64; n];

    let max_col_norm = (0..n)
        .map(|j| a[j * m..j * m + m].iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    let tol = 1e-10 * max_col_norm.max(f64::MIN_POSITIVE);

    for k in 0..n {
        let col = &a[k * m..(k + 1) * m];
        let norm = col[k..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= tol {
            return None;
        }
        let alpha = if col[k] >= 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place of the column tail.
        let v0 = col[k] - alpha;
        let beta = 1.0 / (alpha * v0); // equals -2 / (v'v) for Householder v
        a[k * m + k] = v0;
        r_diag[k] = alpha;

        for j in k + 1..n {
            let (head, tail) = a.split_at_mut(j * m);
            let v = &head[k * m + k..k * m + m];
            let cj = &mut tail[k..m];
            let s: f64 = v.iter().zip(cj.iter()).map(|(vi, ci)| vi * ci).sum();
            let scale = s * beta;
            for (vi, ci) in v.iter().zip(cj.iter_mut()) {
                *ci += scale * vi;
            }
        }
        {
            let v = &a[k * m + k..k * m + m];
            let s: f64 = v.iter().zip(y[k..].iter()).map(|(vi, yi)| vi * yi).sum();
            let scale = s * beta;
            for (vi, yi) in v.iter().zip(y[k..].iter_mut()) {
                *yi += scale * vi;
            }
        }
    }

    // Back-substitution on R (upper triangle above the stored reflectors).
    let mut coef = vec![0.0f64; n];
    for k in (0..n).rev() {
        let mut acc = y[k];
        for j in k + 1..n {
            acc -= a[j * m + k] * coef[j];
        }
        coef[k] = acc / r_diag[k];
    }
    Some(coef)
}

/// Builds `X'X` (row-major n x n), `X'y`, and the mean of the Gram diagonal.
fn normal_equations(design: &[f64], m: usize, n: usize, targets: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let mut gram = vec![0.0f64; n * n];
    let mut xty = vec![0.0f64; n];
    for i in 0..m {
        let row = &design[i * n..(i + 1) * n];
        for j in 0..n {
            xty[j] += row[j] * targets[i];
            for k in j..n {
                gram[j * n + k] += row[j] * row[k];
            }
        }
    }
    for j in 0..n {
        for k in 0..j {
            gram[j * n + k] = gram[k * n + j];
        }
    }
    let mean_diag = (0..n).map(|j| gram[j * n + j]).sum::<f64>() / n as f64;
    (gram, xty, mean_diag)
}

/// Cholesky solve for a symmetric positive-definite system.
fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut z = vec![0.0f64; n];
    for i in 0..n {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l[i * n + k] * z[k];
        }
        z[i] = acc / l[i * n + i];
    }
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut acc = z[i];
        for k in i + 1..n {
            acc -= l[k * n + i] * x[k];
        }
        x[i] = acc / l[i * n + i];
    }
    Some(x)
}
