use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest acceptable squared pivot ratio of the Cholesky factor.
const PIVOT_RATIO: f64 = 1e-13;

/// Minimizes `||r - Phi b||^2 + lambda ||b_{-0}||^2` in closed form; column 0
/// is treated as the (unpenalized) intercept.
pub fn ridge_fit(phi: &DMatrix<f64>, target: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if phi.nrows() != target.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows, target has {}",
            phi.nrows(),
            target.len()
        )));
    }
    let r = DVector::from_column_slice(target);
    let gram = phi.tr_mul(phi);
    let rhs = phi.tr_mul(&r);
    Ok(solve_penalized(gram, &rhs, lambda)?.as_slice().to_vec())
}

/// Solves `(G + lambda D) b = rhs`, `D = diag(0, 1, ..., 1)`.
pub(crate) fn solve_penalized(
    mut gram: DMatrix<f64>,
    rhs: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    let factor = penalized_cholesky(&mut gram, lambda)?;
    Ok(factor.solve(rhs))
}

pub(crate) fn penalized_cholesky(
    gram: &mut DMatrix<f64>,
    lambda: f64,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge penalty must be >= 0, got {lambda}"
        )));
    }
    for j in 1..gram.ncols() {
        gram[(j, j)] += lambda;
    }
    let factor = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("normal equations are not positive definite".into()))?;
    let diag = factor.l_dirty().diagonal();
    let max = diag.iter().fold(0.0f64, |m, &d| m.max(d * d));
    let min = diag.iter().fold(f64::INFINITY, |m, &d| m.min(d * d));
    if min <= PIVOT_RATIO * max {
        return Err(Error::Singular(format!(
            "design is numerically rank deficient (pivot ratio {:.1e})",
            min / max
        )));
    }
    Ok(factor)
}

/// Column centering/scaling used to condition the penalty; the intercept
/// column is left untouched.
#[derive(Debug, Clone)]
pub(crate) struct Standardizer {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(phi: &DMatrix<f64>) -> Self {
        let n = phi.nrows() as f64;
        let mut means = vec![0.0; phi.ncols()];
        let mut scales = vec![1.0; phi.ncols()];
        for j in 1..phi.ncols() {
            let col = phi.column(j);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            means[j] = mean;
            // Constant columns are only centered; they become exact zeros.
            if var > 0.0 {
                scales[j] = var.sqrt();
            }
        }
        Standardizer { means, scales }
    }

    pub fn apply(&self, phi: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = phi.clone();
        for j in 1..out.ncols() {
            for v in out.column_mut(j).iter_mut() {
                *v = (*v - self.means[j]) / self.scales[j];
            }
        }
        out
    }

    /// Maps standardized-scale coefficients back to the raw columns.
    pub fn unscale(&self, beta: &[f64]) -> Vec<f64> {
        let mut raw = beta.to_vec();
        for j in 1..raw.len() {
            raw[j] = beta[j] / self.scales[j];
            raw[0] -= raw[j] * self.means[j];
        }
        raw
    }
}

/// Ridge fit on standardized columns, reported on the original scale.
pub fn ridge_fit_standardized(phi: &DMatrix<f64>, target: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let s = Standardizer::fit(phi);
    let beta = ridge_fit(&s.apply(phi), target, lambda)?;
    Ok(s.unscale(&beta))
}
