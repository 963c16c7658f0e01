use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semgen::{Dataset, NodeMatrix};

/// Feature groups entering `phi(V_i, C_i)`.
///
/// Column order: `[1, z, zbar, x_1..x_p, xbar_1..xbar_p, z*x1, x1^2, x2^2, x2^3]`,
/// with disabled groups skipped. The intercept is always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub v_linear: bool,
    pub c_linear: bool,
    pub z_x1: bool,
    pub x1_sq: bool,
    pub x2_sq: bool,
    pub x2_cube: bool,
}

/// Named presets accepted in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisPreset {
    #[default]
    Correct,
    Misspecified,
    Intercept,
}

impl From<BasisPreset> for BasisSpec {
    fn from(p: BasisPreset) -> Self {
        match p {
            BasisPreset::Correct => BasisSpec::correct(),
            BasisPreset::Misspecified => BasisSpec::misspecified(),
            BasisPreset::Intercept => BasisSpec::intercept_only(),
        }
    }
}

impl BasisSpec {
    pub fn correct() -> Self {
        BasisSpec {
            v_linear: true,
            c_linear: true,
            z_x1: true,
            x1_sq: true,
            x2_sq: true,
            x2_cube: true,
        }
    }

    /// Linear terms only: drops the four nonlinear terms of `correct`.
    pub fn misspecified() -> Self {
        BasisSpec {
            z_x1: false,
            x1_sq: false,
            x2_sq: false,
            x2_cube: false,
            ..Self::correct()
        }
    }

    pub fn intercept_only() -> Self {
        BasisSpec {
            v_linear: false,
            c_linear: false,
            ..Self::misspecified()
        }
    }

    /// Covariate columns the basis needs (`p` must be at least this).
    fn min_p(&self) -> usize {
        if self.x2_sq || self.x2_cube {
            2
        } else if self.z_x1 || self.x1_sq {
            1
        } else {
            0
        }
    }

    pub fn n_columns(&self, p: usize) -> usize {
        1 + 2 * usize::from(self.v_linear)
            + 2 * p * usize::from(self.c_linear)
            + [self.z_x1, self.x1_sq, self.x2_sq, self.x2_cube]
                .iter()
                .filter(|&&f| f)
                .count()
    }

    pub fn check(&self, p: usize) -> Result<()> {
        if p < self.min_p() {
            return Err(Error::Dimension(format!(
                "basis uses covariates up to x{} but the data has p = {p}",
                self.min_p()
            )));
        }
        Ok(())
    }

    /// Writes `phi(v_i, c_i)` into `out` (length `n_columns(p)`).
    #[inline]
    pub fn fill_row(&self, v_i: &[f64], c_i: &[f64], out: &mut [f64]) {
        let p = c_i.len() / 2;
        let mut k = 0;
        let mut push = |value: f64| {
            out[k] = value;
            k += 1;
        };
        push(1.0);
        if self.v_linear {
            push(v_i[0]);
            push(v_i[1]);
        }
        if self.c_linear {
            c_i.iter().for_each(|&c| push(c));
        }
        let z = v_i[0];
        if self.z_x1 {
            push(z * c_i[0]);
        }
        if self.x1_sq {
            push(c_i[0] * c_i[0]);
        }
        if self.x2_sq {
            push(c_i[1] * c_i[1]);
        }
        if self.x2_cube {
            push(c_i[1] * c_i[1] * c_i[1]);
        }
        debug_assert!(p >= self.min_p());
    }
}

/// Design matrix for summaries `v` (N x 2) and `c` (N x 2p).
pub fn design_from_summaries(
    v: &NodeMatrix,
    c: &NodeMatrix,
    basis: &BasisSpec,
) -> Result<DMatrix<f64>> {
    let p = c.cols() / 2;
    basis.check(p)?;
    if v.rows() != c.rows() {
        return Err(Error::Dimension("v and c row counts differ".into()));
    }
    let q = basis.n_columns(p);
    let mut row = vec![0.0; q];
    let mut phi = DMatrix::zeros(v.rows(), q);
    for i in 0..v.rows() {
        basis.fill_row(v.row(i), c.row(i), &mut row);
        for (j, &value) in row.iter().enumerate() {
            phi[(i, j)] = value;
        }
    }
    Ok(phi)
}

pub fn design_matrix(dataset: &Dataset, basis: &BasisSpec) -> Result<DMatrix<f64>> {
    design_from_summaries(dataset.v(), dataset.c(), basis)
}

/// `g(v, c) = phi(v, c) . coefficients`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBasisModel {
    pub basis: BasisSpec,
    pub coefficients: Vec<f64>,
}

impl LinearBasisModel {
    pub fn new(basis: BasisSpec, coefficients: Vec<f64>, p: usize) -> Result<Self> {
        basis.check(p)?;
        if coefficients.len() != basis.n_columns(p) {
            return Err(Error::Dimension(format!(
                "basis has {} columns, got {} coefficients",
                basis.n_columns(p),
                coefficients.len()
            )));
        }
        Ok(LinearBasisModel {
            basis,
            coefficients,
        })
    }

    pub fn constant(value: f64) -> Self {
        LinearBasisModel {
            basis: BasisSpec::intercept_only(),
            coefficients: vec![value],
        }
    }

    #[inline]
    pub fn evaluate(&self, v_i: &[f64], c_i: &[f64]) -> f64 {
        let mut buf = [0.0; 32];
        let q = self.coefficients.len();
        if q <= buf.len() {
            self.basis.fill_row(v_i, c_i, &mut buf[..q]);
            buf[..q]
                .iter()
                .zip(&self.coefficients)
                .map(|(a, b)| a * b)
                .sum()
        } else {
            let mut row = vec![0.0; q];
            self.basis.fill_row(v_i, c_i, &mut row);
            row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
        }
    }

    /// Per-node fitted values.
    pub fn evaluate_all(&self, v: &NodeMatrix, c: &NodeMatrix) -> Vec<f64> {
        (0..v.rows())
            .map(|i| self.evaluate(v.row(i), c.row(i)))
            .collect()
    }

    /// True when only the intercept is non-zero.
    pub fn is_constant(&self) -> bool {
        self.coefficients.iter().skip(1).all(|&b| b == 0.0)
    }
}
