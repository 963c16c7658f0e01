use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initfit::{InitialEstimate, LinearBasisModel};
use crate::netgraph::{dot, RowStochasticW};
use crate::semgen::Dataset;

/// `r_hat0 = (I - rho W) y`.
pub fn residualize(dataset: &Dataset, rho: f64) -> Result<Vec<f64>> {
    let w = &dataset.network().w;
    w.check_rho(rho)?;
    let y = dataset.y();
    if rho == 0.0 {
        return Ok(y.to_vec());
    }
    let wy = w.mul(y);
    Ok(y.iter().zip(&wy).map(|(y, u)| y - rho * u).collect())
}

/// Least-squares fluctuation coefficient along `omega`:
/// `t* = omega'(r - g0) / omega'omega`.
pub fn target_step(r_hat0: &[f64], g0_values: &[f64], omega: &[f64]) -> Result<f64> {
    if r_hat0.len() != omega.len() || g0_values.len() != omega.len() {
        return Err(Error::Dimension("targeting inputs differ in length".into()));
    }
    let norm2 = dot(omega, omega);
    if norm2 <= 0.0 {
        return Err(Error::Singular("adjustment direction is zero".into()));
    }
    let num: f64 = omega
        .iter()
        .zip(r_hat0.iter().zip(g0_values))
        .map(|(w, (r, g))| w * (r - g))
        .sum();
    Ok(num / norm2)
}

/// Outcome model `g_t(v, c)_i = g0(v, c) + t * omega_i` together with the
/// peer-effect estimate it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetedModel {
    pub rho_hat0: f64,
    pub g0: LinearBasisModel,
    pub omega: Vec<f64>,
    pub t_star: f64,
}

impl TargetedModel {
    /// Model with an explicit fluctuation `t` (use 0 for the untargeted fit).
    pub fn from_parts(
        w: &RowStochasticW,
        rho_hat0: f64,
        g0: LinearBasisModel,
        t_star: f64,
    ) -> Result<Self> {
        Ok(TargetedModel {
            rho_hat0,
            omega: w.omega(rho_hat0)?,
            g0,
            t_star,
        })
    }

    /// Runs the targeting step on an initial fit.
    pub fn target(initial: &InitialEstimate, dataset: &Dataset) -> Result<Self> {
        let mut model = Self::untargeted(initial, dataset)?;
        let r = residualize(dataset, model.rho_hat0)?;
        let g0 = model.g0.evaluate_all(dataset.v(), dataset.c());
        model.t_star = target_step(&r, &g0, &model.omega)?;
        Ok(model)
    }

    /// The initial fit with `t = 0`, as used by direct estimation.
    pub fn untargeted(initial: &InitialEstimate, dataset: &Dataset) -> Result<Self> {
        Self::from_parts(
            &dataset.network().w,
            initial.rho_hat0,
            initial.model.clone(),
            0.0,
        )
    }

    #[inline]
    pub fn evaluate_i(&self, i: usize, v_i: &[f64], c_i: &[f64]) -> f64 {
        self.g0.evaluate(v_i, c_i) + self.t_star * self.omega[i]
    }

    /// Fitted `g_t` at the observed summaries.
    pub fn fitted(&self, dataset: &Dataset) -> Vec<f64> {
        (0..dataset.n())
            .map(|i| self.evaluate_i(i, dataset.v().row(i), dataset.c().row(i)))
            .collect()
    }

    /// `r_hat0 - g_t` at the observed data.
    pub fn residuals(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        let r = residualize(dataset, self.rho_hat0)?;
        let g = self.fitted(dataset);
        Ok(r.iter().zip(&g).map(|(r, g)| r - g).collect())
    }
}

/// `N^{-1} omega'(r_hat0 - g_t)`: zero after targeting.
pub fn plug_in_bias(model: &TargetedModel, dataset: &Dataset) -> Result<f64> {
    if model.omega.len() != dataset.n() {
        return Err(Error::Dimension("model and dataset sizes differ".into()));
    }
    let e = model.residuals(dataset)?;
    Ok(dot(&model.omega, &e) / dataset.n() as f64)
}
