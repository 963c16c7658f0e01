use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::inference::{targeted_inference, BootstrapSettings, VarianceEstimate};
use crate::initfit::{fit_at_rho, BasisSpec};
use crate::seeds::SeedNode;
use crate::semgen::{Dataset, InterventionPolicy};
use crate::tmle::TargetedModel;

/// Finite-interference competitor: the targeted pipeline with `rho = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdiEstimate {
    pub psi: f64,
    pub se: f64,
    pub t_star: f64,
    pub variance: VarianceEstimate,
}

/// Regresses `y` on `phi(V, C)`, targets along `omega = 1`, and reuses the
/// bootstrap estimate and variance machinery.
pub fn ndi_estimate(
    dataset: &Dataset,
    policy: &InterventionPolicy,
    basis: &BasisSpec,
    lambda: f64,
    settings: &BootstrapSettings,
    seed: SeedNode,
) -> Result<NdiEstimate> {
    let fit = fit_at_rho(dataset, basis, lambda, 0.0)?;
    let model = TargetedModel::target(&fit, dataset)?;
    let inf = targeted_inference(&model, dataset, policy, settings, seed)?;
    Ok(NdiEstimate {
        psi: inf.psi,
        se: inf.se(),
        t_star: model.t_star,
        variance: inf.variance,
    })
}
