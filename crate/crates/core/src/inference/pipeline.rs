use serde::{Deserialize, Serialize};

use super::variance::{estimate_variance, VarianceEstimate, DEFAULT_INNER, DEFAULT_OUTER};
use crate::error::Result;
use crate::seeds::{tag, SeedNode};
use crate::semgen::{Dataset, InterventionPolicy};
use crate::tmle::{estimate_psi, PsiEstimate, TargetedModel, DEFAULT_N_BOOT};

/// Replicate counts for point estimation and the nested variance bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSettings {
    /// Replicates behind the point estimate.
    pub n_boot: usize,
    /// Outer samples of the variance bootstrap.
    pub outer: usize,
    /// Inner replicates per outer sample.
    pub inner: usize,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        BootstrapSettings {
            n_boot: DEFAULT_N_BOOT,
            outer: DEFAULT_OUTER,
            inner: DEFAULT_INNER,
        }
    }
}

/// Point estimate plus two-part variance for one targeted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetedInference {
    pub psi: f64,
    pub boot_mc_se: f64,
    pub variance: VarianceEstimate,
}

impl TargetedInference {
    pub fn se(&self) -> f64 {
        self.variance.se()
    }
}

/// Runs the bootstrap estimate (stream `seed/BOOTSTRAP`) and the variance
/// estimate (stream `seed/OUTER`) for a model.
pub fn targeted_inference(
    model: &TargetedModel,
    dataset: &Dataset,
    policy: &InterventionPolicy,
    settings: &BootstrapSettings,
    seed: SeedNode,
) -> Result<TargetedInference> {
    let PsiEstimate { psi, replicates } = estimate_psi(
        model,
        dataset,
        policy,
        settings.n_boot,
        seed.child(tag::BOOTSTRAP),
    )?;
    let boot_mc_se = PsiEstimate { psi, replicates }.mc_se();
    let variance = estimate_variance(
        model,
        dataset,
        policy,
        settings.outer,
        settings.inner,
        seed.child(tag::OUTER),
    )?;
    Ok(TargetedInference {
        psi,
        boot_mc_se,
        variance,
    })
}
