use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::netgraph::dot;
use crate::seeds::SeedNode;
use crate::semgen::{Dataset, InterventionPolicy};
use crate::tmle::{Evaluator, TargetedModel};

pub const DEFAULT_OUTER: usize = 200;
pub const DEFAULT_INNER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMethod {
    NestedBootstrap,
    ProjectionOracle,
}

/// Two-part variance of the estimate: outcome noise plus covariate sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub sigma2_y_part: f64,
    pub sigma2_x_part: f64,
    pub total: f64,
    /// Per-unit residual variance behind the y-part.
    pub sigma2_y: f64,
    pub method: VarianceMethod,
    pub outer: usize,
    pub inner: usize,
}

impl VarianceEstimate {
    pub fn new(
        y: SigmaY,
        sigma2_x_part: f64,
        method: VarianceMethod,
        outer: usize,
        inner: usize,
    ) -> Self {
        VarianceEstimate {
            sigma2_y_part: y.sigma2_y_part,
            sigma2_x_part,
            total: y.sigma2_y_part + sigma2_x_part,
            sigma2_y: y.sigma2_y,
            method,
            outer,
            inner,
        }
    }

    pub fn se(&self) -> f64 {
        self.total.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaY {
    /// `||r_hat0 - g_t||^2 / N`.
    pub sigma2_y: f64,
    /// `N^{-2} sum_i omega_i^2 sigma2_y`.
    pub sigma2_y_part: f64,
}

/// Plug-in outcome-noise part of the variance.
pub fn sigma_y_hat(model: &TargetedModel, dataset: &Dataset) -> Result<SigmaY> {
    let e = model.residuals(dataset)?;
    let n = dataset.n() as f64;
    let sigma2_y = dot(&e, &e) / n;
    Ok(SigmaY {
        sigma2_y,
        sigma2_y_part: dot(&model.omega, &model.omega) * sigma2_y / (n * n),
    })
}

/// Nested bootstrap for the covariate-sampling part: outer samples from the
/// observed rows, inner samples from each outer sample, variance of the
/// `outer` inner means. Outer sample `m` and all of its inner replicates use
/// the single stream `seed.child(m)`.
pub fn sigma_x_bootstrap(
    model: &TargetedModel,
    dataset: &Dataset,
    policy: &InterventionPolicy,
    outer: usize,
    inner: usize,
    seed: SeedNode,
) -> Result<f64> {
    if outer < 2 || inner < 1 {
        return Err(Error::InvalidParameter(format!(
            "nested bootstrap needs outer >= 2 and inner >= 1 (got {outer}, {inner})"
        )));
    }
    if model.g0.is_constant() {
        return Ok(0.0);
    }
    let eval = Evaluator::new(model, dataset, policy)?;
    let means: Vec<f64> = (0..outer)
        .into_par_iter()
        .map_init(
            || eval.scratch(),
            |s, m| {
                let mut rng = seed.child(m as u64).rng();
                let mut pool = std::mem::take(&mut s.rows);
                let mut rows = std::mem::take(&mut s.inner);
                Evaluator::resample(None, &mut rng, &mut pool);
                let mut acc = 0.0;
                for _ in 0..inner {
                    Evaluator::resample(Some(&pool), &mut rng, &mut rows);
                    acc += eval.value(&rows, &mut rng, s);
                }
                s.rows = pool;
                s.inner = rows;
                acc / inner as f64
            },
        )
        .collect();
    let mean = means.iter().sum::<f64>() / outer as f64;
    Ok(means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / outer as f64)
}

/// Combined estimate with the nested bootstrap x-part.
pub fn estimate_variance(
    model: &TargetedModel,
    dataset: &Dataset,
    policy: &InterventionPolicy,
    outer: usize,
    inner: usize,
    seed: SeedNode,
) -> Result<VarianceEstimate> {
    let y = sigma_y_hat(model, dataset)?;
    let x = sigma_x_bootstrap(model, dataset, policy, outer, inner, seed)?;
    Ok(VarianceEstimate::new(
        y,
        x,
        VarianceMethod::NestedBootstrap,
        outer,
        inner,
    ))
}

/// Two-sided normal interval `psi +- z_{(1+level)/2} * sqrt(total)`.
pub fn confidence_interval(
    psi_hat: f64,
    variance: &VarianceEstimate,
    level: f64,
) -> Result<(f64, f64)> {
    normal_interval(psi_hat, variance.se(), level)
}

pub fn normal_interval(center: f64, se: f64, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * level);
    Ok((center - z * se, center + z * se))
}
