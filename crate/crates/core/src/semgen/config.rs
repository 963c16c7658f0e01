use serde::{Deserialize, Serialize};

use super::summary::SummaryKind;
use crate::error::{Error, Result};
use crate::netgraph::DEFAULT_DELTA_RHO;

/// Outcome-model coefficients of the simulation DGP (covariate dimension 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutcomeCoefficients {
    pub intercept: f64,
    pub own_treatment: f64,
    pub neighbor_treatment: f64,
    pub own_x: [f64; 2],
    pub neighbor_x: [f64; 2],
    /// Coefficients on `z*x1`, `x1^2`, `x2^2`, `x2^3`.
    pub gamma: [f64; 4],
}

impl Default for OutcomeCoefficients {
    fn default() -> Self {
        OutcomeCoefficients {
            intercept: 0.5,
            own_treatment: 1.0,
            neighbor_treatment: 0.8,
            own_x: [0.6, -0.4],
            neighbor_x: [0.3, 0.3],
            gamma: [0.5, 0.3, -0.3, 0.2],
        }
    }
}

impl OutcomeCoefficients {
    pub fn zero() -> Self {
        OutcomeCoefficients {
            intercept: 0.0,
            own_treatment: 0.0,
            neighbor_treatment: 0.0,
            own_x: [0.0; 2],
            neighbor_x: [0.0; 2],
            gamma: [0.0; 4],
        }
    }

    pub fn constant(value: f64) -> Self {
        OutcomeCoefficients {
            intercept: value,
            ..Self::zero()
        }
    }

    /// Coefficients laid out in the column order of the full basis:
    /// `[1, z, zbar, x1, x2, xbar1, xbar2, z*x1, x1^2, x2^2, x2^3]`.
    pub fn basis_coefficients(&self) -> Vec<f64> {
        let mut b = vec![self.intercept, self.own_treatment, self.neighbor_treatment];
        b.extend(self.own_x);
        b.extend(self.neighbor_x);
        b.extend(self.gamma);
        b
    }

    pub fn is_constant(&self) -> bool {
        *self == Self::constant(self.intercept)
    }
}

/// Logistic propensity `P(Z=1 | C) = logistic(intercept + slopes . C)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreatmentLogit {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl Default for TreatmentLogit {
    fn default() -> Self {
        TreatmentLogit {
            intercept: 0.0,
            slopes: vec![0.2; 4],
        }
    }
}

impl TreatmentLogit {
    pub fn prob(&self, c_i: &[f64]) -> f64 {
        logistic(self.intercept + self.slopes.iter().zip(c_i).map(|(a, c)| a * c).sum::<f64>())
    }
}

#[inline]
pub(crate) fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Centered uniform scaled to the requested standard deviation.
    Uniform,
}

/// Structural-equation settings for synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_nodes: usize,
    pub rho0: f64,
    pub coefficients: OutcomeCoefficients,
    pub treatment_logit: TreatmentLogit,
    pub noise_sd: f64,
    pub noise: NoiseKind,
    pub x_dim: usize,
    pub summary: SummaryKind,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_nodes: 400,
            rho0: 0.4,
            coefficients: OutcomeCoefficients::default(),
            treatment_logit: TreatmentLogit::default(),
            noise_sd: 1.0,
            noise: NoiseKind::Gaussian,
            x_dim: 2,
            summary: SummaryKind::Mean,
        }
    }
}

impl SimConfig {
    pub fn with_nodes(n_nodes: usize) -> Self {
        SimConfig {
            n_nodes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 2 {
            return Err(Error::InvalidParameter("n_nodes must be at least 2".into()));
        }
        if self.x_dim != 2 {
            return Err(Error::InvalidParameter(format!(
                "the simulation outcome model is defined for x_dim = 2, got {}",
                self.x_dim
            )));
        }
        if !(self.rho0.is_finite() && self.rho0.abs() <= 1.0 - DEFAULT_DELTA_RHO) {
            return Err(Error::NonStationary {
                rho: self.rho0,
                bound: 1.0 - DEFAULT_DELTA_RHO,
            });
        }
        // Zero noise is allowed for noiseless identification checks.
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_sd must be finite and non-negative, got {}",
                self.noise_sd
            )));
        }
        if self.treatment_logit.slopes.len() != 2 * self.x_dim {
            return Err(Error::InvalidParameter(format!(
                "treatment_logit.slopes needs {} entries, got {}",
                2 * self.x_dim,
                self.treatment_logit.slopes.len()
            )));
        }
        Ok(())
    }
}
