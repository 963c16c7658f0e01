//! Variance estimation, confidence intervals and projection-based oracles.

mod pipeline;
mod projection;
mod variance;

pub use pipeline::{targeted_inference, BootstrapSettings, TargetedInference};
pub use projection::{
    hg_efficiency_oracle, sigma_x_projection_oracle, EfficiencyCheck, HG_BACKGROUNDS,
    PROJECTION_MAX_N,
};
pub use variance::{
    confidence_interval, estimate_variance, normal_interval, sigma_x_bootstrap, sigma_y_hat,
    SigmaY, VarianceEstimate, VarianceMethod, DEFAULT_INNER, DEFAULT_OUTER,
};
