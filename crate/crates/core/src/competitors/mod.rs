//! Baseline estimators: kernel-weighted IPW and the rho = 0 targeted pipeline.
//! Direct (untargeted) estimation lives in `tmle::estimate_psi_de`.

mod ani;
mod kde;
mod ndi;

pub use ani::{ani_estimate, ipw_mean, AniEstimate};
pub use kde::{
    conditional_density_kde, silverman_bandwidths, ConditionalKde, KdeConfig, DENSITY_FLOOR,
};
pub use ndi::{ndi_estimate, NdiEstimate};
