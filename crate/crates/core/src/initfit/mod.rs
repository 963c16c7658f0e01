//! Initial estimators `(rho_hat0, g_hat0)`: profile ridge regression over a
//! basis expansion of `(V, C)`.

mod basis;
mod profile;
mod ridge;

pub use basis::{design_from_summaries, design_matrix, BasisPreset, BasisSpec, LinearBasisModel};
pub use profile::{default_lambda, fit_at_rho, profile_rho, InitialEstimate, ProfileCriterion};
pub use ridge::{ridge_fit, ridge_fit_standardized};

#[cfg(test)]
pub(crate) use profile::golden_section;
