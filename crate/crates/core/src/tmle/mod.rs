//! Targeting step, plug-in-bias diagnostic and the bootstrap estimate of
//! the interventional network mean (plus its untargeted variant).

mod bootstrap;
mod targeting;

pub use bootstrap::{estimate_psi, estimate_psi_de, PsiEstimate, DEFAULT_N_BOOT};
pub use targeting::{plug_in_bias, residualize, target_step, TargetedModel};

pub(crate) use bootstrap::Evaluator;
