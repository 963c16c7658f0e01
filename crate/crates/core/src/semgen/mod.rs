//! Synthetic data from the structural model, summaries, intervention
//! policies and the Monte Carlo ground truth.

mod config;
mod generate;
mod policy;
mod summary;

pub use config::{NoiseKind, OutcomeCoefficients, SimConfig, TreatmentLogit};
pub use generate::{gen_dataset, oracle_psi, true_g, Dataset, OracleEstimate};
pub use policy::{sample_intervention, InterventionPolicy, PolicySpec};
pub use summary::{summarize_x, summarize_z, NodeMatrix, SummaryKind};

pub(crate) use summary::{summarize_x_into, summarize_z_into};
