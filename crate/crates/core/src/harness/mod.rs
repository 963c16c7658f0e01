//! Monte Carlo studies, observed-data estimation, reports and self-checks.

mod config;
mod ingest;
mod metrics;
mod report;
mod selftest;
mod study;

pub use config::{
    EstimateConfig, ExperimentConfig, FitConfig, IngestOptions, Method, NetworkKind, NetworkSpec,
};
pub use ingest::{ingest_dataset, IngestedData};
pub use metrics::{MethodMetrics, MetricsTable};
pub use report::{
    estimate_csv, study_csv, to_json, write_estimate_report, write_study_report, EstimateReport,
    SeedInfo, StudyReport, ToolInfo, ESTIMATE_CSV_HEADER, SEED_DERIVATION, STUDY_CSV_HEADER,
};
pub use selftest::{run_selftest, SelfCheck};
pub use study::{
    fit_methods, run_study, Diagnostics, Environment, MethodOutcome, MethodResult, MethodSettings,
    MethodTimes, ReplicationResult, Study, StudyOutcome, StudyTiming,
};

use std::path::Path;

use crate::error::{Error, Result};
use crate::seeds::SeedNode;

/// Ingests observed data and fits every enabled method. Streams derive from
/// `root(config.seed)` exactly as for one simulated replication.
pub fn run_estimate(
    data_csv: &Path,
    edges_csv: &Path,
    config: &EstimateConfig,
) -> Result<(EstimateReport, MethodTimes)> {
    config.validate()?;
    let ingested = ingest_dataset(data_csv, edges_csv, &config.data)?;
    let dataset = &ingested.dataset;
    let policy = config.policy.resolve(dataset.c())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let settings = MethodSettings {
        methods: &config.methods,
        fit: &config.fit,
        bootstrap: &config.bootstrap,
        kde: &config.kde,
        level: config.level,
    };
    let (methods, times) =
        pool.install(|| fit_methods(dataset, &policy, settings, SeedNode::root(config.seed)));
    let graph = dataset.network().graph();
    let report = EstimateReport::new(
        config,
        graph.n_nodes(),
        graph.n_edges(),
        ingested.dropped_ids.clone(),
        methods,
    );
    Ok((report, times))
}
