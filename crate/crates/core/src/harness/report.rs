//! Report files. `report.json` and the non-runtime columns of `report.csv`
//! are pure functions of the config; wall-clock data goes to `timing.json`
//! and the `runtime_s` column only.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{EstimateConfig, ExperimentConfig, Method};
use super::metrics::MetricsTable;
use super::study::{MethodOutcome, ReplicationResult, StudyOutcome, StudyTiming};
use crate::error::{Error, Result};

pub const STUDY_CSV_HEADER: [&str; 6] = ["method", "bias", "se", "cp", "mean_se", "runtime_s"];
pub const ESTIMATE_CSV_HEADER: [&str; 6] =
    ["method", "psi_hat", "se", "ci_lo", "ci_hi", "runtime_s"];

/// Stream layout recorded with every report.
pub const SEED_DERIVATION: &str = "SplitMix64 path folding into ChaCha8: \
    network root/NETWORK (shared) or root/REPLICATION/r/NETWORK; truth .../ORACLE; \
    data root/REPLICATION/r/DATA; TMLE and DE root/REPLICATION/r/1/{BOOTSTRAP/b, OUTER/m}; \
    NDI .../2/...; ANI .../3";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo {
            name: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master: u64,
    pub derivation: String,
}

impl SeedInfo {
    fn new(master: u64) -> Self {
        SeedInfo {
            master,
            derivation: SEED_DERIVATION.into(),
        }
    }
}

/// Full contents of a study's `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub tool: ToolInfo,
    pub config: ExperimentConfig,
    pub seeds: SeedInfo,
    pub metrics: MetricsTable,
    pub replications: Vec<ReplicationResult>,
}

impl StudyReport {
    pub fn new(config: &ExperimentConfig, outcome: &StudyOutcome) -> Self {
        StudyReport {
            tool: ToolInfo::current(),
            config: config.clone(),
            seeds: SeedInfo::new(config.seed),
            metrics: outcome.metrics.clone(),
            replications: outcome.replications.clone(),
        }
    }
}

/// Full contents of an estimate run's `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub tool: ToolInfo,
    pub config: EstimateConfig,
    pub seeds: SeedInfo,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub dropped_ids: Vec<u64>,
    pub methods: BTreeMap<Method, MethodOutcome>,
}

impl EstimateReport {
    pub fn new(
        config: &EstimateConfig,
        n_nodes: usize,
        n_edges: usize,
        dropped_ids: Vec<u64>,
        methods: BTreeMap<Method, MethodOutcome>,
    ) -> Self {
        EstimateReport {
            tool: ToolInfo::current(),
            config: config.clone(),
            seeds: SeedInfo::new(config.seed),
            n_nodes,
            n_edges,
            dropped_ids,
            methods,
        }
    }
}

/// Shortest round-trip decimal; empty for missing values.
fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Config(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Config(format!("csv encoding failed: {e}")))
}

/// One row per method, in the configured order.
pub fn study_csv(metrics: &MetricsTable, timing: Option<&StudyTiming>) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = metrics
        .methods
        .iter()
        .map(|m| {
            let runtime = timing.and_then(|t| t.mean_method_s.get(&m.method).copied());
            vec![
                m.method.to_string(),
                cell(m.bias),
                cell(m.se),
                cell(m.cp),
                cell(m.mean_se),
                cell(runtime),
            ]
        })
        .collect();
    csv_bytes(&STUDY_CSV_HEADER, &rows)
}

pub fn estimate_csv(
    methods: &BTreeMap<Method, MethodOutcome>,
    times: &BTreeMap<Method, f64>,
) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = methods
        .iter()
        .map(|(m, outcome)| {
            let r = outcome.result();
            vec![
                m.to_string(),
                cell(r.map(|r| r.psi_hat)),
                cell(r.map(|r| r.se)),
                cell(r.map(|r| r.ci_lo)),
                cell(r.map(|r| r.ci_hi)),
                cell(times.get(m).copied()),
            ]
        })
        .collect();
    csv_bytes(&ESTIMATE_CSV_HEADER, &rows)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Config(format!("json encoding failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

/// Writes `report.csv`, `report.json` and `timing.json` into `dir`.
pub fn write_study_report(
    dir: &Path,
    config: &ExperimentConfig,
    outcome: &StudyOutcome,
    timing: &StudyTiming,
) -> Result<()> {
    ensure_dir(dir)?;
    write_file(
        dir,
        "report.csv",
        &study_csv(&outcome.metrics, Some(timing))?,
    )?;
    write_file(
        dir,
        "report.json",
        &to_json(&StudyReport::new(config, outcome))?,
    )?;
    write_file(dir, "timing.json", &to_json(timing)?)
}

/// Writes `report.csv`, `report.json` and `timing.json` for an estimate run.
pub fn write_estimate_report(
    dir: &Path,
    report: &EstimateReport,
    times: &BTreeMap<Method, f64>,
) -> Result<()> {
    ensure_dir(dir)?;
    write_file(dir, "report.csv", &estimate_csv(&report.methods, times)?)?;
    write_file(dir, "report.json", &to_json(report)?)?;
    write_file(dir, "timing.json", &to_json(times)?)
}
