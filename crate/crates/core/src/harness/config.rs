use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::competitors::KdeConfig;
use crate::error::{Error, Result};
use crate::inference::BootstrapSettings;
use crate::initfit::{default_lambda, BasisPreset, ProfileCriterion};
use crate::netgraph::{gen_block, gen_powerlaw, ring, AdjacencyGraph, Network};
use crate::seeds::SeedNode;
use crate::semgen::{PolicySpec, SimConfig, SummaryKind};

/// Estimators a study or estimate run can enable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tmle,
    De,
    Ndi,
    Ani,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Tmle, Method::De, Method::Ndi, Method::Ani];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tmle => "tmle",
            Method::De => "de",
            Method::Ndi => "ndi",
            Method::Ani => "ani",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Network family. Sizes come from `sim.n_nodes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    /// Stochastic block model.
    #[default]
    Block,
    /// Preferential attachment.
    Powerlaw,
    Ring,
    /// Edge CSV with header `i,j` and zero-based ids.
    EdgeList,
}

/// Network section of a study. Parameters not used by `kind` must be absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    /// Block count; default `max(1, N/20)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_blocks: Option<usize>,
    /// Within-block edge probability; default 0.3.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_in: Option<f64>,
    /// Between-block edge probability; default `0.3/N`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_out: Option<f64>,
    /// Edges per new node; default 2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_attach: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Draw the network once per study (default) instead of per replication.
    pub shared: bool,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            kind: NetworkKind::Block,
            n_blocks: None,
            p_in: None,
            p_out: None,
            m_attach: None,
            path: None,
            shared: true,
        }
    }
}

impl NetworkSpec {
    pub fn block(n_blocks: usize, p_in: f64, p_out: f64) -> Self {
        NetworkSpec {
            n_blocks: Some(n_blocks),
            p_in: Some(p_in),
            p_out: Some(p_out),
            ..Self::default()
        }
    }

    fn block_params(&self, n: usize) -> (usize, f64, f64) {
        (
            self.n_blocks.unwrap_or((n / 20).max(1)),
            self.p_in.unwrap_or(0.3),
            self.p_out.unwrap_or(0.3 / n as f64),
        )
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        let stray = |name: &str, present: bool| -> Result<()> {
            if present {
                Err(Error::Config(format!(
                    "network.{name} does not apply to kind {:?}",
                    self.kind
                )))
            } else {
                Ok(())
            }
        };
        let block_keys = self.n_blocks.is_some() || self.p_in.is_some() || self.p_out.is_some();
        match self.kind {
            NetworkKind::Block => {
                stray("m_attach", self.m_attach.is_some())?;
                stray("path", self.path.is_some())?;
                let (k, p_in, p_out) = self.block_params(n_nodes);
                if k == 0 || k > n_nodes {
                    return Err(Error::Config(format!(
                        "network.n_blocks = {k} must lie in [1, {n_nodes}]"
                    )));
                }
                if !(0.0 <= p_out && p_out <= p_in && p_in <= 1.0) {
                    return Err(Error::Config(format!(
                        "network needs 0 <= p_out <= p_in <= 1 (got p_in {p_in}, p_out {p_out})"
                    )));
                }
            }
            NetworkKind::Powerlaw => {
                stray("n_blocks/p_in/p_out", block_keys)?;
                stray("path", self.path.is_some())?;
                let m = self.m_attach.unwrap_or(2);
                if m == 0 || m >= n_nodes {
                    return Err(Error::Config(format!(
                        "network.m_attach = {m} must lie in [1, N)"
                    )));
                }
            }
            NetworkKind::Ring => {
                stray("n_blocks/p_in/p_out", block_keys)?;
                stray("m_attach", self.m_attach.is_some())?;
                stray("path", self.path.is_some())?;
                if n_nodes < 3 {
                    return Err(Error::Config("ring network needs at least 3 nodes".into()));
                }
            }
            NetworkKind::EdgeList => {
                stray("n_blocks/p_in/p_out", block_keys)?;
                stray("m_attach", self.m_attach.is_some())?;
                if self.path.is_none() {
                    return Err(Error::Config(
                        "network.path is required for kind edge_list".into(),
                    ));
                }
                if !self.shared {
                    return Err(Error::Config(
                        "an edge-list network cannot be regenerated per replication".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Builds the network for `n_nodes`, drawing from `seed` when random.
    pub fn build(&self, n_nodes: usize, seed: SeedNode) -> Result<Network> {
        self.validate(n_nodes)?;
        let mut rng = seed.rng();
        let graph = match self.kind {
            NetworkKind::Block => {
                let (k, p_in, p_out) = self.block_params(n_nodes);
                gen_block(n_nodes, k, p_in, p_out, &mut rng)?
            }
            NetworkKind::Powerlaw => gen_powerlaw(n_nodes, self.m_attach.unwrap_or(2), &mut rng)?,
            NetworkKind::Ring => ring(n_nodes)?,
            NetworkKind::EdgeList => {
                let path = self.path.as_deref().expect("validated");
                let graph = AdjacencyGraph::read_edge_csv(path)?;
                if graph.n_nodes() != n_nodes {
                    return Err(Error::Config(format!(
                        "edge list {} has {} nodes but sim.n_nodes = {n_nodes}",
                        path.display(),
                        graph.n_nodes()
                    )));
                }
                graph
            }
        };
        Ok(Network::new(graph))
    }
}

/// Initial-fit settings shared by the targeted estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Basis for TMLE and DE.
    pub basis: BasisPreset,
    /// Basis for NDI; defaults to `basis`.
    pub ndi_basis: Option<BasisPreset>,
    /// Ridge penalty; defaults to `1e-3 N`.
    pub lambda: Option<f64>,
    pub criterion: ProfileCriterion,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            basis: BasisPreset::Correct,
            ndi_basis: None,
            lambda: None,
            criterion: ProfileCriterion::QuasiLikelihood,
        }
    }
}

impl FitConfig {
    pub fn lambda_for(&self, n: usize) -> f64 {
        self.lambda.unwrap_or_else(|| default_lambda(n))
    }

    pub fn ndi_basis(&self) -> BasisPreset {
        self.ndi_basis.unwrap_or(self.basis)
    }

    fn validate(&self) -> Result<()> {
        match self.lambda {
            Some(l) if !(l >= 0.0 && l.is_finite()) => Err(Error::Config(format!(
                "fit.lambda must be a finite non-negative number, got {l}"
            ))),
            _ => Ok(()),
        }
    }
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn check_common(
    methods: &[Method],
    level: f64,
    boot: &BootstrapSettings,
    kde: &KdeConfig,
) -> Result<()> {
    if methods.is_empty() {
        log::warn!("no methods enabled; reports will be header-only");
    }
    let unique: BTreeSet<_> = methods.iter().collect();
    if unique.len() != methods.len() {
        return Err(Error::Config("methods contains duplicates".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    if boot.n_boot == 0 || boot.outer < 2 || boot.inner == 0 {
        return Err(Error::Config(format!(
            "bootstrap needs n_boot >= 1, outer >= 2, inner >= 1 (got {}, {}, {})",
            boot.n_boot, boot.outer, boot.inner
        )));
    }
    kde.validate()
        .map_err(|e| Error::Config(format!("kde: {e}")))
}

/// Monte Carlo study definition (`simulate` and `oracle`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replications: usize,
    pub methods: Vec<Method>,
    /// Worker threads; 0 uses all available cores. Results do not depend on
    /// it, so it stays out of serialized configs (timing.json records it).
    #[serde(skip_serializing)]
    pub workers: usize,
    /// Nominal confidence level of the reported intervals.
    pub level: f64,
    /// Draws behind the Monte Carlo truth.
    pub oracle_n_mc: usize,
    pub network: NetworkSpec,
    pub sim: SimConfig,
    pub policy: PolicySpec,
    pub fit: FitConfig,
    pub bootstrap: BootstrapSettings,
    pub kde: KdeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            replications: 200,
            methods: default_methods(),
            workers: 0,
            level: 0.95,
            oracle_n_mc: 100_000,
            network: NetworkSpec::default(),
            sim: SimConfig::default(),
            policy: PolicySpec::default(),
            fit: FitConfig::default(),
            bootstrap: BootstrapSettings::default(),
            kde: KdeConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        parse_toml(text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let config: Self = read_toml(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.oracle_n_mc < 1000 {
            return Err(Error::Config(format!(
                "oracle_n_mc must be >= 1000, got {}",
                self.oracle_n_mc
            )));
        }
        check_common(&self.methods, self.level, &self.bootstrap, &self.kde)?;
        self.sim
            .validate()
            .map_err(|e| Error::Config(format!("sim: {e}")))?;
        self.network.validate(self.sim.n_nodes)?;
        self.fit.validate()
    }

    pub fn has(&self, method: Method) -> bool {
        self.methods.contains(&method)
    }
}

/// Ingestion options for `estimate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestOptions {
    pub summary: SummaryKind,
    /// Columns (`y` or `x*`) transformed with `ln(1 + v)` before anything else.
    pub log1p: Vec<String>,
    /// Standardize every covariate column to mean 0, sd 1.
    pub standardize: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            summary: SummaryKind::Mean,
            log1p: Vec::new(),
            standardize: false,
        }
    }
}

/// Settings for a one-shot estimate on observed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateConfig {
    pub seed: u64,
    pub methods: Vec<Method>,
    #[serde(skip_serializing)]
    pub workers: usize,
    pub level: f64,
    pub data: IngestOptions,
    pub policy: PolicySpec,
    pub fit: FitConfig,
    pub bootstrap: BootstrapSettings,
    pub kde: KdeConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            seed: 1,
            methods: default_methods(),
            workers: 0,
            level: 0.95,
            data: IngestOptions::default(),
            policy: PolicySpec::default(),
            fit: FitConfig::default(),
            bootstrap: BootstrapSettings::default(),
            kde: KdeConfig::default(),
        }
    }
}

impl EstimateConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        parse_toml(text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let config: Self = read_toml(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        check_common(&self.methods, self.level, &self.bootstrap, &self.kde)?;
        self.fit.validate()
    }
}

fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    // An unreadable config is a usage error, not a data error.
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
