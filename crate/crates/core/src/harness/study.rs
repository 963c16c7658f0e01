use std::collections::BTreeMap;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, FitConfig, Method};
use super::metrics::MetricsTable;
use crate::competitors::{ani_estimate, ndi_estimate, KdeConfig};
use crate::error::{Error, Result};
use crate::inference::{
    normal_interval, sigma_x_bootstrap, sigma_y_hat, targeted_inference, BootstrapSettings,
    VarianceEstimate, VarianceMethod,
};
use crate::initfit::{profile_rho, BasisSpec, InitialEstimate};
use crate::netgraph::Network;
use crate::seeds::{method, tag, SeedNode};
use crate::semgen::{
    gen_dataset, oracle_psi, Dataset, InterventionPolicy, NodeMatrix, OracleEstimate, PolicySpec,
    SimConfig,
};
use crate::tmle::{estimate_psi, TargetedModel};

/// One method's estimate with its interval and fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub psi_hat: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rho_hat0: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// Method-specific side outputs; absent entries do not apply.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2_y_part: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2_x_part: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boot_mc_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flat_profile: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_clipped: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_floored: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor_warning: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_weight: Option<f64>,
}

impl Diagnostics {
    fn variance(v: &VarianceEstimate) -> Self {
        Diagnostics {
            sigma2_y_part: Some(v.sigma2_y_part),
            sigma2_x_part: Some(v.sigma2_x_part),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MethodOutcome {
    Ok(MethodResult),
    Failed { error: String },
}

impl MethodOutcome {
    pub fn result(&self) -> Option<&MethodResult> {
        match self {
            MethodOutcome::Ok(r) => Some(r),
            MethodOutcome::Failed { .. } => None,
        }
    }

    fn from_result(r: Result<MethodResult>) -> Self {
        r.map_or_else(
            |e| MethodOutcome::Failed {
                error: e.to_string(),
            },
            MethodOutcome::Ok,
        )
    }
}

/// Everything deterministic about one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    /// Truth the intervals are scored against (per-replication when the
    /// network is regenerated).
    pub psi_true: f64,
    pub psi_true_mc_se: f64,
    pub methods: BTreeMap<Method, MethodOutcome>,
}

/// Wall-clock seconds per method; kept apart from the deterministic results.
pub type MethodTimes = BTreeMap<Method, f64>;

/// Network, resolved policy and Monte Carlo truth for one environment.
#[derive(Debug, Clone)]
pub struct Environment {
    pub network: Network,
    pub policy: InterventionPolicy,
    pub oracle: OracleEstimate,
}

impl Environment {
    /// The environment whose truth a study reports: the shared one, or that of
    /// replication 0 when networks are redrawn per replication.
    pub fn reference(config: &ExperimentConfig) -> Result<Self> {
        let root = SeedNode::root(config.seed);
        if config.network.shared {
            Self::build(config, root)
        } else {
            Self::build(config, root.path(&[tag::REPLICATION, 0]))
        }
    }

    /// Draws the network from `seed/NETWORK`, resolves data-dependent
    /// policies on a pilot dataset from `seed/POLICY`, and computes the truth
    /// from `seed/ORACLE`.
    pub fn build(config: &ExperimentConfig, seed: SeedNode) -> Result<Self> {
        let network = config
            .network
            .build(config.sim.n_nodes, seed.child(tag::NETWORK))?;
        let policy = resolve_policy(
            &config.policy,
            &config.sim,
            &network,
            seed.child(tag::POLICY),
        )?;
        let oracle = oracle_psi(
            &config.sim,
            &network,
            &policy,
            config.oracle_n_mc,
            seed.child(tag::ORACLE),
        )?;
        Ok(Environment {
            network,
            policy,
            oracle,
        })
    }
}

fn resolve_policy(
    spec: &PolicySpec,
    sim: &SimConfig,
    network: &Network,
    seed: SeedNode,
) -> Result<InterventionPolicy> {
    let c = if spec.needs_data() {
        gen_dataset(sim, network, &mut seed.rng())?.c().clone()
    } else {
        NodeMatrix::zeros(1, 2 * sim.x_dim)
    };
    spec.resolve(&c)
}

/// Fitting and inference settings shared by every dataset of a run.
#[derive(Debug, Clone, Copy)]
pub struct MethodSettings<'a> {
    pub methods: &'a [Method],
    pub fit: &'a FitConfig,
    pub bootstrap: &'a BootstrapSettings,
    pub kde: &'a KdeConfig,
    pub level: f64,
}

/// Fits every enabled method on one dataset.
///
/// Streams: TMLE and DE share `seed/TARGETED` (bootstrap draws are matched),
/// NDI uses `seed/NDI`, ANI `seed/ANI`. A failing method is recorded and the
/// rest still run.
pub fn fit_methods(
    dataset: &Dataset,
    policy: &InterventionPolicy,
    settings: MethodSettings<'_>,
    seed: SeedNode,
) -> (BTreeMap<Method, MethodOutcome>, MethodTimes) {
    let MethodSettings {
        methods,
        fit,
        bootstrap,
        kde,
        level,
    } = settings;
    let has = |m| methods.contains(&m);
    let mut out = BTreeMap::new();
    let mut times = BTreeMap::new();
    let lambda = fit.lambda_for(dataset.n());
    let targeted = seed.child(method::TARGETED);

    if has(Method::Tmle) || has(Method::De) {
        let start = Instant::now();
        let basis = BasisSpec::from(fit.basis);
        let initial = profile_rho(dataset, &basis, lambda, fit.criterion, None);
        let fit_s = start.elapsed().as_secs_f64();
        let mut sigma2_x = None;

        if has(Method::Tmle) {
            let start = Instant::now();
            let r = with_fit(&initial, |init| {
                let model = TargetedModel::target(init, dataset)?;
                let inf = targeted_inference(&model, dataset, policy, bootstrap, targeted)?;
                let (ci_lo, ci_hi) = normal_interval(inf.psi, inf.se(), level)?;
                sigma2_x = Some(inf.variance.sigma2_x_part);
                Ok(MethodResult {
                    psi_hat: inf.psi,
                    se: inf.se(),
                    ci_lo,
                    ci_hi,
                    t_star: Some(model.t_star),
                    rho_hat0: Some(init.rho_hat0),
                    diagnostics: Diagnostics {
                        boot_mc_se: Some(inf.boot_mc_se),
                        lambda: Some(init.lambda),
                        flat_profile: Some(init.flat_profile),
                        ..Diagnostics::variance(&inf.variance)
                    },
                })
            });
            out.insert(Method::Tmle, r);
            times.insert(Method::Tmle, fit_s + start.elapsed().as_secs_f64());
        }

        if has(Method::De) {
            let start = Instant::now();
            let r = with_fit(&initial, |init| {
                let model = TargetedModel::untargeted(init, dataset)?;
                let est = estimate_psi(
                    &model,
                    dataset,
                    policy,
                    bootstrap.n_boot,
                    targeted.child(tag::BOOTSTRAP),
                )?;
                // The x-part does not depend on t, so the targeted value is reused.
                let x_part = match sigma2_x {
                    Some(v) => v,
                    None => sigma_x_bootstrap(
                        &model,
                        dataset,
                        policy,
                        bootstrap.outer,
                        bootstrap.inner,
                        targeted.child(tag::OUTER),
                    )?,
                };
                let variance = VarianceEstimate::new(
                    sigma_y_hat(&model, dataset)?,
                    x_part,
                    VarianceMethod::NestedBootstrap,
                    bootstrap.outer,
                    bootstrap.inner,
                );
                let (ci_lo, ci_hi) = normal_interval(est.psi, variance.se(), level)?;
                Ok(MethodResult {
                    psi_hat: est.psi,
                    se: variance.se(),
                    ci_lo,
                    ci_hi,
                    t_star: None,
                    rho_hat0: Some(init.rho_hat0),
                    diagnostics: Diagnostics {
                        boot_mc_se: Some(est.mc_se()),
                        lambda: Some(init.lambda),
                        flat_profile: Some(init.flat_profile),
                        ..Diagnostics::variance(&variance)
                    },
                })
            });
            out.insert(Method::De, r);
            times.insert(Method::De, fit_s + start.elapsed().as_secs_f64());
        }
    }

    if has(Method::Ndi) {
        let start = Instant::now();
        let basis = BasisSpec::from(fit.ndi_basis());
        let r = ndi_estimate(
            dataset,
            policy,
            &basis,
            lambda,
            bootstrap,
            seed.child(method::NDI),
        )
        .and_then(|est| {
            let (ci_lo, ci_hi) = normal_interval(est.psi, est.se, level)?;
            Ok(MethodResult {
                psi_hat: est.psi,
                se: est.se,
                ci_lo,
                ci_hi,
                t_star: Some(est.t_star),
                rho_hat0: Some(0.0),
                diagnostics: Diagnostics {
                    lambda: Some(lambda),
                    ..Diagnostics::variance(&est.variance)
                },
            })
        });
        out.insert(Method::Ndi, MethodOutcome::from_result(r));
        times.insert(Method::Ndi, start.elapsed().as_secs_f64());
    }

    if has(Method::Ani) {
        let start = Instant::now();
        let r = ani_estimate(dataset, policy, kde, seed.child(method::ANI)).and_then(|est| {
            let (ci_lo, ci_hi) = normal_interval(est.psi, est.se, level)?;
            Ok(MethodResult {
                psi_hat: est.psi,
                se: est.se,
                ci_lo,
                ci_hi,
                t_star: None,
                rho_hat0: None,
                diagnostics: Diagnostics {
                    clip: Some(est.clip),
                    n_clipped: Some(est.n_clipped),
                    n_floored: Some(est.n_floored),
                    floor_warning: Some(est.floor_warning),
                    mean_weight: Some(est.mean_weight),
                    ..Default::default()
                },
            })
        });
        out.insert(Method::Ani, MethodOutcome::from_result(r));
        times.insert(Method::Ani, start.elapsed().as_secs_f64());
    }
    (out, times)
}

fn with_fit(
    initial: &Result<InitialEstimate>,
    f: impl FnOnce(&InitialEstimate) -> Result<MethodResult>,
) -> MethodOutcome {
    match initial {
        Ok(init) => MethodOutcome::from_result(f(init)),
        Err(e) => MethodOutcome::Failed {
            error: e.to_string(),
        },
    }
}

/// Study state shared by all replications.
pub struct Study<'a> {
    config: &'a ExperimentConfig,
    root: SeedNode,
    shared: Option<Environment>,
}

impl<'a> Study<'a> {
    /// Validates the config and, for a shared network, builds the common
    /// environment from the root stream.
    pub fn new(config: &'a ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let root = SeedNode::root(config.seed);
        let shared = if config.network.shared {
            Some(Environment::build(config, root)?)
        } else {
            None
        };
        Ok(Study {
            config,
            root,
            shared,
        })
    }

    pub fn shared_environment(&self) -> Option<&Environment> {
        self.shared.as_ref()
    }

    pub fn config(&self) -> &ExperimentConfig {
        self.config
    }

    /// Runs replication `r`: data from `root/REPLICATION/r/DATA`, methods
    /// from `root/REPLICATION/r`. Deterministic in `(config, r)`.
    pub fn run_replication(&self, r: usize) -> Result<(ReplicationResult, MethodTimes)> {
        let rep = self.root.path(&[tag::REPLICATION, r as u64]);
        let owned;
        let env = match &self.shared {
            Some(env) => env,
            None => {
                owned = Environment::build(self.config, rep)?;
                &owned
            }
        };
        let c = self.config;
        let dataset = gen_dataset(&c.sim, &env.network, &mut rep.child(tag::DATA).rng())?;
        let settings = MethodSettings {
            methods: &c.methods,
            fit: &c.fit,
            bootstrap: &c.bootstrap,
            kde: &c.kde,
            level: c.level,
        };
        let (methods, times) = fit_methods(&dataset, &env.policy, settings, rep);
        Ok((
            ReplicationResult {
                replication: r,
                psi_true: env.oracle.psi,
                psi_true_mc_se: env.oracle.mc_se,
                methods,
            },
            times,
        ))
    }
}

/// Deterministic study output plus its segregated timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub metrics: MetricsTable,
    pub replications: Vec<ReplicationResult>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyTiming {
    pub workers: usize,
    pub total_s: f64,
    pub setup_s: f64,
    /// Mean seconds per replication, by method.
    pub mean_method_s: BTreeMap<Method, f64>,
    pub replications: Vec<MethodTimes>,
}

/// Runs all replications on a pool of `config.workers` threads and
/// aggregates them. Replication failures (e.g. a degenerate dataset) abort
/// the study; per-method failures do not.
pub fn run_study(config: &ExperimentConfig) -> Result<(StudyOutcome, StudyTiming)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let workers = pool.current_num_threads();
    let start = Instant::now();
    pool.install(|| {
        let study = Study::new(config)?;
        let setup_s = start.elapsed().as_secs_f64();
        info!(
            "study: {} replications, N = {}, {} workers",
            config.replications, config.sim.n_nodes, workers
        );
        let runs: Vec<_> = (0..config.replications)
            .into_par_iter()
            .map(|r| study.run_replication(r))
            .collect::<Result<_>>()?;
        let (replications, times): (Vec<_>, Vec<_>) = runs.into_iter().unzip();

        let metrics = MetricsTable::from_replications(&replications, &config.methods);
        for w in &metrics.warnings {
            warn!("{w}");
        }
        let timing = StudyTiming {
            workers,
            total_s: start.elapsed().as_secs_f64(),
            setup_s,
            mean_method_s: mean_times(&times, &config.methods),
            replications: times,
        };
        Ok((
            StudyOutcome {
                metrics,
                replications,
            },
            timing,
        ))
    })
}

pub(crate) fn mean_times(times: &[MethodTimes], methods: &[Method]) -> BTreeMap<Method, f64> {
    methods
        .iter()
        .map(|&m| {
            let v: Vec<f64> = times.iter().filter_map(|t| t.get(&m).copied()).collect();
            let mean = if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            };
            (m, mean)
        })
        .collect()
}
