use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::targeting::TargetedModel;
use crate::error::{Error, Result};
use crate::initfit::InitialEstimate;
use crate::netgraph::{dot, AdjacencyGraph};
use crate::seeds::{SeedNode, StreamRng};
use crate::semgen::{summarize_x_into, summarize_z_into, Dataset, InterventionPolicy, SummaryKind};

/// Default number of bootstrap replicates for point estimation.
pub const DEFAULT_N_BOOT: usize = 2000;

/// Bootstrap point estimate and its per-replicate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiEstimate {
    pub psi: f64,
    pub replicates: Vec<f64>,
}

impl PsiEstimate {
    /// Monte Carlo standard error of the replicate mean.
    pub fn mc_se(&self) -> f64 {
        let b = self.replicates.len() as f64;
        if b < 2.0 {
            return 0.0;
        }
        let var = self
            .replicates
            .iter()
            .map(|v| (v - self.psi).powi(2))
            .sum::<f64>()
            / (b - 1.0);
        (var / b).sqrt()
    }
}

/// Per-thread buffers for one replicate.
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    pub rows: Vec<usize>,
    pub inner: Vec<usize>,
    c: Vec<f64>,
    z: Vec<f64>,
    v: Vec<f64>,
}

/// Evaluates `N^{-1} sum_i omega_i g_t(v*_i, c_i)` for resampled covariates.
pub(crate) struct Evaluator<'a> {
    model: &'a TargetedModel,
    policy: &'a InterventionPolicy,
    graph: &'a AdjacencyGraph,
    summary: SummaryKind,
    x: &'a [f64],
    p: usize,
    /// `t * sum(omega^2) / N`: the fluctuation's contribution, constant in b.
    offset: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        model: &'a TargetedModel,
        dataset: &'a Dataset,
        policy: &'a InterventionPolicy,
    ) -> Result<Self> {
        let n = dataset.n();
        if model.omega.len() != n {
            return Err(Error::Dimension("model and dataset sizes differ".into()));
        }
        policy.validate(dataset.c().cols())?;
        model.g0.basis.check(dataset.p())?;
        Ok(Evaluator {
            model,
            policy,
            graph: dataset.network().graph(),
            summary: dataset.summary(),
            x: dataset.x().as_slice(),
            p: dataset.p(),
            offset: model.t_star * dot(&model.omega, &model.omega) / n as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.model.omega.len()
    }

    pub fn scratch(&self) -> Scratch {
        let n = self.n();
        Scratch {
            rows: vec![0; n],
            inner: vec![0; n],
            c: vec![0.0; n * 2 * self.p],
            z: vec![0.0; n],
            v: vec![0.0; 2 * n],
        }
    }

    /// Refills `rows` with N indices drawn uniformly from `pool` (or from
    /// `0..N` when `pool` is None).
    pub fn resample(pool: Option<&[usize]>, rng: &mut StreamRng, rows: &mut [usize]) {
        let n = rows.len();
        for r in rows.iter_mut() {
            let k = rng.random_range(0..n);
            *r = pool.map_or(k, |p| p[k]);
        }
    }

    /// Value for covariate rows `rows` (indices into the observed x), with
    /// the intervention drawn from `rng`.
    pub fn value(&self, rows: &[usize], rng: &mut StreamRng, s: &mut Scratch) -> f64 {
        let pc = 2 * self.p;
        summarize_x_into(
            self.x,
            self.p,
            Some(rows),
            self.graph,
            self.summary,
            &mut s.c,
        );
        self.policy.draw_into(&s.c, pc, rng, &mut s.z);
        summarize_z_into(&s.z, self.graph, self.summary, &mut s.v);
        let omega = &self.model.omega;
        let g = &self.model.g0;
        let mut acc = 0.0;
        for (i, w) in omega.iter().enumerate() {
            acc += w * g.evaluate(&s.v[2 * i..2 * i + 2], &s.c[pc * i..pc * (i + 1)]);
        }
        acc / self.n() as f64 + self.offset
    }

    /// One full bootstrap replicate on a fresh resample of the observed rows.
    pub fn replicate(&self, seed: SeedNode, s: &mut Scratch) -> f64 {
        let mut rng = seed.rng();
        let mut rows = std::mem::take(&mut s.rows);
        Self::resample(None, &mut rng, &mut rows);
        let value = self.value(&rows, &mut rng, s);
        s.rows = rows;
        value
    }
}

/// Bootstrap TMLE estimate: average over `n_boot` replicates of
/// `N^{-1} sum_i omega_i g_t(v*_i, c_i)`, where each replicate refills the
/// fixed node positions with covariate rows drawn with replacement,
/// recomputes `C`, and draws `Z*` from the policy. Replicate `b` uses stream
/// `seed.child(b)`.
pub fn estimate_psi(
    model: &TargetedModel,
    dataset: &Dataset,
    policy: &InterventionPolicy,
    n_boot: usize,
    seed: SeedNode,
) -> Result<PsiEstimate> {
    if n_boot == 0 {
        return Err(Error::InvalidParameter("n_boot must be at least 1".into()));
    }
    let eval = Evaluator::new(model, dataset, policy)?;
    let replicates: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map_init(
            || eval.scratch(),
            |s, b| eval.replicate(seed.child(b as u64), s),
        )
        .collect();
    let psi = replicates.iter().sum::<f64>() / n_boot as f64;
    Ok(PsiEstimate { psi, replicates })
}

/// Direct (untargeted) estimate: the same bootstrap with `t = 0`.
pub fn estimate_psi_de(
    initial: &InitialEstimate,
    dataset: &Dataset,
    policy: &InterventionPolicy,
    n_boot: usize,
    seed: SeedNode,
) -> Result<PsiEstimate> {
    let model = TargetedModel::untargeted(initial, dataset)?;
    estimate_psi(&model, dataset, policy, n_boot, seed)
}
