use log::warn;
use serde::{Deserialize, Serialize};

use super::kde::{ConditionalKde, KdeConfig, DENSITY_FLOOR};
use crate::error::{Error, Result};
use crate::seeds::SeedNode;
use crate::semgen::{summarize_z_into, Dataset, InterventionPolicy, NodeMatrix};

/// Inverse-probability-weighted estimate with kernel density ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AniEstimate {
    pub psi: f64,
    /// iid plug-in standard error `sd(y_i w_i) / sqrt(N)`.
    pub se: f64,
    pub clip: f64,
    pub n_clipped: usize,
    /// Nodes where either density estimate sat at the floor.
    pub n_floored: usize,
    pub floor_warning: bool,
    pub mean_weight: f64,
}

/// `N^{-1} sum_i y_i w_i` with `w_i` clipped to `[1/clip, clip]`.
pub fn ipw_mean(y: &[f64], p_star: &[f64], p_obs: &[f64], clip: f64) -> (f64, Vec<f64>, usize) {
    let mut clipped = 0;
    let weights: Vec<f64> = p_star
        .iter()
        .zip(p_obs)
        .map(|(s, o)| {
            let w = s / o;
            let c = w.clamp(1.0 / clip, clip);
            clipped += usize::from(c != w);
            c
        })
        .collect();
    let psi = y.iter().zip(&weights).map(|(y, w)| y * w).sum::<f64>() / y.len() as f64;
    (psi, weights, clipped)
}

/// Weighting competitor: `p(v | c)` from the observed pairs, `p*(v | c)`
/// from simulated interventional pairs `(v*, c)` drawn given the observed
/// `C`, both by the same conditional kernel estimator.
pub fn ani_estimate(
    dataset: &Dataset,
    policy: &InterventionPolicy,
    kde: &KdeConfig,
    seed: SeedNode,
) -> Result<AniEstimate> {
    if !policy.is_stochastic() {
        return Err(Error::InvalidParameter(
            "the weighting estimator needs a stochastic policy (deterministic laws have no density)".into(),
        ));
    }
    kde.validate()?;
    let n = dataset.n();
    let c = dataset.c();
    policy.validate(c.cols())?;
    let graph = dataset.network().graph();

    let draws = kde.n_star_draws.unwrap_or(10 * n).max(1);
    let rounds = draws.div_ceil(n);
    let mut rng = seed.rng();
    let mut z = vec![0.0; n];
    let mut v_star = NodeMatrix::zeros(rounds * n, 2);
    let mut c_star = NodeMatrix::zeros(rounds * n, c.cols());
    let mut v_round = vec![0.0; 2 * n];
    for r in 0..rounds {
        policy.draw_into(c.as_slice(), c.cols(), &mut rng, &mut z);
        summarize_z_into(&z, graph, dataset.summary(), &mut v_round);
        v_star.as_mut_slice()[2 * n * r..2 * n * (r + 1)].copy_from_slice(&v_round);
        let w = c.cols() * n;
        c_star.as_mut_slice()[w * r..w * (r + 1)].copy_from_slice(c.as_slice());
    }

    let observed = ConditionalKde::fit(dataset.v().clone(), c.clone(), kde)?;
    // Shared bandwidths: on discrete summaries the density at an atom scales
    // like 1/h, so separate rules would bias every ratio.
    let (hv, hc) = observed.bandwidths();
    let interventional = ConditionalKde::with_bandwidths(v_star, c_star, hv.to_vec(), hc.to_vec())?;
    let mut p_obs = Vec::with_capacity(n);
    let mut p_star = Vec::with_capacity(n);
    let mut n_floored = 0;
    for i in 0..n {
        let (vi, ci) = (dataset.v().row(i), c.row(i));
        // Leave node i out of both fits: its own kernel would otherwise
        // dominate the observed density in several dimensions.
        let po = observed.density_leave_out(vi, ci, i, n)?;
        let ps = interventional.density_leave_out(vi, ci, i, n)?;
        n_floored += usize::from(po <= DENSITY_FLOOR || ps <= DENSITY_FLOOR);
        p_obs.push(po);
        p_star.push(ps);
    }
    let y = dataset.y();
    let (psi, weights, n_clipped) = ipw_mean(y, &p_star, &p_obs, kde.clip);
    let terms: Vec<f64> = y.iter().zip(&weights).map(|(y, w)| y * w).collect();
    let var = terms.iter().map(|t| (t - psi).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let floor_warning = n_floored * 10 > n;
    if floor_warning {
        warn!("density floor reached at {n_floored} of {n} nodes; weights are unreliable");
    }
    Ok(AniEstimate {
        psi,
        se: (var / n as f64).sqrt(),
        clip: kde.clip,
        n_clipped,
        n_floored,
        floor_warning,
        mean_weight: weights.iter().sum::<f64>() / n as f64,
    })
}
