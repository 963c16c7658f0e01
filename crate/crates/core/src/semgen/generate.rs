use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{NoiseKind, OutcomeCoefficients, SimConfig};
use super::policy::InterventionPolicy;
use super::summary::{
    summarize_x, summarize_x_into, summarize_z, summarize_z_into, NodeMatrix, SummaryKind,
};
use crate::error::{Error, Result};
use crate::netgraph::{dot, Network};
use crate::seeds::SeedNode;

/// Observed node data bound to a network, with derived summaries.
#[derive(Debug, Clone)]
pub struct Dataset {
    network: Network,
    y: Vec<f64>,
    z: Vec<f64>,
    x: NodeMatrix,
    v: NodeMatrix,
    c: NodeMatrix,
    summary: SummaryKind,
}

impl Dataset {
    /// Builds a dataset and computes `V = s_Z(z)` and `C = s_X(x)`.
    pub fn new(
        network: Network,
        y: Vec<f64>,
        z: Vec<f64>,
        x: NodeMatrix,
        summary: SummaryKind,
    ) -> Result<Self> {
        let n = network.n();
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "y has length {}, network has {n} nodes",
                y.len()
            )));
        }
        let v = summarize_z(&z, network.graph(), summary)?;
        let c = summarize_x(&x, network.graph(), summary)?;
        Ok(Dataset {
            network,
            y,
            z,
            x,
            v,
            c,
            summary,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Covariate dimension `p`.
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn x(&self) -> &NodeMatrix {
        &self.x
    }

    pub fn v(&self) -> &NodeMatrix {
        &self.v
    }

    pub fn c(&self) -> &NodeMatrix {
        &self.c
    }

    pub fn summary(&self) -> SummaryKind {
        self.summary
    }

    /// Same covariates and treatments with a replaced outcome vector.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::Dimension("replacement y has wrong length".into()));
        }
        Ok(Dataset { y, ..self.clone() })
    }
}

/// `g0(v_i, c_i)` for the simulation DGP with `v_i = (z, zbar)` and
/// `c_i = (x1, x2, xbar1, xbar2)`.
pub fn true_g(v_i: &[f64], c_i: &[f64], coef: &OutcomeCoefficients) -> f64 {
    let (z, zbar) = (v_i[0], v_i[1]);
    let (x1, x2, xb1, xb2) = (c_i[0], c_i[1], c_i[2], c_i[3]);
    let [g1, g2, g3, g4] = coef.gamma;
    coef.intercept
        + coef.own_treatment * z
        + coef.neighbor_treatment * zbar
        + coef.own_x[0] * x1
        + coef.own_x[1] * x2
        + coef.neighbor_x[0] * xb1
        + coef.neighbor_x[1] * xb2
        + g1 * z * x1
        + g2 * x1 * x1
        + g3 * x2 * x2
        + g4 * x2 * x2 * x2
}

fn check_config(config: &SimConfig, network: &Network) -> Result<()> {
    config.validate()?;
    if config.n_nodes != network.n() {
        return Err(Error::Dimension(format!(
            "config n_nodes = {} but network has {} nodes",
            config.n_nodes,
            network.n()
        )));
    }
    network.w.check_rho(config.rho0)
}

fn fill_noise<R: Rng + ?Sized>(kind: NoiseKind, sd: f64, rng: &mut R, out: &mut [f64]) {
    match kind {
        NoiseKind::Gaussian => out
            .iter_mut()
            .for_each(|e| *e = sd * rng.sample::<f64, _>(StandardNormal)),
        NoiseKind::Uniform => {
            let half = sd * 3f64.sqrt();
            out.iter_mut()
                .for_each(|e| *e = rng.random_range(-half..=half));
        }
    }
}

fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    out.iter_mut().for_each(|e| *e = rng.sample(StandardNormal));
}

/// Draws one dataset from the structural model:
/// `X ~ N(0, I)`, `Z_i ~ Bernoulli(logistic(alpha . C_i))`,
/// `Y = (I - rho0 W)^{-1}(g0(V, C) + eps)`.
pub fn gen_dataset<R: Rng + ?Sized>(
    config: &SimConfig,
    network: &Network,
    rng: &mut R,
) -> Result<Dataset> {
    check_config(config, network)?;
    let n = network.n();
    let p = config.x_dim;
    let mut x = NodeMatrix::zeros(n, p);
    fill_normal(rng, x.as_mut_slice());
    let c = summarize_x(&x, network.graph(), config.summary)?;
    let z: Vec<f64> = (0..n)
        .map(|i| f64::from(rng.random::<f64>() < config.treatment_logit.prob(c.row(i))))
        .collect();
    let v = summarize_z(&z, network.graph(), config.summary)?;
    let mut r = vec![0.0; n];
    fill_noise(config.noise, config.noise_sd, rng, &mut r);
    for (i, ri) in r.iter_mut().enumerate() {
        *ri += true_g(v.row(i), c.row(i), &config.coefficients);
    }
    let y = network.w.solve_sar(config.rho0, &r)?;
    Ok(Dataset {
        network: network.clone(),
        y,
        z,
        x,
        v,
        c,
        summary: config.summary,
    })
}

/// Monte Carlo ground truth `E[N^{-1} 1' Y(Z*)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub psi: f64,
    pub mc_se: f64,
    pub n_mc: usize,
}

const ORACLE_CHUNK: usize = 1000;

/// Averages the network-mean interventional outcome over `n_mc` fresh draws
/// of `(X, Z*, eps)`. Draws are split into fixed-size chunks, each with its
/// own stream `seed.child(chunk)`, so the result does not depend on thread count.
pub fn oracle_psi(
    config: &SimConfig,
    network: &Network,
    policy: &InterventionPolicy,
    n_mc: usize,
    seed: SeedNode,
) -> Result<OracleEstimate> {
    check_config(config, network)?;
    if n_mc < 1000 {
        return Err(Error::InvalidParameter(format!(
            "oracle needs n_mc >= 1000, got {n_mc}"
        )));
    }
    let p = config.x_dim;
    policy.validate(2 * p)?;
    let n = network.n();
    let omega = network.w.omega(config.rho0)?;
    let graph = network.graph();
    let n_chunks = n_mc.div_ceil(ORACLE_CHUNK);

    let sums: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let draws = ORACLE_CHUNK.min(n_mc - chunk * ORACLE_CHUNK);
            let mut rng = seed.child(chunk as u64).rng();
            let mut x = vec![0.0; n * p];
            let mut c = vec![0.0; n * 2 * p];
            let mut z = vec![0.0; n];
            let mut v = vec![0.0; n * 2];
            let mut r = vec![0.0; n];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..draws {
                fill_normal(&mut rng, &mut x);
                summarize_x_into(&x, p, None, graph, config.summary, &mut c);
                policy.draw_into(&c, 2 * p, &mut rng, &mut z);
                summarize_z_into(&z, graph, config.summary, &mut v);
                fill_noise(config.noise, config.noise_sd, &mut rng, &mut r);
                for (i, ri) in r.iter_mut().enumerate() {
                    *ri += true_g(
                        &v[2 * i..2 * i + 2],
                        &c[2 * p * i..2 * p * (i + 1)],
                        &config.coefficients,
                    );
                }
                let value = dot(&omega, &r) / n as f64;
                s1 += value;
                s2 += value * value;
            }
            (s1, s2)
        })
        .collect();

    let (s1, s2) = sums
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let m = n_mc as f64;
    let psi = s1 / m;
    let var = ((s2 - m * psi * psi) / (m - 1.0)).max(0.0);
    Ok(OracleEstimate {
        psi,
        mc_se: (var / m).sqrt(),
        n_mc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{gen_block, ring};

    fn network(n: usize) -> Network {
        Network::new(ring(n).unwrap())
    }

    #[test]
    fn true_g_reference_values() {
        let zero = OutcomeCoefficients::zero();
        assert_eq!(true_g(&[1.0, 0.5], &[0.3, -1.0, 2.0, 0.1], &zero), 0.0);
        let one = OutcomeCoefficients::constant(1.0);
        assert_eq!(true_g(&[0.0, 0.7], &[9.0, -3.0, 1.0, 0.0], &one), 1.0);

        // 0.5 + 1 + 0.8*0.5 + 0.6*0.3 - 0.4*(-1) + 0.3*2 + 0.3*0.1
        //   + 0.5*0.3 + 0.3*0.09 - 0.3*1 + 0.2*(-1) = 2.787
        let value = true_g(
            &[1.0, 0.5],
            &[0.3, -1.0, 2.0, 0.1],
            &OutcomeCoefficients::default(),
        );
        assert!((value - 2.787).abs() < 1e-12, "{value}");
    }

    #[test]
    fn noiseless_constant_outcomes() {
        let net = network(12);
        let mut config = SimConfig::with_nodes(12);
        config.noise_sd = 0.0;
        config.coefficients = OutcomeCoefficients::constant(3.5);
        config.rho0 = 0.0;
        let d = gen_dataset(&config, &net, &mut SeedNode::root(1).rng()).unwrap();
        assert!(d.y().iter().all(|&y| y == 3.5));

        config.rho0 = 0.5;
        config.coefficients = OutcomeCoefficients::constant(1.0);
        let d = gen_dataset(&config, &net, &mut SeedNode::root(1).rng()).unwrap();
        assert!(d.y().iter().all(|&y| (y - 2.0).abs() < 1e-10));
    }

    #[test]
    fn noiseless_rho_zero_recovers_g() {
        let net = network(20);
        let mut config = SimConfig::with_nodes(20);
        config.noise_sd = 0.0;
        config.rho0 = 0.0;
        let d = gen_dataset(&config, &net, &mut SeedNode::root(5).rng()).unwrap();
        for i in 0..20 {
            assert_eq!(
                d.y()[i],
                true_g(d.v().row(i), d.c().row(i), &config.coefficients)
            );
        }
    }

    #[test]
    fn covariate_moments() {
        let n = 100_000;
        let net = network(n);
        let config = SimConfig::with_nodes(n);
        let d = gen_dataset(&config, &net, &mut SeedNode::root(3).rng()).unwrap();
        for col in 0..2 {
            let x = d.x().column(col);
            let mean = x.iter().sum::<f64>() / n as f64;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
            assert!(
                (var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(),
                "var {var}"
            );
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let mut rng = SeedNode::root(11).rng();
        let graph = gen_block(60, 3, 0.3, 0.01, &mut rng).unwrap();
        let net = Network::new(graph);
        let config = SimConfig::with_nodes(60);
        let a = gen_dataset(&config, &net, &mut SeedNode::root(2).rng()).unwrap();
        let b = gen_dataset(&config, &net, &mut SeedNode::root(2).rng()).unwrap();
        assert_eq!(a.y(), b.y());
        assert_eq!(a.x(), b.x());
        assert_eq!(a.z(), b.z());
    }

    #[test]
    fn rejects_mismatched_sizes() {
        let net = network(10);
        let config = SimConfig::with_nodes(11);
        assert!(matches!(
            gen_dataset(&config, &net, &mut SeedNode::root(0).rng()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn oracle_constant_model() {
        let net = network(10);
        let policy = InterventionPolicy::Stochastic { prob: 0.5 };
        let mut config = SimConfig::with_nodes(10);
        config.coefficients = OutcomeCoefficients::constant(1.0);
        config.noise_sd = 0.0;
        config.rho0 = 0.5;
        let o = oracle_psi(&config, &net, &policy, 1000, SeedNode::root(1)).unwrap();
        assert!((o.psi - 2.0).abs() < 1e-9);

        config.rho0 = 0.0;
        config.coefficients = OutcomeCoefficients::constant(0.7);
        config.noise_sd = 1.0;
        let o = oracle_psi(&config, &net, &policy, 20_000, SeedNode::root(1)).unwrap();
        assert!((o.psi - 0.7).abs() < 3.0 * o.mc_se, "{o:?}");
        let expected_se = 1.0 / (10.0f64 * 20_000.0).sqrt();
        assert!((o.mc_se / expected_se - 1.0).abs() < 0.05);
    }

    #[test]
    fn oracle_intercept_only_matches_closed_form() {
        let net = network(16);
        let policy = InterventionPolicy::Stochastic { prob: 0.6 };
        let mut config = SimConfig::with_nodes(16);
        config.coefficients = OutcomeCoefficients::constant(0.5);
        config.rho0 = 0.4;
        let o = oracle_psi(&config, &net, &policy, 10_000, SeedNode::root(8)).unwrap();
        assert!((o.psi - 0.5 / 0.6).abs() < 3.0 * o.mc_se);
    }

    #[test]
    fn oracle_runs_are_self_consistent() {
        let net = network(20);
        let policy = InterventionPolicy::Stochastic { prob: 0.6 };
        let config = SimConfig::with_nodes(20);
        let a = oracle_psi(&config, &net, &policy, 20_000, SeedNode::root(1)).unwrap();
        let b = oracle_psi(&config, &net, &policy, 20_000, SeedNode::root(2)).unwrap();
        let combined = a.mc_se.hypot(b.mc_se);
        assert!((a.psi - b.psi).abs() < 3.0 * combined);
        let again = oracle_psi(&config, &net, &policy, 20_000, SeedNode::root(1)).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn oracle_rejects_small_n_mc() {
        let net = network(10);
        let policy = InterventionPolicy::Stochastic { prob: 0.5 };
        assert!(oracle_psi(
            &SimConfig::with_nodes(10),
            &net,
            &policy,
            999,
            SeedNode::root(0)
        )
        .is_err());
    }
}
