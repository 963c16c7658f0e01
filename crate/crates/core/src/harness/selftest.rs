//! Fast invariant suite behind the `selftest` subcommand.

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{ExperimentConfig, Method, NetworkSpec};
use super::study::Study;
use crate::competitors::{ConditionalKde, KdeConfig};
use crate::error::Result;
use crate::inference::BootstrapSettings;
use crate::initfit::{fit_at_rho, BasisSpec, LinearBasisModel};
use crate::netgraph::{gen_block, gen_powerlaw, Network};
use crate::seeds::SeedNode;
use crate::semgen::{gen_dataset, InterventionPolicy, NodeMatrix, SimConfig};
use crate::tmle::{estimate_psi, plug_in_bias, TargetedModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> SelfCheck {
    match run() {
        Ok((passed, detail)) => SelfCheck {
            name,
            passed,
            detail,
        },
        Err(e) => SelfCheck {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs every check; a few seconds in release builds.
pub fn run_selftest() -> Vec<SelfCheck> {
    let root = SeedNode::root(0x5e1f);
    vec![
        check("omega identities", || {
            let net = Network::new(gen_block(120, 6, 0.3, 0.01, &mut root.child(1).rng())?);
            let exact = net.w.omega(0.0)?.iter().all(|&v| v == 1.0);
            let mut worst = 0.0f64;
            for rho in [-0.9, -0.4, 0.3, 0.8] {
                let s: f64 = net.w.omega(rho)?.iter().sum();
                let target = 120.0 / (1.0 - rho);
                worst = worst.max((s - target).abs() / target);
            }
            Ok((
                exact && worst < 1e-10,
                format!("omega(0) = 1: {exact}; sum rel err {worst:.1e}"),
            ))
        }),
        check("SAR solve vs dense", || {
            let mut rng = root.child(2).rng();
            let net = Network::new(gen_powerlaw(40, 2, &mut rng)?);
            let r: Vec<f64> = (0..40).map(|_| rng.sample(StandardNormal)).collect();
            let rho = 0.7;
            let a = nalgebra::DMatrix::identity(40, 40) - net.w.to_dense() * rho;
            let dense = a
                .lu()
                .solve(&nalgebra::DVector::from_vec(r.clone()))
                .expect("nonsingular");
            let err = max_abs_diff(&net.w.solve_sar(rho, &r)?, dense.as_slice());
            Ok((err < 1e-8, format!("max abs err {err:.1e}")))
        }),
        check("targeting zeroes plug-in bias", || {
            let mut rng = root.child(3).rng();
            let net = Network::new(gen_block(80, 4, 0.3, 0.01, &mut rng)?);
            let d = gen_dataset(&SimConfig::with_nodes(80), &net, &mut rng)?;
            let mut worst = 0.0f64;
            for (basis, rho) in [
                (BasisSpec::correct(), 0.35),
                (BasisSpec::misspecified(), -0.5),
            ] {
                let fit = fit_at_rho(&d, &basis, 0.08, rho)?;
                let model = TargetedModel::target(&fit, &d)?;
                worst = worst.max(plug_in_bias(&model, &d)?.abs());
            }
            Ok((worst <= 1e-8, format!("max |bias| {worst:.1e}")))
        }),
        check("constant model closed form", || {
            let mut rng = root.child(4).rng();
            let net = Network::new(gen_block(50, 2, 0.3, 0.02, &mut rng)?);
            let d = gen_dataset(&SimConfig::with_nodes(50), &net, &mut rng)?;
            let (rho, t) = (0.4, 0.25);
            let model = TargetedModel::from_parts(&net.w, rho, LinearBasisModel::constant(1.3), t)?;
            let sum_w2: f64 = model.omega.iter().map(|w| w * w).sum();
            let want = 1.3 / (1.0 - rho) + t * sum_w2 / 50.0;
            let policy = InterventionPolicy::Stochastic { prob: 0.5 };
            let est = estimate_psi(&model, &d, &policy, 20, root.child(5))?;
            let err = (est.psi - want).abs();
            Ok((err < 1e-10, format!("|psi - closed form| {err:.1e}")))
        }),
        check("KDE normalization", || {
            let mut rng = root.child(6).rng();
            let v = NodeMatrix::from_row_major(
                1,
                (0..2000).map(|_| rng.sample(StandardNormal)).collect(),
            )?;
            // A constant conditioning column reduces p(v|c) to the marginal.
            let c = NodeMatrix::from_row_major(1, vec![0.0; 2000])?;
            let kde = ConditionalKde::fit(v, c, &KdeConfig::default())?;
            let step = 0.02;
            let mut mass = 0.0;
            for k in 0..500 {
                let q = -5.0 + step * (k as f64 + 0.5);
                mass += kde.density(&[q], &[0.0])? * step;
            }
            Ok(((mass - 1.0).abs() < 0.02, format!("integral {mass:.4}")))
        }),
        check("replication determinism", || {
            let config = ExperimentConfig {
                replications: 2,
                methods: vec![Method::Tmle, Method::De, Method::Ndi],
                oracle_n_mc: 2000,
                network: NetworkSpec::block(2, 0.3, 0.02),
                sim: SimConfig::with_nodes(40),
                bootstrap: BootstrapSettings {
                    n_boot: 20,
                    outer: 5,
                    inner: 5,
                },
                ..ExperimentConfig::default()
            };
            let study = Study::new(&config)?;
            let (a, _) = study.run_replication(1)?;
            let (b, _) = study.run_replication(1)?;
            let (c, _) = study.run_replication(0)?;
            let same = a == b;
            let distinct = a.methods != c.methods;
            Ok((
                same && distinct,
                format!("repeat identical: {same}; replications differ: {distinct}"),
            ))
        }),
    ]
}
