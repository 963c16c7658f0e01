//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. `ACCEPTANCE_ONLY=1,3` restricts the run.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use nartmle::harness::{run_study, ExperimentConfig, Method, MethodMetrics};
use nartmle::inference::{hg_efficiency_oracle, sigma_x_bootstrap, sigma_x_projection_oracle};
use nartmle::initfit::{fit_at_rho, profile_rho, BasisSpec, LinearBasisModel, ProfileCriterion};
use nartmle::netgraph::{gen_block, gen_powerlaw, ring, AdjacencyGraph, Network};
use nartmle::seeds::SeedNode;
use nartmle::semgen::{gen_dataset, oracle_psi, InterventionPolicy, SimConfig, SummaryKind};
use nartmle::tmle::{estimate_psi, plug_in_bias, TargetedModel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_graph<R: Rng>(n: usize, rng: &mut R) -> AdjacencyGraph {
    match rng.random_range(0..3) {
        0 => gen_block(n, (n / 20).max(1), 0.3, 0.3 / n as f64, rng).unwrap(),
        1 => gen_powerlaw(n, rng.random_range(1..=3), rng).unwrap(),
        _ => ring(n).unwrap(),
    }
}

fn criterion_1() -> Outcome {
    let root = SeedNode::root(101);
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let mut rng = root.child(k).rng();
        let n = rng.random_range(20..=200);
        let net = Network::new(random_graph(n, &mut rng));
        let mut config = SimConfig::with_nodes(n);
        config.rho0 = rng.random_range(-0.8..0.8);
        let d = gen_dataset(&config, &net, &mut rng).unwrap();
        let basis = if k % 2 == 0 {
            BasisSpec::correct()
        } else {
            BasisSpec::misspecified()
        };
        let rho = rng.random_range(-0.8..0.8);
        let fit = fit_at_rho(&d, &basis, 1e-3 * n as f64, rho).unwrap();
        let model = TargetedModel::target(&fit, &d).unwrap();
        worst = worst.max(plug_in_bias(&model, &d).unwrap().abs());
    }
    outcome(
        worst <= 1e-8,
        format!("max |plug-in bias| = {worst:.2e} over 100 instances (tol 1e-8)"),
    )
}

fn criterion_2() -> Outcome {
    let root = SeedNode::root(202);
    let mut omega_zero_exact = true;
    let mut sum_err = 0.0f64;
    let mut dense_err = 0.0f64;
    let mut neumann_ok = true;
    for k in 0..200u64 {
        let mut rng = root.child(k).rng();
        let n = rng.random_range(3..=50);
        let w = Network::new(random_graph(n, &mut rng)).w;
        omega_zero_exact &= w.omega(0.0).unwrap().iter().all(|&v| v == 1.0);
        let rho = rng.random_range(-0.95..=0.95);
        let omega = w.omega(rho).unwrap();
        let target = n as f64 / (1.0 - rho);
        sum_err = sum_err.max((omega.iter().sum::<f64>() - target).abs() / target);

        let dense = w.to_dense();
        let a = DMatrix::identity(n, n) - rho * &dense;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y_direct = a
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(&r))
            .unwrap();
        let om_direct = a
            .transpose()
            .lu()
            .solve(&DVector::from_element(n, 1.0))
            .unwrap();
        let y = w.solve_sar(rho, &r).unwrap();
        dense_err = dense_err
            .max((DVector::from_column_slice(&y) - &y_direct).amax())
            .max((DVector::from_column_slice(&omega) - om_direct).amax());

        // K-term Neumann partial sums stay within the geometric tail bound,
        // up to the solver's own convergence tolerance.
        let rnorm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut term = DVector::from_column_slice(&r);
        let mut partial = term.clone();
        for kk in 1..=30 {
            term = rho * (&dense * &term);
            partial += &term;
            let err = (DVector::from_column_slice(&y) - &partial).amax();
            let bound = rnorm * rho.abs().powi(kk + 1) / (1.0 - rho.abs());
            neumann_ok &= err <= bound + 1e-10 * (1.0 + rnorm);
        }
    }
    let pass = omega_zero_exact && sum_err <= 1e-10 && dense_err <= 1e-8 && neumann_ok;
    outcome(
        pass,
        format!(
            "omega(0)=1 exact: {omega_zero_exact}; max rel err sum(omega) {sum_err:.1e} (tol 1e-10); \
             max dense mismatch {dense_err:.1e} (tol 1e-8); Neumann tail bound holds: {neumann_ok}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let n = 30;
    let mut rng = SeedNode::root(303).rng();
    let net = Network::new(gen_block(n, 2, 0.3, 0.02, &mut rng).unwrap());
    let config = SimConfig::with_nodes(n);
    let policy = InterventionPolicy::Stochastic { prob: 0.6 };
    let truth = oracle_psi(&config, &net, &policy, 1_000_000, SeedNode::root(304)).unwrap();

    // Psi(P_hat) differs from Psi(P) by covariate-sampling error, so the
    // B = 1e5 replicates are spread over fresh datasets: 1000 datasets x 100.
    let g = LinearBasisModel::new(
        BasisSpec::correct(),
        config.coefficients.basis_coefficients(),
        2,
    )
    .unwrap();
    let model = TargetedModel::from_parts(&net.w, config.rho0, g, 0.0).unwrap();
    let root = SeedNode::root(305);
    let values: Vec<f64> = (0..1000u64)
        .map(|k| {
            let d = gen_dataset(&config, &net, &mut root.path(&[0, k]).rng()).unwrap();
            estimate_psi(&model, &d, &policy, 100, root.path(&[1, k]))
                .unwrap()
                .psi
        })
        .collect();
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let se = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt();
    let combined = se.hypot(truth.mc_se);
    let z = (mean - truth.psi) / combined;
    outcome(
        z.abs() <= 3.0,
        format!(
            "estimate {mean:.5} vs oracle {:.5} (combined MC SE {combined:.5}, z = {z:.2}, tol |z| <= 3)",
            truth.psi
        ),
    )
}

fn study(
    seed: u64,
    n: usize,
    rho0: f64,
    replications: usize,
    methods: Vec<Method>,
) -> ExperimentConfig {
    let mut config = ExperimentConfig {
        seed,
        replications,
        methods,
        ..ExperimentConfig::default()
    };
    config.sim.n_nodes = n;
    config.sim.rho0 = rho0;
    config
}

fn metric(row: Option<&MethodMetrics>, f: impl Fn(&MethodMetrics) -> Option<f64>) -> f64 {
    row.and_then(f).unwrap_or(f64::NAN)
}

fn criterion_4() -> Outcome {
    let dep = run_study(&study(
        4040,
        400,
        0.4,
        200,
        vec![Method::Tmle, Method::De, Method::Ndi],
    ))
    .unwrap()
    .0
    .metrics;
    let indep = run_study(&study(4041, 400, 0.0, 200, vec![Method::Tmle]))
        .unwrap()
        .0
        .metrics;
    let bias = |t: &nartmle::harness::MetricsTable, m| metric(t.get(m), |r| r.bias);
    let cp = |t: &nartmle::harness::MetricsTable, m| metric(t.get(m), |r| r.cp);
    let checks = [
        (
            format!(
                "rho=0.4 TMLE bias {:.4} (|.| <= 0.03)",
                bias(&dep, Method::Tmle)
            ),
            bias(&dep, Method::Tmle).abs() <= 0.03,
        ),
        (
            format!("TMLE CP {:.3} ([0.92, 0.99])", cp(&dep, Method::Tmle)),
            (0.92..=0.99).contains(&cp(&dep, Method::Tmle)),
        ),
        (
            format!("DE bias {:.4} (<= -0.06)", bias(&dep, Method::De)),
            bias(&dep, Method::De) <= -0.06,
        ),
        (
            format!("DE CP {:.3} (<= 0.95)", cp(&dep, Method::De)),
            cp(&dep, Method::De) <= 0.95,
        ),
        (
            format!("NDI CP {:.3} (<= 0.92)", cp(&dep, Method::Ndi)),
            cp(&dep, Method::Ndi) <= 0.92,
        ),
        (
            format!(
                "rho=0 TMLE bias {:.4} (|.| <= 0.02)",
                bias(&indep, Method::Tmle)
            ),
            bias(&indep, Method::Tmle).abs() <= 0.02,
        ),
        (
            format!("TMLE CP {:.3} ([0.91, 0.98])", cp(&indep, Method::Tmle)),
            (0.91..=0.98).contains(&cp(&indep, Method::Tmle)),
        ),
    ];
    let pass = checks.iter().all(|(_, ok)| *ok);
    let detail = checks
        .iter()
        .map(|(d, ok)| format!("{d}{}", if *ok { "" } else { " FAILED" }))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn criterion_5() -> Outcome {
    let metrics = run_study(&study(5050, 800, 0.4, 200, vec![Method::Tmle]))
        .unwrap()
        .0
        .metrics;
    let row = metrics.get(Method::Tmle);
    let ratio = metric(row, |r| r.mean_se) / metric(row, |r| r.se);
    outcome(
        (0.85..=1.15).contains(&ratio),
        format!("mean SE / empirical SD = {ratio:.3} (tol [0.85, 1.15])"),
    )
}

fn criterion_6() -> Outcome {
    let n = 40;
    let mut lines = Vec::new();
    let mut pass = true;
    let configs: Vec<(&str, AdjacencyGraph, f64, InterventionPolicy, SummaryKind)> = {
        let mut rng = SeedNode::root(606).rng();
        vec![
            (
                "block/stochastic",
                gen_block(n, 2, 0.3, 0.02, &mut rng).unwrap(),
                0.4,
                InterventionPolicy::Stochastic { prob: 0.6 },
                SummaryKind::Mean,
            ),
            (
                "powerlaw/logistic",
                gen_powerlaw(n, 2, &mut rng).unwrap(),
                0.4,
                InterventionPolicy::Logistic {
                    intercept: 0.2,
                    slopes: vec![0.8, -0.5, 0.6, 0.4],
                },
                SummaryKind::Mean,
            ),
            (
                "ring/threshold",
                ring(n).unwrap(),
                0.6,
                InterventionPolicy::Threshold {
                    feature: 2,
                    threshold: 0.0,
                    assign: 1.0,
                    otherwise: 0.0,
                },
                SummaryKind::Mean,
            ),
            (
                "block/logistic/sum",
                gen_block(n, 4, 0.5, 0.01, &mut rng).unwrap(),
                -0.3,
                InterventionPolicy::Logistic {
                    intercept: -0.3,
                    slopes: vec![0.5, 0.5, 0.2, 0.2],
                },
                SummaryKind::Sum,
            ),
            (
                "powerlaw/stochastic",
                gen_powerlaw(n, 1, &mut rng).unwrap(),
                0.8,
                InterventionPolicy::Stochastic { prob: 0.3 },
                SummaryKind::Mean,
            ),
        ]
    };
    for (k, (name, graph, rho, policy, summary)) in configs.into_iter().enumerate() {
        let net = Network::new(graph);
        let mut config = SimConfig::with_nodes(n);
        config.rho0 = rho;
        config.summary = summary;
        let check = hg_efficiency_oracle(
            &config,
            &net,
            &policy,
            2000,
            SeedNode::root(607).child(k as u64),
        )
        .unwrap();
        let ok = check.var_h <= 1.1 * check.var_g;
        pass &= ok;
        lines.push(format!(
            "{name}: var_H {:.4e} / var_G {:.4e} = {:.3}",
            check.var_h,
            check.var_g,
            check.var_h / check.var_g
        ));
    }
    outcome(pass, format!("{} (tol ratio <= 1.1)", lines.join("; ")))
}

fn criterion_7() -> Outcome {
    let n = 50;
    let mut rng = SeedNode::root(707).rng();
    let net = Network::new(gen_block(n, 2, 0.3, 0.02, &mut rng).unwrap());
    let config = SimConfig::with_nodes(n);
    let d = gen_dataset(&config, &net, &mut rng).unwrap();
    let policy = InterventionPolicy::Stochastic { prob: 0.6 };
    let fit = profile_rho(
        &d,
        &BasisSpec::correct(),
        1e-3 * n as f64,
        ProfileCriterion::default(),
        None,
    )
    .unwrap();
    let model = TargetedModel::target(&fit, &d).unwrap();
    let boot = sigma_x_bootstrap(&model, &d, &policy, 500, 500, SeedNode::root(708)).unwrap();
    let proj = sigma_x_projection_oracle(&model, &d, &policy, 2000, SeedNode::root(709)).unwrap();
    let rel = (boot - proj).abs() / proj;
    outcome(
        rel <= 0.2,
        format!(
            "bootstrap {boot:.4e} vs projection {proj:.4e}: relative difference {rel:.3} (tol 0.2)"
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.toml");
    std::fs::write(
        &config,
        "seed = 88\nreplications = 4\noracle_n_mc = 5000\n\
         [sim]\nn_nodes = 60\nrho0 = 0.3\n\
         [bootstrap]\nn_boot = 20\nouter = 4\ninner = 4\n",
    )
    .unwrap();
    let run = |workers: &str, out: &str| {
        let out = dir.path().join(out);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_nartmle"))
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--workers", workers])
            .output()
            .unwrap()
            .status;
        assert!(status.success(), "simulate failed: {status}");
        let json = std::fs::read(out.join("report.json")).unwrap();
        // Drop the trailing runtime_s column.
        let csv: Vec<String> = std::fs::read_to_string(out.join("report.csv"))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
            .collect();
        (json, csv)
    };
    let a = run("1", "a");
    let b = run("1", "b");
    let c = run("3", "c");
    let pass = a == b && a == c;
    outcome(
        pass,
        format!(
            "repeat identical: {}; 1 vs 3 workers identical: {}",
            a == b,
            a == c
        ),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    type Check = fn() -> Outcome;
    let checks: [(u32, &str, Check, Duration); 8] = [
        (
            1,
            "targeting exactness",
            criterion_1,
            Duration::from_secs(10),
        ),
        (
            2,
            "linear-algebra oracles",
            criterion_2,
            Duration::from_secs(5),
        ),
        (
            3,
            "identification oracle",
            criterion_3,
            Duration::from_secs(120),
        ),
        (
            4,
            "simulation table pattern",
            criterion_4,
            Duration::from_secs(1800),
        ),
        (
            5,
            "variance calibration",
            criterion_5,
            Duration::from_secs(1800),
        ),
        (
            6,
            "efficiency inequality",
            criterion_6,
            Duration::from_secs(300),
        ),
        (
            7,
            "variance cross-check",
            criterion_7,
            Duration::from_secs(600),
        ),
        (8, "determinism", criterion_8, Duration::from_secs(120)),
    ];
    let mut failures = 0;
    for (id, name, check, budget) in checks {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= budget;
        failures += usize::from(!pass);
        println!(
            "criterion {id} [{}] {name}: {} ({:.1}s, budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
