use serde::{Deserialize, Serialize};

use super::config::Method;
use super::study::ReplicationResult;

/// Aggregates for one method. Statistics are `None` when every replication
/// of the method failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: Method,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_psi: Option<f64>,
    /// `mean(psi_hat - psi_true)`.
    pub bias: Option<f64>,
    /// Empirical SD of `psi_hat` with divisor `R`.
    pub se: Option<f64>,
    /// Fraction of reported intervals that contain the truth.
    pub cp: Option<f64>,
    pub mean_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub replications: usize,
    pub psi_true: f64,
    /// Monte Carlo SE of `psi_true` (of the mean truth when the network is
    /// redrawn per replication).
    pub psi_true_mc_se: f64,
    pub methods: Vec<MethodMetrics>,
    pub warnings: Vec<String>,
}

impl MetricsTable {
    /// Scores each replication's intervals against its own truth.
    pub fn from_replications(reps: &[ReplicationResult], methods: &[Method]) -> Self {
        let r = reps.len().max(1) as f64;
        let psi_true = reps.iter().map(|x| x.psi_true).sum::<f64>() / r;
        let shared = reps.windows(2).all(|w| w[0].psi_true == w[1].psi_true);
        let (psi_true_mc_se, per_truth_se) = if shared {
            let se = reps.first().map_or(0.0, |x| x.psi_true_mc_se);
            (se, se)
        } else {
            let ms = reps.iter().map(|x| x.psi_true_mc_se.powi(2)).sum::<f64>() / r;
            ((ms / r).sqrt(), ms.sqrt())
        };

        let mut warnings = Vec::new();
        let rows: Vec<MethodMetrics> = methods
            .iter()
            .map(|&method| {
                let ok: Vec<(f64, &super::study::MethodResult)> = reps
                    .iter()
                    .filter_map(|x| x.methods.get(&method)?.result().map(|m| (x.psi_true, m)))
                    .collect();
                let n_failed = reps.len() - ok.len();
                if n_failed > 0 {
                    warnings.push(format!("{method}: {n_failed} of {} replications failed", reps.len()));
                }
                if ok.is_empty() {
                    return MethodMetrics {
                        method,
                        n_ok: 0,
                        n_failed,
                        mean_psi: None,
                        bias: None,
                        se: None,
                        cp: None,
                        mean_se: None,
                    };
                }
                let k = ok.len() as f64;
                let mean_psi = ok.iter().map(|(_, m)| m.psi_hat).sum::<f64>() / k;
                let bias = ok.iter().map(|(t, m)| m.psi_hat - t).sum::<f64>() / k;
                let se = (ok.iter().map(|(_, m)| (m.psi_hat - mean_psi).powi(2)).sum::<f64>() / k).sqrt();
                let covered = ok.iter().filter(|(t, m)| m.ci_lo <= *t && *t <= m.ci_hi).count();
                let mean_se = ok.iter().map(|(_, m)| m.se).sum::<f64>() / k;
                if ok.len() > 1 && per_truth_se > 0.1 * se {
                    warnings.push(format!(
                        "{method}: oracle MC SE {per_truth_se:.3e} exceeds 10% of the empirical SE {se:.3e}; \
                         increase oracle_n_mc"
                    ));
                }
                MethodMetrics {
                    method,
                    n_ok: ok.len(),
                    n_failed,
                    mean_psi: Some(mean_psi),
                    bias: Some(bias),
                    se: Some(se),
                    cp: Some(covered as f64 / k),
                    mean_se: Some(mean_se),
                }
            })
            .collect();
        MetricsTable {
            replications: reps.len(),
            psi_true,
            psi_true_mc_se,
            methods: rows,
            warnings,
        }
    }

    pub fn get(&self, method: Method) -> Option<&MethodMetrics> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::harness::study::{Diagnostics, MethodOutcome, MethodResult};

    fn rep(r: usize, truth: f64, psi: f64, half: f64) -> ReplicationResult {
        let mut methods = BTreeMap::new();
        methods.insert(
            Method::Tmle,
            MethodOutcome::Ok(MethodResult {
                psi_hat: psi,
                se: half / 2.0,
                ci_lo: psi - half,
                ci_hi: psi + half,
                t_star: None,
                rho_hat0: None,
                diagnostics: Diagnostics::default(),
            }),
        );
        methods.insert(
            Method::Ani,
            MethodOutcome::Failed {
                error: "boom".into(),
            },
        );
        ReplicationResult {
            replication: r,
            psi_true: truth,
            psi_true_mc_se: 1e-4,
            methods,
        }
    }

    #[test]
    fn hand_computed_aggregates() {
        let reps = [
            rep(0, 1.0, 1.1, 0.2),
            rep(1, 1.0, 0.7, 0.2),
            rep(2, 1.0, 1.0, 0.05),
        ];
        let t = MetricsTable::from_replications(&reps, &[Method::Tmle, Method::Ani]);
        let m = t.get(Method::Tmle).unwrap();
        let mean: f64 = (1.1 + 0.7 + 1.0) / 3.0;
        assert!((m.bias.unwrap() - (mean - 1.0)).abs() < 1e-12);
        let var = ((1.1 - mean).powi(2) + (0.7 - mean).powi(2) + (1.0 - mean).powi(2)) / 3.0;
        assert!((m.se.unwrap() - var.sqrt()).abs() < 1e-12);
        assert!((m.cp.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.mean_se.unwrap() - 0.075).abs() < 1e-12);
        let a = t.get(Method::Ani).unwrap();
        assert_eq!((a.n_ok, a.n_failed, a.cp), (0, 3, None));
        assert!(t.warnings.iter().any(|w| w.starts_with("ani")));
    }

    #[test]
    fn single_replication_is_degenerate() {
        let t = MetricsTable::from_replications(&[rep(0, 2.0, 2.5, 0.1)], &[Method::Tmle]);
        let m = t.get(Method::Tmle).unwrap();
        assert_eq!(m.se, Some(0.0));
        assert_eq!(m.cp, Some(0.0));
    }

    #[test]
    fn noisy_truth_warns() {
        let mut reps = vec![rep(0, 1.0, 1.0, 0.1), rep(1, 1.0, 1.0001, 0.1)];
        reps.iter_mut().for_each(|r| r.psi_true_mc_se = 0.01);
        let t = MetricsTable::from_replications(&reps, &[Method::Tmle]);
        assert!(
            t.warnings.iter().any(|w| w.contains("oracle MC SE")),
            "{:?}",
            t.warnings
        );
    }
}
