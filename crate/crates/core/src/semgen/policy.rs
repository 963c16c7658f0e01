use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::logistic;
use super::summary::{summarize_z_into, NodeMatrix, SummaryKind};
use crate::error::{Error, Result};
use crate::netgraph::AdjacencyGraph;

/// Known conditional law of the intervention `P*(Z* | C)`, independent
/// across nodes given the covariate summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterventionPolicy {
    /// Every node treated with the same probability.
    Stochastic { prob: f64 },
    /// `P(Z*=1 | C_i) = logistic(intercept + slopes . C_i)`.
    Logistic { intercept: f64, slopes: Vec<f64> },
    /// Every node set to `value` (0 or 1).
    Deterministic { value: f64 },
    /// `Z*_i = assign` when `C_i[feature] >= threshold`, else `otherwise`.
    Threshold {
        feature: usize,
        threshold: f64,
        assign: f64,
        otherwise: f64,
    },
}

impl InterventionPolicy {
    pub fn validate(&self, c_dim: usize) -> Result<()> {
        let binary = |v: f64| v == 0.0 || v == 1.0;
        match self {
            InterventionPolicy::Stochastic { prob } => {
                if !(*prob > 0.0 && *prob < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "stochastic policy requires 0 < prob < 1 (positivity), got {prob}"
                    )));
                }
            }
            InterventionPolicy::Logistic { intercept, slopes } => {
                if slopes.len() != c_dim {
                    return Err(Error::Dimension(format!(
                        "logistic policy has {} slopes for {c_dim} summary columns",
                        slopes.len()
                    )));
                }
                if !intercept.is_finite() || slopes.iter().any(|s| !s.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "logistic policy coefficients must be finite".into(),
                    ));
                }
            }
            InterventionPolicy::Deterministic { value } => {
                if !binary(*value) {
                    return Err(Error::InvalidParameter(format!(
                        "deterministic policy value must be 0 or 1, got {value}"
                    )));
                }
            }
            InterventionPolicy::Threshold {
                feature,
                assign,
                otherwise,
                ..
            } => {
                if *feature >= c_dim {
                    return Err(Error::InvalidParameter(format!(
                        "threshold feature {feature} out of range for {c_dim} summary columns"
                    )));
                }
                if !binary(*assign) || !binary(*otherwise) {
                    return Err(Error::InvalidParameter(
                        "threshold policy values must be 0 or 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `P*(Z*_i = 1 | c_i)`.
    #[inline]
    pub fn prob_treated(&self, c_i: &[f64]) -> f64 {
        match self {
            InterventionPolicy::Stochastic { prob } => *prob,
            InterventionPolicy::Logistic { intercept, slopes } => {
                logistic(intercept + slopes.iter().zip(c_i).map(|(a, c)| a * c).sum::<f64>())
            }
            InterventionPolicy::Deterministic { value } => *value,
            InterventionPolicy::Threshold {
                feature,
                threshold,
                assign,
                otherwise,
            } => {
                if c_i[*feature] >= *threshold {
                    *assign
                } else {
                    *otherwise
                }
            }
        }
    }

    /// Per-node mass `p*(z | c_i)` for binary `z`.
    pub fn density(&self, z: f64, c_i: &[f64]) -> f64 {
        let p = self.prob_treated(c_i);
        if z == 1.0 {
            p
        } else if z == 0.0 {
            1.0 - p
        } else {
            0.0
        }
    }

    /// True when every node has a non-degenerate treatment law.
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            InterventionPolicy::Stochastic { .. } | InterventionPolicy::Logistic { .. }
        )
    }

    /// False when the treatment law ignores the covariate summaries.
    pub fn depends_on_c(&self) -> bool {
        matches!(
            self,
            InterventionPolicy::Logistic { .. } | InterventionPolicy::Threshold { .. }
        )
    }

    /// Fills `z` with independent draws given row-major summaries `c`.
    pub(crate) fn draw_into<R: Rng + ?Sized>(
        &self,
        c: &[f64],
        c_dim: usize,
        rng: &mut R,
        z: &mut [f64],
    ) {
        for (i, zi) in z.iter_mut().enumerate() {
            let p = self.prob_treated(&c[i * c_dim..(i + 1) * c_dim]);
            *zi = if p >= 1.0 {
                1.0
            } else if p <= 0.0 {
                0.0
            } else {
                f64::from(rng.random::<f64>() < p)
            };
        }
    }
}

/// Draws `z*` from the policy given `c`, and returns it with `v* = summarize_z(z*)`.
pub fn sample_intervention<R: Rng + ?Sized>(
    policy: &InterventionPolicy,
    c: &NodeMatrix,
    graph: &AdjacencyGraph,
    summary: SummaryKind,
    rng: &mut R,
) -> Result<(Vec<f64>, NodeMatrix)> {
    policy.validate(c.cols())?;
    if c.rows() != graph.n_nodes() {
        return Err(Error::Dimension(format!(
            "c has {} rows, graph has {} nodes",
            c.rows(),
            graph.n_nodes()
        )));
    }
    let mut z = vec![0.0; c.rows()];
    policy.draw_into(c.as_slice(), c.cols(), rng, &mut z);
    let mut v = NodeMatrix::zeros(z.len(), 2);
    summarize_z_into(&z, graph, summary, v.as_mut_slice());
    Ok((z, v))
}

/// Policy as written in a config file. The threshold form names a quantile
/// of one summary column and is resolved against observed (or pilot) data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Stochastic {
        prob: f64,
    },
    Logistic {
        intercept: f64,
        slopes: Vec<f64>,
    },
    Deterministic {
        value: f64,
    },
    Threshold {
        feature: usize,
        quantile: f64,
        assign: f64,
        #[serde(default)]
        otherwise: f64,
    },
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec::Stochastic { prob: 0.6 }
    }
}

impl PolicySpec {
    pub fn needs_data(&self) -> bool {
        matches!(self, PolicySpec::Threshold { .. })
    }

    pub fn resolve(&self, c: &NodeMatrix) -> Result<InterventionPolicy> {
        let policy = match self {
            PolicySpec::Stochastic { prob } => InterventionPolicy::Stochastic { prob: *prob },
            PolicySpec::Logistic { intercept, slopes } => InterventionPolicy::Logistic {
                intercept: *intercept,
                slopes: slopes.clone(),
            },
            PolicySpec::Deterministic { value } => {
                InterventionPolicy::Deterministic { value: *value }
            }
            PolicySpec::Threshold {
                feature,
                quantile,
                assign,
                otherwise,
            } => {
                if !(0.0..=1.0).contains(quantile) {
                    return Err(Error::InvalidParameter(format!(
                        "threshold quantile must lie in [0, 1], got {quantile}"
                    )));
                }
                if *feature >= c.cols() {
                    return Err(Error::InvalidParameter(format!(
                        "threshold feature {feature} out of range for {} summary columns",
                        c.cols()
                    )));
                }
                InterventionPolicy::Threshold {
                    feature: *feature,
                    threshold: quantile_of(c.column(*feature), *quantile),
                    assign: *assign,
                    otherwise: *otherwise,
                }
            }
        };
        policy.validate(c.cols())?;
        Ok(policy)
    }
}

/// Linear-interpolation sample quantile.
fn quantile_of(mut values: Vec<f64>, q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
}
