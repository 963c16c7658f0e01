use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semgen::NodeMatrix;

/// Lower bound applied to estimated conditional densities.
pub const DENSITY_FLOOR: f64 = 1e-12;
const MIN_SAMPLES: usize = 20;

/// Gaussian product-kernel settings for the weighting competitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KdeConfig {
    /// Scalar multiplier on the Silverman bandwidths. The per-dimension rule
    /// undersmooths the joint `(v, c)` density, and `1/p` turns that noise
    /// into upward weight bias; 3 keeps mean weights near 1 at N = 400.
    pub bandwidth_multiplier: f64,
    /// Density-ratio clip bound: weights are kept in `[1/clip, clip]`.
    pub clip: f64,
    /// Interventional `(v*, c)` pairs used for `p*`; default `10 N`.
    pub n_star_draws: Option<usize>,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig {
            bandwidth_multiplier: 3.0,
            clip: 20.0,
            n_star_draws: None,
        }
    }
}

impl KdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_multiplier > 0.0 && self.bandwidth_multiplier.is_finite()) {
            return Err(Error::InvalidParameter(
                "bandwidth_multiplier must be positive".into(),
            ));
        }
        if self.clip.is_nan() || self.clip < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "clip must be >= 1, got {}",
                self.clip
            )));
        }
        Ok(())
    }
}

/// `1.06 * sd * n^{-1/5}` per column; a constant column falls back to unit scale.
pub fn silverman_bandwidths(samples: &NodeMatrix, multiplier: f64) -> Vec<f64> {
    let n = samples.rows() as f64;
    (0..samples.cols())
        .map(|j| {
            let col = samples.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let sd =
                (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
            let scale = if sd > 0.0 { sd } else { 1.0 };
            multiplier * 1.06 * scale * n.powf(-0.2)
        })
        .collect()
}

/// Conditional density estimate `p(v | c) = f(v, c) / f(c)` from paired samples.
#[derive(Debug, Clone)]
pub struct ConditionalKde {
    v: NodeMatrix,
    c: NodeMatrix,
    hv: Vec<f64>,
    hc: Vec<f64>,
    /// `-sum_d ln(h_d sqrt(2 pi))` over the v dimensions.
    log_norm_v: f64,
}

impl ConditionalKde {
    pub fn fit(v: NodeMatrix, c: NodeMatrix, config: &KdeConfig) -> Result<Self> {
        config.validate()?;
        if v.rows() != c.rows() {
            return Err(Error::Dimension(
                "density samples: v and c row counts differ".into(),
            ));
        }
        if v.rows() < MIN_SAMPLES {
            return Err(Error::InvalidParameter(format!(
                "kernel density needs at least {MIN_SAMPLES} samples, got {}",
                v.rows()
            )));
        }
        let hv = silverman_bandwidths(&v, config.bandwidth_multiplier);
        let hc = silverman_bandwidths(&c, config.bandwidth_multiplier);
        Self::with_bandwidths(v, c, hv, hc)
    }

    /// Fit with given bandwidths, e.g. to share smoothing between the two
    /// densities of a ratio.
    pub fn with_bandwidths(
        v: NodeMatrix,
        c: NodeMatrix,
        hv: Vec<f64>,
        hc: Vec<f64>,
    ) -> Result<Self> {
        if v.rows() != c.rows() || hv.len() != v.cols() || hc.len() != c.cols() {
            return Err(Error::Dimension(
                "density samples and bandwidths disagree".into(),
            ));
        }
        if v.rows() < MIN_SAMPLES {
            return Err(Error::InvalidParameter(format!(
                "kernel density needs at least {MIN_SAMPLES} samples, got {}",
                v.rows()
            )));
        }
        if hv.iter().chain(&hc).any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidParameter(
                "bandwidths must be positive".into(),
            ));
        }
        let log_norm_v = -hv
            .iter()
            .map(|h| (h * (2.0 * std::f64::consts::PI).sqrt()).ln())
            .sum::<f64>();
        Ok(ConditionalKde {
            v,
            c,
            hv,
            hc,
            log_norm_v,
        })
    }

    pub fn bandwidths(&self) -> (&[f64], &[f64]) {
        (&self.hv, &self.hc)
    }

    /// Unfloored estimate; sums are accumulated in log space so far-away
    /// conditioning values do not underflow the ratio.
    pub fn raw_density(&self, v: &[f64], c: &[f64]) -> Result<f64> {
        self.raw_density_skipping(v, c, |_| false)
    }

    /// Estimate at a sample's own point without the rows `k` with
    /// `k % period == node` (its own draws), floored.
    pub fn density_leave_out(
        &self,
        v: &[f64],
        c: &[f64],
        node: usize,
        period: usize,
    ) -> Result<f64> {
        Ok(self
            .raw_density_skipping(v, c, |k| k % period == node)?
            .max(DENSITY_FLOOR))
    }

    fn raw_density_skipping(
        &self,
        v: &[f64],
        c: &[f64],
        skip: impl Fn(usize) -> bool,
    ) -> Result<f64> {
        if v.len() != self.v.cols() || c.len() != self.c.cols() {
            return Err(Error::Dimension(
                "density query has the wrong dimension".into(),
            ));
        }
        let quad = |x: &[f64], s: &[f64], h: &[f64]| -> f64 {
            x.iter()
                .zip(s)
                .zip(h)
                .map(|((a, b), h)| ((a - b) / h).powi(2))
                .sum::<f64>()
                * -0.5
        };
        let n = self.v.rows();
        let mut log_c = Vec::with_capacity(n);
        let mut log_joint = Vec::with_capacity(n);
        for k in (0..n).filter(|&k| !skip(k)) {
            let lc = quad(c, self.c.row(k), &self.hc);
            log_c.push(lc);
            log_joint.push(lc + quad(v, self.v.row(k), &self.hv));
        }
        let marginal = log_sum_exp(&log_c);
        if !marginal.is_finite() {
            return Err(Error::ZeroDensity(format!(
                "marginal kernel density vanishes at c = {c:?}"
            )));
        }
        Ok((log_sum_exp(&log_joint) - marginal + self.log_norm_v).exp())
    }

    /// Floored estimate `max(p(v | c), 1e-12)`.
    pub fn density(&self, v: &[f64], c: &[f64]) -> Result<f64> {
        Ok(self.raw_density(v, c)?.max(DENSITY_FLOOR))
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// One-shot conditional density estimate at a single query point.
pub fn conditional_density_kde(
    v_samples: &NodeMatrix,
    c_samples: &NodeMatrix,
    v: &[f64],
    c: &[f64],
    config: &KdeConfig,
) -> Result<f64> {
    ConditionalKde::fit(v_samples.clone(), c_samples.clone(), config)?.density(v, c)
}
