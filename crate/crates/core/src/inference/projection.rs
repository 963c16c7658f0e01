//! Hájek-projection view of the covariate-driven term.
//!
//! With `f_i(x) = E_{Z*}[g(V*_i, C_i) | x]`, the statistic
//! `G(x) = N^{-1} sum_i omega_i f_i(x)` depends on the covariates of node
//! `i`'s two-hop closure only. Its projection onto the empirical measure is
//! `H(x) = N^{-1} sum_l h(x_l)`, `h(u) = sum_k E[G(x) | x_k = u]`, and the
//! covariate part of the variance is `N^{-2} sum_l (h(x_l) - hbar)^2`.
//! Every model here is affine in `V`, so `f_i` is `g` evaluated at the
//! expected summaries `(pi_i, agg_{j in N_i} pi_j)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::initfit::{BasisSpec, LinearBasisModel};
use crate::netgraph::{AdjacencyGraph, Network};
use crate::seeds::SeedNode;
use crate::semgen::{Dataset, InterventionPolicy, SimConfig, SummaryKind};
use crate::tmle::TargetedModel;

/// Largest network accepted by the projection oracle.
pub const PROJECTION_MAX_N: usize = 100;
const HG_MAX_N: usize = 60;

struct Projection<'a> {
    graph: &'a AdjacencyGraph,
    summary: SummaryKind,
    p: usize,
    omega: &'a [f64],
    g: &'a LinearBasisModel,
    policy: &'a InterventionPolicy,
    /// `affected[k]`: nodes whose `f_i` depends on `x_k`.
    affected: Vec<Vec<usize>>,
}

struct Buffers {
    ci: Vec<f64>,
    cj: Vec<f64>,
}

impl<'a> Projection<'a> {
    fn new(
        network: &'a Network,
        summary: SummaryKind,
        p: usize,
        omega: &'a [f64],
        g: &'a LinearBasisModel,
        policy: &'a InterventionPolicy,
    ) -> Result<Self> {
        policy.validate(2 * p)?;
        g.basis.check(p)?;
        let graph = network.graph();
        // Covariate-dependent policies reach two hops; otherwise only the
        // closed neighborhood enters C_i. Both relations are symmetric.
        let affected = (0..graph.n_nodes())
            .map(|k| {
                if policy.depends_on_c() {
                    network.neighborhoods.two_hop(k).to_vec()
                } else {
                    network.neighborhoods.closed(k).to_vec()
                }
            })
            .collect();
        Ok(Projection {
            graph,
            summary,
            p,
            omega,
            g,
            policy,
            affected,
        })
    }

    fn buffers(&self) -> Buffers {
        Buffers {
            ci: vec![0.0; 2 * self.p],
            cj: vec![0.0; 2 * self.p],
        }
    }

    fn c_row(&self, j: usize, x: &[f64], out: &mut [f64]) {
        let p = self.p;
        out[..p].copy_from_slice(&x[j * p..(j + 1) * p]);
        let nb = &mut out[p..];
        nb.fill(0.0);
        for &k in self.graph.neighbors(j) {
            for (acc, v) in nb.iter_mut().zip(&x[k * p..(k + 1) * p]) {
                *acc += v;
            }
        }
        let s = self.summary_scale(j);
        nb.iter_mut().for_each(|v| *v *= s);
    }

    fn summary_scale(&self, j: usize) -> f64 {
        match self.summary {
            SummaryKind::Mean => 1.0 / self.graph.degree(j) as f64,
            SummaryKind::Sum => 1.0,
        }
    }

    /// `f_i(x)` for a full row-major covariate array.
    fn f(&self, i: usize, x: &[f64], b: &mut Buffers) -> f64 {
        self.c_row(i, x, &mut b.ci);
        let pi_i = self.policy.prob_treated(&b.ci);
        let agg = if self.policy.depends_on_c() {
            let mut s = 0.0;
            for &j in self.graph.neighbors(i) {
                self.c_row(j, x, &mut b.cj);
                s += self.policy.prob_treated(&b.cj);
            }
            s * self.summary_scale(i)
        } else {
            pi_i * self.graph.degree(i) as f64 * self.summary_scale(i)
        };
        self.g.evaluate(&[pi_i, agg], &b.ci)
    }

    /// `G(x)` without the `t * omega` offset.
    fn g_stat(&self, x: &[f64], b: &mut Buffers) -> f64 {
        let n = self.omega.len();
        (0..n).map(|i| self.omega[i] * self.f(i, x, b)).sum::<f64>() / n as f64
    }

    /// Cached summaries of one background draw.
    fn background(&self, x: Vec<f64>) -> Background {
        let n = self.omega.len();
        let pc = 2 * self.p;
        let mut c = vec![0.0; n * pc];
        for j in 0..n {
            self.c_row(j, &x, &mut c[j * pc..(j + 1) * pc]);
        }
        let pi: Vec<f64> = (0..n)
            .map(|j| self.policy.prob_treated(&c[j * pc..(j + 1) * pc]))
            .collect();
        let agg = (0..n)
            .map(|i| {
                self.graph.neighbors(i).iter().map(|&j| pi[j]).sum::<f64>() * self.summary_scale(i)
            })
            .collect();
        Background { x, c, pi, agg }
    }

    fn local(&self) -> Local {
        let n = self.omega.len();
        Local {
            c: vec![0.0; n * 2 * self.p],
            pi: vec![0.0; n],
            d_agg: vec![0.0; n],
            touched: Vec::new(),
        }
    }

    /// `sum_{i affected by k} omega_i f_i(bg[k <- u])`, updating only the
    /// summaries that change when row `k` is replaced.
    fn swapped_sum(&self, bg: &Background, k: usize, u: &[f64], l: &mut Local) -> f64 {
        let (p, pc) = (self.p, 2 * self.p);
        let xk = &bg.x[k * p..(k + 1) * p];
        let closed = |j: usize| std::iter::once(j).chain(self.graph.neighbors(j).iter().copied());
        for j in closed(k) {
            let row = &mut l.c[j * pc..(j + 1) * pc];
            row.copy_from_slice(&bg.c[j * pc..(j + 1) * pc]);
            if j == k {
                row[..p].copy_from_slice(&u[..p]);
            } else {
                let s = self.summary_scale(j);
                for d in 0..p {
                    row[p + d] += s * (u[d] - xk[d]);
                }
            }
        }
        let depends = self.policy.depends_on_c();
        if depends {
            for j in closed(k) {
                let new_pi = self.policy.prob_treated(&l.c[j * pc..(j + 1) * pc]);
                l.pi[j] = new_pi;
                let delta = new_pi - bg.pi[j];
                for &i in self.graph.neighbors(j) {
                    if l.d_agg[i] == 0.0 {
                        l.touched.push(i);
                    }
                    l.d_agg[i] += self.summary_scale(i) * delta;
                }
            }
        }
        let in_closed = |i: usize| i == k || self.graph.has_edge(i, k);
        let mut acc = 0.0;
        for &i in &self.affected[k] {
            let changed_c = !depends || in_closed(i);
            let c_i = if changed_c {
                &l.c[i * pc..(i + 1) * pc]
            } else {
                &bg.c[i * pc..(i + 1) * pc]
            };
            let pi_i = if depends && changed_c {
                l.pi[i]
            } else {
                bg.pi[i]
            };
            let agg = bg.agg[i] + if depends { l.d_agg[i] } else { 0.0 };
            acc += self.omega[i] * self.g.evaluate(&[pi_i, agg], c_i);
        }
        for &i in &l.touched {
            l.d_agg[i] = 0.0;
        }
        l.touched.clear();
        acc
    }

    /// `h(u)` up to an additive constant, averaged over `backgrounds`.
    /// Terms of nodes that do not see `x_k` are constant in `u` and skipped.
    fn h(&self, u: &[f64], backgrounds: &[Background], l: &mut Local) -> f64 {
        let n = self.omega.len();
        let mut acc = 0.0;
        for bg in backgrounds {
            for k in 0..n {
                acc += self.swapped_sum(bg, k, u, l);
            }
        }
        acc / (n as f64 * backgrounds.len() as f64)
    }

    fn h_many(&self, points: &[&[f64]], backgrounds: &[Background]) -> Vec<f64> {
        points
            .par_iter()
            .map_init(|| self.local(), |l, u| self.h(u, backgrounds, l))
            .collect()
    }
}

struct Background {
    x: Vec<f64>,
    c: Vec<f64>,
    pi: Vec<f64>,
    agg: Vec<f64>,
}

/// Per-thread scratch for swapped summaries.
struct Local {
    c: Vec<f64>,
    pi: Vec<f64>,
    d_agg: Vec<f64>,
    touched: Vec<usize>,
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Projection estimate of the covariate part of the variance, with the
/// fitted `(omega, g_t)` and backgrounds drawn from the observed rows.
/// Test-scale only: cost grows with `N * n_mc * sum_i |D_i|`.
pub fn sigma_x_projection_oracle(
    model: &TargetedModel,
    dataset: &Dataset,
    policy: &InterventionPolicy,
    n_mc: usize,
    seed: SeedNode,
) -> Result<f64> {
    let n = dataset.n();
    if n > PROJECTION_MAX_N {
        return Err(Error::InvalidParameter(format!(
            "projection oracle supports N <= {PROJECTION_MAX_N} (got {n}); use sigma_x_bootstrap"
        )));
    }
    if n_mc < 1000 {
        return Err(Error::InvalidParameter(format!(
            "projection oracle needs n_mc >= 1000, got {n_mc}"
        )));
    }
    if model.g0.is_constant() {
        return Ok(0.0);
    }
    let p = dataset.p();
    let proj = Projection::new(
        dataset.network(),
        dataset.summary(),
        p,
        &model.omega,
        &model.g0,
        policy,
    )?;
    let x = dataset.x().as_slice();
    let mut rng = seed.rng();
    let backgrounds: Vec<Background> = (0..n_mc)
        .map(|_| {
            let draw = (0..n)
                .flat_map(|_| {
                    let r = rng.random_range(0..n);
                    x[r * p..(r + 1) * p].to_vec()
                })
                .collect();
            proj.background(draw)
        })
        .collect();
    let points: Vec<&[f64]> = (0..n).map(|l| dataset.x().row(l)).collect();
    let h = proj.h_many(&points, &backgrounds);
    Ok(variance(&h) / n as f64)
}

/// Empirical variances of `H(x)` and `G(x)` under iid standard-normal
/// covariates with the true `(rho0, g0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyCheck {
    pub var_h: f64,
    pub var_g: f64,
}

/// Number of common background draws used for `h` in the efficiency oracle.
pub const HG_BACKGROUNDS: usize = 32;

/// Monte Carlo comparison of `var H` and `var G` over `n_reps` covariate draws.
pub fn hg_efficiency_oracle(
    config: &SimConfig,
    network: &Network,
    policy: &InterventionPolicy,
    n_reps: usize,
    seed: SeedNode,
) -> Result<EfficiencyCheck> {
    config.validate()?;
    let n = network.n();
    if n > HG_MAX_N || n != config.n_nodes {
        return Err(Error::InvalidParameter(format!(
            "efficiency oracle needs N <= {HG_MAX_N} matching the config (network {n}, config {})",
            config.n_nodes
        )));
    }
    if n_reps < 500 {
        return Err(Error::InvalidParameter(format!(
            "efficiency oracle needs n_reps >= 500, got {n_reps}"
        )));
    }
    let p = config.x_dim;
    let omega = network.w.omega(config.rho0)?;
    let g = LinearBasisModel::new(
        BasisSpec::correct(),
        config.coefficients.basis_coefficients(),
        p,
    )?;
    if config.coefficients.is_constant() {
        return Ok(EfficiencyCheck {
            var_h: 0.0,
            var_g: 0.0,
        });
    }
    let proj = Projection::new(network, config.summary, p, &omega, &g, policy)?;

    let normal_block = |s: SeedNode| -> Vec<f64> {
        let mut rng = s.rng();
        (0..n * p).map(|_| rng.sample(StandardNormal)).collect()
    };
    let backgrounds: Vec<Background> = (0..HG_BACKGROUNDS as u64)
        .map(|s| proj.background(normal_block(seed.path(&[0, s]))))
        .collect();

    let draws: Vec<Vec<f64>> = (0..n_reps as u64)
        .map(|r| normal_block(seed.path(&[1, r])))
        .collect();
    let g_values: Vec<f64> = draws
        .par_iter()
        .map_init(|| proj.buffers(), |b, x| proj.g_stat(x, b))
        .collect();
    let points: Vec<&[f64]> = draws.iter().flat_map(|x| x.chunks(p)).collect();
    let h_points = proj.h_many(&points, &backgrounds);
    let h_values: Vec<f64> = h_points
        .chunks(n)
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect();
    Ok(EfficiencyCheck {
        var_h: variance(&h_values),
        var_g: variance(&g_values),
    })
}
