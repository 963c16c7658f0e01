use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::{design_matrix, BasisSpec, LinearBasisModel};
use super::ridge::{penalized_cholesky, Standardizer};
use crate::error::{Error, Result};
use crate::netgraph::dot;
use crate::semgen::Dataset;

const GOLDEN_TOL: f64 = 1e-6;
const COARSE_GRID: usize = 201;
const FLAT_TOL: f64 = 1e-12;

/// Objective minimized over `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileCriterion {
    /// Gaussian quasi-likelihood `(N/2) ln(RSS/N) - ln|I - rho W|`.
    ///
    /// The Jacobian term removes the upward bias that plain least squares
    /// has when `Wy` is correlated with the noise.
    #[default]
    QuasiLikelihood,
    /// Penalized residual sum of squares alone.
    LeastSquares,
}

/// Default ridge penalty `1e-3 * N`.
pub fn default_lambda(n: usize) -> f64 {
    1e-3 * n as f64
}

/// Initial fit `(rho_hat0, g_hat0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialEstimate {
    pub rho_hat0: f64,
    pub model: LinearBasisModel,
    pub lambda: f64,
    pub criterion: ProfileCriterion,
    /// Penalized RSS at `rho_hat0`.
    pub rss: f64,
    /// Set when the profile was flat and the interval midpoint was returned.
    pub flat_profile: bool,
}

impl InitialEstimate {
    #[inline]
    pub fn evaluate(&self, v_i: &[f64], c_i: &[f64]) -> f64 {
        self.model.evaluate(v_i, c_i)
    }
}

/// `RSS(rho) = a - 2 b rho + c rho^2`: the ridge solution is linear in rho
/// because the target `(I - rho W) y` is.
struct QuadraticProfile {
    a: f64,
    b: f64,
    c: f64,
    beta_y: DVector<f64>,
    beta_u: DVector<f64>,
    standardizer: Standardizer,
}

impl QuadraticProfile {
    fn new(phi: &DMatrix<f64>, y: &[f64], u: &[f64], lambda: f64) -> Result<Self> {
        let standardizer = Standardizer::fit(phi);
        let phi_s = standardizer.apply(phi);
        let mut gram = phi_s.tr_mul(&phi_s);
        let chol = penalized_cholesky(&mut gram, lambda)?;
        let py = phi_s.tr_mul(&DVector::from_column_slice(y));
        let pu = phi_s.tr_mul(&DVector::from_column_slice(u));
        let beta_y = chol.solve(&py);
        let beta_u = chol.solve(&pu);
        Ok(QuadraticProfile {
            a: dot(y, y) - py.dot(&beta_y),
            b: dot(y, u) - 0.5 * (py.dot(&beta_u) + pu.dot(&beta_y)),
            c: dot(u, u) - pu.dot(&beta_u),
            beta_y,
            beta_u,
            standardizer,
        })
    }

    fn rss(&self, rho: f64) -> f64 {
        (self.a - 2.0 * self.b * rho + self.c * rho * rho).max(0.0)
    }

    fn coefficients(&self, rho: f64) -> Vec<f64> {
        let beta = &self.beta_y - rho * &self.beta_u;
        self.standardizer.unscale(beta.as_slice())
    }
}

/// Profile estimator: for each `rho`, ridge-regress `(I - rho W) y` on
/// `phi(V, C)`; choose `rho` by a coarse grid followed by golden-section
/// refinement inside the bracketing cell.
pub fn profile_rho(
    dataset: &Dataset,
    basis: &BasisSpec,
    lambda: f64,
    criterion: ProfileCriterion,
    interval: Option<(f64, f64)>,
) -> Result<InitialEstimate> {
    let w = &dataset.network().w;
    let bound = w.rho_bound();
    let (lo, hi) = interval.unwrap_or((-bound, bound));
    if !(lo < hi && lo >= -bound && hi <= bound) {
        return Err(Error::InvalidParameter(format!(
            "search interval [{lo}, {hi}] must be non-empty and within [-{bound}, {bound}]"
        )));
    }
    let phi = design_matrix(dataset, basis)?;
    let n = dataset.n();
    if n <= phi.ncols() {
        return Err(Error::InvalidParameter(format!(
            "profile fit needs N > q (N = {n}, q = {})",
            phi.ncols()
        )));
    }
    let y = dataset.y();
    let u = w.mul(y);
    let profile = QuadraticProfile::new(&phi, y, &u, lambda)?;

    let half_n = 0.5 * n as f64;
    let objective = |rho: f64| -> Result<f64> {
        let rss = profile.rss(rho);
        Ok(match criterion {
            ProfileCriterion::LeastSquares => rss,
            ProfileCriterion::QuasiLikelihood => {
                half_n * (rss.max(f64::MIN_POSITIVE) / n as f64).ln() - w.log_det(rho)?
            }
        })
    };

    let grid: Vec<f64> = (0..COARSE_GRID)
        .map(|k| lo + (hi - lo) * k as f64 / (COARSE_GRID - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&r| objective(r)).collect::<Result<_>>()?;
    let rss_range = grid
        .iter()
        .map(|&r| profile.rss(r))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });

    let (rho_hat0, flat) = if rss_range.1 - rss_range.0 < FLAT_TOL {
        warn!("profile RSS is flat over [{lo}, {hi}]; returning the midpoint");
        (0.5 * (lo + hi), true)
    } else {
        let k = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let a = grid[k.saturating_sub(1)];
        let b = grid[(k + 1).min(COARSE_GRID - 1)];
        let (refined, value) = golden_section(&objective, a, b, GOLDEN_TOL)?;
        (if value <= values[k] { refined } else { grid[k] }, false)
    };

    let model = LinearBasisModel::new(*basis, profile.coefficients(rho_hat0), dataset.p())?;
    Ok(InitialEstimate {
        rho_hat0,
        model,
        lambda,
        criterion,
        rss: profile.rss(rho_hat0),
        flat_profile: flat,
    })
}

/// Ridge fit of `(I - rho W) y` at a fixed `rho`.
pub fn fit_at_rho(
    dataset: &Dataset,
    basis: &BasisSpec,
    lambda: f64,
    rho: f64,
) -> Result<InitialEstimate> {
    let w = &dataset.network().w;
    w.check_rho(rho)?;
    let phi = design_matrix(dataset, basis)?;
    let y = dataset.y();
    let u = w.mul(y);
    let profile = QuadraticProfile::new(&phi, y, &u, lambda)?;
    Ok(InitialEstimate {
        rho_hat0: rho,
        model: LinearBasisModel::new(*basis, profile.coefficients(rho), dataset.p())?,
        lambda,
        criterion: ProfileCriterion::LeastSquares,
        rss: profile.rss(rho),
        flat_profile: false,
    })
}

/// Golden-section minimization on `[a, b]`; returns `(argmin, min)`.
pub(crate) fn golden_section<F>(f: &F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{gen_block, Network};
    use crate::seeds::SeedNode;
    use crate::semgen::{gen_dataset, OutcomeCoefficients, SimConfig};

    fn simulated(n: usize, rho0: f64, noise_sd: f64, seed: u64) -> Dataset {
        let mut rng = SeedNode::root(seed).rng();
        let graph = gen_block(n, (n / 20).max(1), 0.3, 0.3 / n as f64, &mut rng).unwrap();
        let net = Network::new(graph);
        let mut config = SimConfig::with_nodes(n);
        config.rho0 = rho0;
        config.noise_sd = noise_sd;
        gen_dataset(&config, &net, &mut rng).unwrap()
    }

    #[test]
    fn noiseless_identification() {
        let d = simulated(200, 0.4, 0.0, 1);
        for criterion in [
            ProfileCriterion::LeastSquares,
            ProfileCriterion::QuasiLikelihood,
        ] {
            let fit = profile_rho(&d, &BasisSpec::correct(), 0.0, criterion, None).unwrap();
            assert!(
                (fit.rho_hat0 - 0.4).abs() < 1e-4,
                "{criterion:?}: {}",
                fit.rho_hat0
            );
            let truth = OutcomeCoefficients::default().basis_coefficients();
            for (a, e) in fit.model.coefficients.iter().zip(&truth) {
                assert!((a - e).abs() < 1e-3, "{a} vs {e}");
            }
        }
    }

    #[test]
    fn grid_brackets_optimum_and_audit_grid_is_not_better() {
        let d = simulated(300, 0.3, 1.0, 2);
        let lambda = default_lambda(300);
        let fit = profile_rho(
            &d,
            &BasisSpec::correct(),
            lambda,
            ProfileCriterion::LeastSquares,
            None,
        )
        .unwrap();
        let w = &d.network().w;
        let phi = design_matrix(&d, &BasisSpec::correct()).unwrap();
        let u = w.mul(d.y());
        let profile = QuadraticProfile::new(&phi, d.y(), &u, lambda).unwrap();
        let b = w.rho_bound();

        let grid: Vec<f64> = (0..200).map(|k| -b + 2.0 * b * k as f64 / 199.0).collect();
        let k = grid
            .iter()
            .enumerate()
            .min_by(|x, y| profile.rss(*x.1).total_cmp(&profile.rss(*y.1)))
            .unwrap()
            .0;
        assert!(
            grid[k.saturating_sub(1)] <= fit.rho_hat0 && fit.rho_hat0 <= grid[(k + 1).min(199)]
        );
        for k in 0..100 {
            let r = -b + 2.0 * b * k as f64 / 99.0;
            assert!(fit.rss <= profile.rss(r) + 1e-9);
        }
    }

    #[test]
    fn rss_matches_direct_ridge_objective() {
        let d = simulated(120, 0.2, 1.0, 3);
        let lambda = 0.5;
        let fit = fit_at_rho(&d, &BasisSpec::misspecified(), lambda, 0.35).unwrap();
        let phi = design_matrix(&d, &BasisSpec::misspecified()).unwrap();
        let wy = d.network().w.mul(d.y());
        let r: Vec<f64> = d.y().iter().zip(&wy).map(|(y, u)| y - 0.35 * u).collect();
        let s = Standardizer::fit(&phi);
        let direct = super::super::ridge::ridge_fit(&s.apply(&phi), &r, lambda).unwrap();
        let fitted = s.apply(&phi) * DVector::from_column_slice(&direct);
        let rss: f64 = fitted
            .iter()
            .zip(&r)
            .map(|(f, t)| (t - f).powi(2))
            .sum::<f64>()
            + lambda * direct[1..].iter().map(|v| v * v).sum::<f64>();
        assert!((fit.rss - rss).abs() < 1e-8 * rss);
        for (a, e) in fit.model.coefficients.iter().zip(s.unscale(&direct)) {
            assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn null_peer_effect_stays_small() {
        let n = 1600;
        let graph = gen_block(
            n,
            n / 20,
            0.3,
            0.3 / n as f64,
            &mut SeedNode::root(99).rng(),
        )
        .unwrap();
        let net = Network::new(graph);
        let mut config = SimConfig::with_nodes(n);
        config.rho0 = 0.0;
        let mut small = 0;
        for seed in 0..20 {
            let d = gen_dataset(&config, &net, &mut SeedNode::root(100 + seed).rng()).unwrap();
            let fit = profile_rho(
                &d,
                &BasisSpec::correct(),
                default_lambda(1600),
                ProfileCriterion::default(),
                None,
            )
            .unwrap();
            if fit.rho_hat0.abs() <= 0.1 {
                small += 1;
            }
        }
        assert!(small >= 19, "{small}/20");
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) =
            golden_section(&|t: f64| Ok((t - 0.3).powi(2) + 1.0), -1.0, 1.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-6 && (fx - 1.0).abs() < 1e-12);
    }
}
