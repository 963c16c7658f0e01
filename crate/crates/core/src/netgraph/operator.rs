use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::graph::AdjacencyGraph;
use crate::error::{Error, Result};
use crate::seeds::SeedNode;

/// Default stationarity margin: every operation requires `|rho| <= 1 - delta`.
pub const DEFAULT_DELTA_RHO: f64 = 0.05;

const SOLVER_TOL: f64 = 1e-12;
/// Largest N for which the log-determinant uses a dense eigendecomposition.
const EXACT_LOGDET_MAX_N: usize = 2000;
const HUTCHINSON_PROBES: usize = 64;

/// Row-normalized adjacency operator `W = D^{-1} A`.
///
/// Shares the sparsity pattern of the graph; `w_ij = 1 / n_i` on edges.
#[derive(Debug, Clone)]
pub struct RowStochasticW {
    graph: Arc<AdjacencyGraph>,
    inv_degree: Vec<f64>,
    delta_rho: f64,
    spectrum: Arc<OnceLock<LogDetTable>>,
}

#[derive(Debug)]
enum LogDetTable {
    /// Eigenvalues of W (real, since W is similar to D^{-1/2} A D^{-1/2}).
    Eigen(Vec<f64>),
    /// Hutchinson estimates of tr(W^k), k = 1..len.
    TraceMoments(Vec<f64>),
}

impl RowStochasticW {
    pub fn new(graph: Arc<AdjacencyGraph>) -> Self {
        let inv_degree = (0..graph.n_nodes())
            .map(|i| 1.0 / graph.degree(i) as f64)
            .collect();
        RowStochasticW {
            graph,
            inv_degree,
            delta_rho: DEFAULT_DELTA_RHO,
            spectrum: Arc::new(OnceLock::new()),
        }
    }

    pub fn with_delta_rho(mut self, delta_rho: f64) -> Result<Self> {
        if !(delta_rho > 0.0 && delta_rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_rho must lie in (0, 1), got {delta_rho}"
            )));
        }
        self.delta_rho = delta_rho;
        Ok(self)
    }

    pub fn graph(&self) -> &AdjacencyGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<AdjacencyGraph> {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.inv_degree.len()
    }

    pub fn delta_rho(&self) -> f64 {
        self.delta_rho
    }

    pub fn rho_bound(&self) -> f64 {
        1.0 - self.delta_rho
    }

    /// Weight `w_ij`; zero off the sparsity pattern.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if self.graph.has_edge(i, j) {
            self.inv_degree[i]
        } else {
            0.0
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let w = self.inv_degree[i];
        self.graph.neighbors(i).iter().map(move |&j| (j, w))
    }

    pub fn check_rho(&self, rho: f64) -> Result<()> {
        if !rho.is_finite() || rho.abs() > self.rho_bound() + 1e-15 {
            return Err(Error::NonStationary {
                rho,
                bound: self.rho_bound(),
            });
        }
        Ok(())
    }

    /// `out = W x`.
    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let s: f64 = self.graph.neighbors(i).iter().map(|&j| x[j]).sum();
            *o = s * self.inv_degree[i];
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.mul_into(x, &mut out);
        out
    }

    /// `out = W^T x`, using the symmetry of A: `(W^T x)_j = sum_{i in N_j} x_i / n_i`.
    pub fn mul_transpose_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self
                .graph
                .neighbors(j)
                .iter()
                .map(|&i| x[i] * self.inv_degree[i])
                .sum();
        }
    }

    pub fn mul_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.mul_transpose_into(x, &mut out);
        out
    }

    fn iteration_cap(rho: f64) -> usize {
        let cap = 10.0 * SOLVER_TOL.ln() / rho.abs().ln();
        (cap.ceil() as usize).max(10)
    }

    /// Solves `(I - rho W) y = r` by the fixed-point iteration `y <- r + rho W y`.
    pub fn solve_sar(&self, rho: f64, r: &[f64]) -> Result<Vec<f64>> {
        self.check_rho(rho)?;
        if r.len() != self.n() {
            return Err(Error::Dimension(format!(
                "rhs has length {}, operator has {} rows",
                r.len(),
                self.n()
            )));
        }
        if rho == 0.0 {
            return Ok(r.to_vec());
        }
        let tol = SOLVER_TOL * (1.0 + inf_norm(r));
        self.fixed_point(rho, r, tol, |x, out| self.mul_into(x, out))
    }

    /// Adjustment direction `omega(rho) = (I - rho W^T)^{-1} 1`.
    pub fn omega(&self, rho: f64) -> Result<Vec<f64>> {
        self.check_rho(rho)?;
        let ones = vec![1.0; self.n()];
        if rho == 0.0 {
            return Ok(ones);
        }
        // ||W^T||_1 = ||W||_inf = 1, so the iteration contracts in the 1-norm.
        self.fixed_point(rho, &ones, SOLVER_TOL, |x, out| {
            self.mul_transpose_into(x, out)
        })
    }

    fn fixed_point<F>(&self, rho: f64, rhs: &[f64], tol: f64, apply: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let cap = Self::iteration_cap(rho);
        let mut current = rhs.to_vec();
        let mut scratch = vec![0.0; rhs.len()];
        let mut residual = f64::INFINITY;
        for _ in 0..cap {
            apply(&current, &mut scratch);
            // scratch <- rhs + rho * op(current); residual of `current` is current - scratch.
            residual = 0.0;
            for ((s, &b), &c) in scratch.iter_mut().zip(rhs).zip(&current) {
                *s = b + rho * *s;
                residual = residual.max((c - *s).abs());
            }
            if residual <= tol {
                return Ok(current);
            }
            std::mem::swap(&mut current, &mut scratch);
        }
        Err(Error::NonConvergence {
            iterations: cap,
            residual,
        })
    }

    /// `ln |I - rho W|`, exact for moderate N and a trace-series estimate beyond.
    pub fn log_det(&self, rho: f64) -> Result<f64> {
        self.check_rho(rho)?;
        let table = self.spectrum.get_or_init(|| self.build_logdet_table());
        Ok(match table {
            LogDetTable::Eigen(eigs) => eigs.iter().map(|&l| (1.0 - rho * l).ln()).sum(),
            LogDetTable::TraceMoments(traces) => {
                let mut power = 1.0;
                let mut acc = 0.0;
                for (k, &t) in traces.iter().enumerate() {
                    power *= rho;
                    acc -= power * t / (k + 1) as f64;
                }
                acc
            }
        })
    }

    fn build_logdet_table(&self) -> LogDetTable {
        let n = self.n();
        if n <= EXACT_LOGDET_MAX_N {
            let mut s = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for &j in self.graph.neighbors(i) {
                    s[(i, j)] = (self.inv_degree[i] * self.inv_degree[j]).sqrt();
                }
            }
            let eig = SymmetricEigen::new(s);
            return LogDetTable::Eigen(eig.eigenvalues.iter().copied().collect());
        }
        // |rho|^K / K below 1e-10 at the stationarity bound.
        let bound = self.rho_bound();
        let mut terms = 1;
        while bound.powi(terms as i32) / terms as f64 > 1e-10 {
            terms += 1;
        }
        let mut rng = SeedNode::root(0x4c4f_4744).rng();
        let mut traces = vec![0.0; terms];
        let mut buf = vec![0.0; n];
        for _ in 0..HUTCHINSON_PROBES {
            let probe: Vec<f64> = (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let mut v = probe.clone();
            for t in traces.iter_mut() {
                self.mul_into(&v, &mut buf);
                std::mem::swap(&mut v, &mut buf);
                *t += dot(&probe, &v) / HUTCHINSON_PROBES as f64;
            }
        }
        LogDetTable::TraceMoments(traces)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for (j, w) in self.row(i) {
                m[(i, j)] = w;
            }
        }
        m
    }
}

pub(crate) fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::generators::ring;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn path3() -> RowStochasticW {
        RowStochasticW::new(Arc::new(
            AdjacencyGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap(),
        ))
    }

    #[test]
    fn path_row_normalization() {
        let w = path3();
        assert_eq!(w.weight(1, 0), 0.5);
        assert_eq!(w.weight(1, 1), 0.0);
        assert_eq!(w.weight(1, 2), 0.5);
        assert_eq!(w.weight(0, 1), 1.0);
    }

    #[test]
    fn complete_and_star_rows() {
        let k3 = RowStochasticW::new(Arc::new(
            AdjacencyGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap(),
        ));
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 0.5 };
                assert_eq!(k3.weight(i, j), expected);
            }
        }
        let star = RowStochasticW::new(Arc::new(
            AdjacencyGraph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap(),
        ));
        assert!(star.row(0).all(|(_, w)| w == 0.25));
        for leaf in 1..5 {
            let row: Vec<_> = star.row(leaf).collect();
            assert_eq!(row, vec![(0, 1.0)]);
        }
    }

    #[test]
    fn omega_identity_at_zero() {
        let w = path3();
        assert_eq!(w.omega(0.0).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn omega_sum_identity() {
        let w = RowStochasticW::new(Arc::new(ring(9).unwrap()));
        let om = w.omega(0.5).unwrap();
        assert!(close(om.iter().sum::<f64>(), 18.0, 1e-9));
    }

    #[test]
    fn sar_eigenvector_case() {
        let w = path3();
        let y = w.solve_sar(0.6, &[1.0; 3]).unwrap();
        for v in y {
            assert!(close(v, 2.5, 1e-10));
        }
        assert_eq!(
            w.solve_sar(0.0, &[1.0, 2.0, 3.0]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn rejects_nonstationary_rho() {
        let w = path3();
        assert!(matches!(w.omega(0.97), Err(Error::NonStationary { .. })));
        assert!(matches!(
            w.solve_sar(-0.99, &[0.0; 3]),
            Err(Error::NonStationary { .. })
        ));
        let loose = path3().with_delta_rho(0.01).unwrap();
        assert!(loose.omega(0.97).is_ok());
    }

    #[test]
    fn log_det_matches_dense_determinant() {
        let w = RowStochasticW::new(Arc::new(ring(7).unwrap()));
        let dense = w.to_dense();
        for rho in [-0.7, 0.0, 0.3, 0.9] {
            let m = DMatrix::<f64>::identity(7, 7) - dense.clone() * rho;
            let expected = m.determinant().ln();
            assert!(close(w.log_det(rho).unwrap(), expected, 1e-10));
        }
    }
}
