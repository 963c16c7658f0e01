use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::AdjacencyGraph;

/// How neighbor values are aggregated into a node summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryKind {
    #[default]
    Mean,
    Sum,
}

impl SummaryKind {
    #[inline]
    pub(crate) fn scale(self, degree: usize) -> f64 {
        match self {
            SummaryKind::Mean => 1.0 / degree as f64,
            SummaryKind::Sum => 1.0,
        }
    }
}

/// Dense row-major table with one row per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMatrix {
    cols: usize,
    data: Vec<f64>,
}

impl NodeMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        NodeMatrix {
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 || !data.len().is_multiple_of(cols) {
            return Err(Error::Dimension(format!(
                "{} values cannot form rows of width {cols}",
                data.len()
            )));
        }
        Ok(NodeMatrix { cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_row_major(cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows())
            .map(|i| self.data[i * self.cols + j])
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// `C_i = (X_i, agg_{j in N_i} X_j)`; output has `2p` columns.
pub fn summarize_x(
    x: &NodeMatrix,
    graph: &AdjacencyGraph,
    kind: SummaryKind,
) -> Result<NodeMatrix> {
    if x.rows() != graph.n_nodes() {
        return Err(Error::Dimension(format!(
            "x has {} rows, graph has {} nodes",
            x.rows(),
            graph.n_nodes()
        )));
    }
    let mut c = NodeMatrix::zeros(x.rows(), 2 * x.cols());
    summarize_x_into(x.as_slice(), x.cols(), None, graph, kind, c.as_mut_slice());
    Ok(c)
}

/// Fills `out` (N x 2p, row-major) with covariate summaries where node `i`
/// carries covariate row `rows[i]` of `x` (or row `i` when `rows` is None).
pub(crate) fn summarize_x_into(
    x: &[f64],
    p: usize,
    rows: Option<&[usize]>,
    graph: &AdjacencyGraph,
    kind: SummaryKind,
    out: &mut [f64],
) {
    let src = |i: usize| rows.map_or(i, |r| r[i]);
    for i in 0..graph.n_nodes() {
        let base = 2 * p * i;
        let own = src(i) * p;
        out[base..base + p].copy_from_slice(&x[own..own + p]);
        let nb = &mut out[base + p..base + 2 * p];
        nb.fill(0.0);
        for &j in graph.neighbors(i) {
            let sj = src(j) * p;
            for (acc, v) in nb.iter_mut().zip(&x[sj..sj + p]) {
                *acc += v;
            }
        }
        let s = kind.scale(graph.degree(i));
        nb.iter_mut().for_each(|v| *v *= s);
    }
}

/// `V_i = (Z_i, agg_{j in N_i} Z_j)`.
pub fn summarize_z(z: &[f64], graph: &AdjacencyGraph, kind: SummaryKind) -> Result<NodeMatrix> {
    if z.len() != graph.n_nodes() {
        return Err(Error::Dimension(format!(
            "z has length {}, graph has {} nodes",
            z.len(),
            graph.n_nodes()
        )));
    }
    let mut v = NodeMatrix::zeros(z.len(), 2);
    summarize_z_into(z, graph, kind, v.as_mut_slice());
    Ok(v)
}

pub(crate) fn summarize_z_into(
    z: &[f64],
    graph: &AdjacencyGraph,
    kind: SummaryKind,
    out: &mut [f64],
) {
    for i in 0..graph.n_nodes() {
        let s: f64 = graph.neighbors(i).iter().map(|&j| z[j]).sum();
        out[2 * i] = z[i];
        out[2 * i + 1] = s * kind.scale(graph.degree(i));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{ring, star};
    use crate::seeds::SeedNode;
    use rand::Rng;

    #[test]
    fn identical_covariates() {
        let g = ring(5).unwrap();
        let x = NodeMatrix::from_row_major(2, [1.5, -2.0].repeat(5)).unwrap();
        let c = summarize_x(&x, &g, SummaryKind::Mean).unwrap();
        for i in 0..5 {
            assert_eq!(c.row(i), &[1.5, -2.0, 1.5, -2.0]);
        }
    }

    #[test]
    fn path_mean() {
        let g = AdjacencyGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let x = NodeMatrix::from_row_major(1, vec![0.0, 3.0, 6.0]).unwrap();
        let c = summarize_x(&x, &g, SummaryKind::Mean).unwrap();
        assert_eq!(c.row(1), &[3.0, 3.0]);
        let c = summarize_x(&x, &g, SummaryKind::Sum).unwrap();
        assert_eq!(c.row(1), &[3.0, 6.0]);
    }

    #[test]
    fn random_x_matches_direct_loop() {
        let g = ring(8).unwrap();
        let mut rng = SeedNode::root(2).rng();
        let data: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let x = NodeMatrix::from_row_major(2, data).unwrap();
        let c = summarize_x(&x, &g, SummaryKind::Mean).unwrap();
        for i in 0..8 {
            let (l, r) = ((i + 7) % 8, (i + 1) % 8);
            for d in 0..2 {
                let expected = 0.5 * (x.get(l, d) + x.get(r, d));
                assert!((c.get(i, 2 + d) - expected).abs() < 1e-15);
                assert_eq!(c.get(i, d), x.get(i, d));
            }
        }
    }

    #[test]
    fn treatment_summaries() {
        let g = star(5).unwrap();
        let v = summarize_z(&[1.0; 5], &g, SummaryKind::Mean).unwrap();
        assert!((0..5).all(|i| v.row(i) == [1.0, 1.0]));

        let v = summarize_z(&[1.0, 0.0, 0.0, 0.0, 0.0], &g, SummaryKind::Mean).unwrap();
        assert_eq!(v.row(0), &[1.0, 0.0]);
        for leaf in 1..5 {
            assert_eq!(v.row(leaf), &[0.0, 1.0]);
        }
    }

    #[test]
    fn random_z_matches_direct_loop() {
        let g = ring(7).unwrap();
        let mut rng = SeedNode::root(4).rng();
        let z: Vec<f64> = (0..7).map(|_| f64::from(rng.random::<bool>())).collect();
        let v = summarize_z(&z, &g, SummaryKind::Mean).unwrap();
        for i in 0..7 {
            let expected = 0.5 * (z[(i + 6) % 7] + z[(i + 1) % 7]);
            assert_eq!(v.row(i), &[z[i], expected]);
        }
    }

    #[test]
    fn dimension_errors() {
        let g = ring(4).unwrap();
        let x = NodeMatrix::zeros(3, 2);
        assert!(matches!(
            summarize_x(&x, &g, SummaryKind::Mean),
            Err(Error::Dimension(_))
        ));
        assert!(summarize_z(&[0.0; 5], &g, SummaryKind::Mean).is_err());
    }
}
