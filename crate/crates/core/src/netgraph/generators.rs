//! Random and deterministic network generators.

use std::collections::BTreeSet;

use rand::Rng;

use super::graph::AdjacencyGraph;
use crate::error::{Error, Result};

/// Stochastic block model with `n_blocks` contiguous, near-equal blocks.
///
/// Each within-block pair is linked with probability `p_in`, each
/// between-block pair with `p_out`. A node left isolated is joined to a
/// uniformly chosen member of its own block.
pub fn gen_block<R: Rng + ?Sized>(
    n_nodes: usize,
    n_blocks: usize,
    p_in: f64,
    p_out: f64,
    rng: &mut R,
) -> Result<AdjacencyGraph> {
    if n_nodes < 2 {
        return Err(Error::InvalidParameter(
            "block model needs at least two nodes".into(),
        ));
    }
    if n_blocks == 0 || n_blocks > n_nodes {
        return Err(Error::InvalidParameter(format!(
            "n_blocks = {n_blocks} must lie in [1, n_nodes = {n_nodes}]"
        )));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=p_in).contains(&p_out) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= p_out <= p_in <= 1, got p_in = {p_in}, p_out = {p_out}"
        )));
    }
    let block_of = block_labels(n_nodes, n_blocks);
    let mut edges = Vec::new();
    let mut degree = vec![0usize; n_nodes];
    for i in 0..n_nodes {
        for j in (i + 1)..n_nodes {
            let p = if block_of[i] == block_of[j] {
                p_in
            } else {
                p_out
            };
            if p > 0.0 && rng.random::<f64>() < p {
                edges.push((i, j));
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    for i in 0..n_nodes {
        if degree[i] > 0 {
            continue;
        }
        let members: Vec<usize> = (0..n_nodes)
            .filter(|&j| j != i && block_of[j] == block_of[i])
            .collect();
        let partner = if members.is_empty() {
            // singleton block: fall back to any other node
            let j = rng.random_range(0..n_nodes - 1);
            if j >= i {
                j + 1
            } else {
                j
            }
        } else {
            members[rng.random_range(0..members.len())]
        };
        edges.push((i, partner));
        degree[i] += 1;
        degree[partner] += 1;
    }
    AdjacencyGraph::from_edges(n_nodes, &edges)
}

/// Block label of each node for `n_blocks` contiguous blocks whose sizes
/// differ by at most one.
pub fn block_labels(n_nodes: usize, n_blocks: usize) -> Vec<usize> {
    let base = n_nodes / n_blocks;
    let extra = n_nodes % n_blocks;
    let mut labels = Vec::with_capacity(n_nodes);
    for b in 0..n_blocks {
        let size = base + usize::from(b < extra);
        labels.extend(std::iter::repeat_n(b, size));
    }
    labels
}

/// Barabási–Albert preferential attachment.
///
/// Starts from the complete graph on `m_attach + 1` nodes; each later node
/// links to `m_attach` distinct existing nodes chosen with probability
/// proportional to degree. The edge count is
/// `C(m + 1, 2) + m (N - m - 1)`.
pub fn gen_powerlaw<R: Rng + ?Sized>(
    n_nodes: usize,
    m_attach: usize,
    rng: &mut R,
) -> Result<AdjacencyGraph> {
    if m_attach < 1 || m_attach >= n_nodes {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= m_attach < n_nodes, got m_attach = {m_attach}, n_nodes = {n_nodes}"
        )));
    }
    let seed = m_attach + 1;
    let mut edges = Vec::new();
    // each node appears once per incident edge end
    let mut ends: Vec<usize> = Vec::new();
    for i in 0..seed {
        for j in (i + 1)..seed {
            edges.push((i, j));
            ends.push(i);
            ends.push(j);
        }
    }
    let mut targets = BTreeSet::new();
    for new in seed..n_nodes {
        targets.clear();
        while targets.len() < m_attach {
            targets.insert(ends[rng.random_range(0..ends.len())]);
        }
        for &t in &targets {
            edges.push((new, t));
            ends.push(new);
            ends.push(t);
        }
    }
    AdjacencyGraph::from_edges(n_nodes, &edges)
}

/// Cycle graph on `n >= 3` nodes.
pub fn ring(n: usize) -> Result<AdjacencyGraph> {
    if n < 3 {
        return Err(Error::InvalidParameter(
            "ring needs at least 3 nodes".into(),
        ));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    AdjacencyGraph::from_edges(n, &edges)
}

pub fn complete(n: usize) -> Result<AdjacencyGraph> {
    let edges: Vec<_> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    AdjacencyGraph::from_edges(n, &edges)
}

/// Star with center 0 and leaves `1..n`.
pub fn star(n: usize) -> Result<AdjacencyGraph> {
    let edges: Vec<_> = (1..n).map(|j| (0, j)).collect();
    AdjacencyGraph::from_edges(n, &edges)
}
