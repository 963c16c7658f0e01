use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Undirected simple graph in compressed sparse row form.
///
/// Neighbor lists are sorted, symmetric and free of self-loops; every node
/// has at least one neighbor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl AdjacencyGraph {
    /// Builds a graph from undirected pairs. Each pair may be listed once or
    /// in both orientations; duplicates are merged.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidParameter(
                "graph must have at least one node".into(),
            ));
        }
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_nodes];
        for &(i, j) in edges {
            for index in [i, j] {
                if index >= n_nodes {
                    return Err(Error::NodeOutOfRange { index, n_nodes });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            adj[i].insert(j);
            adj[j].insert(i);
        }
        if let Some(node) = adj.iter().position(BTreeSet::is_empty) {
            return Err(Error::IsolatedNode(node));
        }
        let mut offsets = Vec::with_capacity(n_nodes + 1);
        let mut neighbors = Vec::with_capacity(adj.iter().map(BTreeSet::len).sum());
        offsets.push(0);
        for set in adj {
            neighbors.extend(set);
            offsets.push(neighbors.len());
        }
        Ok(AdjacencyGraph { offsets, neighbors })
    }

    /// Reads a CSV edge list with header `i,j` (zero-based node ids).
    ///
    /// The node count is one more than the largest id seen.
    pub fn read_edge_csv(path: &Path) -> Result<Self> {
        let pairs = read_edge_pairs(path)?;
        let n = pairs.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
        Self::from_edges(n, &pairs)
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n_nodes()).map(|i| self.degree(i)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_nodes())
            .map(|i| self.degree(i))
            .max()
            .unwrap_or(0)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n_nodes())
            .flat_map(|i| {
                self.neighbors(i)
                    .iter()
                    .filter(move |&&j| j > i)
                    .map(move |&j| (i, j))
            })
            .collect()
    }
}

#[derive(Debug, Deserialize)]
struct EdgeRow {
    i: i64,
    j: i64,
}

/// Raw `(i, j)` pairs from an edge CSV, with row context on errors.
pub fn read_edge_pairs(path: &Path) -> Result<Vec<(usize, usize)>> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::data(&display, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::data(&display, e.to_string()))?
        .clone();
    if !(headers.iter().any(|h| h == "i") && headers.iter().any(|h| h == "j")) {
        return Err(Error::data(
            &display,
            "edge list header must contain columns `i,j`",
        ));
    }
    let mut pairs = Vec::new();
    for (row, record) in reader.deserialize::<EdgeRow>().enumerate() {
        let location = format!("{display} row {}", row + 2);
        let rec = record.map_err(|e| Error::data(&location, e.to_string()))?;
        if rec.i < 0 || rec.j < 0 {
            return Err(Error::data(&location, "node ids must be non-negative"));
        }
        pairs.push((rec.i as usize, rec.j as usize));
    }
    Ok(pairs)
}
