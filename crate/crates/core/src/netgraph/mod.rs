//! Network representation, generators, and the sparse SAR kernel.

mod generators;
mod graph;
mod neighborhoods;
mod operator;

pub use generators::{block_labels, complete, gen_block, gen_powerlaw, ring, star};
pub use graph::{read_edge_pairs, AdjacencyGraph};
pub use neighborhoods::NeighborhoodIndex;
pub use operator::{RowStochasticW, DEFAULT_DELTA_RHO};

pub(crate) use operator::dot;

use std::sync::Arc;

/// A graph bundled with its operator and neighborhood index.
///
/// Immutable after construction and cheap to clone.
#[derive(Debug, Clone)]
pub struct Network {
    pub w: RowStochasticW,
    pub neighborhoods: Arc<NeighborhoodIndex>,
}

impl Network {
    pub fn new(graph: AdjacencyGraph) -> Self {
        let graph = Arc::new(graph);
        let neighborhoods = Arc::new(NeighborhoodIndex::new(&graph));
        Network {
            w: RowStochasticW::new(graph),
            neighborhoods,
        }
    }

    pub fn with_delta_rho(mut self, delta_rho: f64) -> crate::Result<Self> {
        self.w = self.w.with_delta_rho(delta_rho)?;
        Ok(self)
    }

    pub fn graph(&self) -> &AdjacencyGraph {
        self.w.graph()
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }
}
