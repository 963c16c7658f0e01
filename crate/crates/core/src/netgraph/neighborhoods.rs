use super::graph::AdjacencyGraph;

/// Closed neighborhoods and two-hop closures of every node.
///
/// `closed[i]` is `N_i ∪ {i}`; `two_hop[i]` is `D_i`, every node within
/// graph distance two of `i` (including `i`). Both lists are sorted.
#[derive(Debug, Clone)]
pub struct NeighborhoodIndex {
    closed: Vec<Vec<usize>>,
    two_hop: Vec<Vec<usize>>,
}

impl NeighborhoodIndex {
    pub fn new(graph: &AdjacencyGraph) -> Self {
        let n = graph.n_nodes();
        let mut closed = Vec::with_capacity(n);
        let mut two_hop = Vec::with_capacity(n);
        let mut mark = vec![usize::MAX; n];
        for i in 0..n {
            let mut c: Vec<usize> = graph.neighbors(i).to_vec();
            c.push(i);
            c.sort_unstable();

            let mut d = Vec::new();
            for &j in &c {
                if mark[j] != i {
                    mark[j] = i;
                    d.push(j);
                }
                for &k in graph.neighbors(j) {
                    if mark[k] != i {
                        mark[k] = i;
                        d.push(k);
                    }
                }
            }
            d.sort_unstable();
            closed.push(c);
            two_hop.push(d);
        }
        NeighborhoodIndex { closed, two_hop }
    }

    pub fn closed(&self, i: usize) -> &[usize] {
        &self.closed[i]
    }

    pub fn two_hop(&self, i: usize) -> &[usize] {
        &self.two_hop[i]
    }

    pub fn n_nodes(&self) -> usize {
        self.closed.len()
    }

    /// `sum_i |D_i|`, the cost driver of projection computations.
    pub fn total_two_hop(&self) -> usize {
        self.two_hop.iter().map(Vec::len).sum()
    }
}
