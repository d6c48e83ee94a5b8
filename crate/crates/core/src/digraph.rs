//! Digraphs underlying Markov chains: node set and edge set restricted to
//! the part reachable from the initial state. Two learned models are
//! "structurally correct" w.r.t. each other when these digraphs agree under
//! the shared hidden-state indexing.

use std::collections::{BTreeSet, VecDeque};

use ndarray::Array2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    pub initial: usize,
    pub nodes: BTreeSet<usize>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl Digraph {
    /// Edges are matrix entries strictly above `threshold`; only nodes
    /// reachable from `initial` are kept.
    pub fn from_matrix(matrix: &Array2<f64>, initial: usize, threshold: f64) -> Digraph {
        let n = matrix.nrows();
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        let mut queue = VecDeque::from([initial]);
        nodes.insert(initial);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if matrix[[i, j]] > threshold {
                    edges.insert((i, j));
                    if nodes.insert(j) {
                        queue.push_back(j);
                    }
                }
            }
        }
        Digraph {
            initial,
            nodes,
            edges,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Graph isomorphism witnessed by the identity on indices (the hidden
    /// block layout pins state identities, so no search is needed).
    pub fn is_identical(&self, other: &Digraph) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn reachability_pruning() {
        // Node 2 is unreachable from 0 even though it has outgoing mass.
        let m = array![[0.5, 0.5, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let g = Digraph::from_matrix(&m, 0, 1e-9);
        assert_eq!(g.nodes, BTreeSet::from([0, 1]));
        assert_eq!(g.edges, BTreeSet::from([(0, 0), (0, 1), (1, 0)]));
    }

    #[test]
    fn threshold_above_one_empties_edges() {
        let m = array![[1.0, 0.0], [0.0, 1.0]];
        let g = Digraph::from_matrix(&m, 0, 1.1);
        assert_eq!(g.num_edges(), 0);
        assert_eq!(g.num_nodes(), 1);
    }
}
