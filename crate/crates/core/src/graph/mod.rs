//! Graph data model, dataset ingestion, random walks and neighbourhood
//! extraction.

mod io;
mod sample;
mod split;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use io::{load_json_molecules, load_tu_dataset, MoleculeRecord};
pub use sample::{extract_r_hop, sample_walk};
pub use split::{make_splits, DatasetSplit, SplitRatios};

/// Graph-level supervision.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Class(usize),
    Values(Vec<f64>),
}

/// Simple undirected node-labelled graph.
///
/// Edges are stored once as `(u, v)` with `u < v`; neighbour lists are kept in
/// CSR form, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    node_labels: Vec<u32>,
    node_features: Option<Array2<f64>>,
    target: Option<Target>,
}

impl Graph {
    /// Builds a graph, collapsing duplicate and reversed edges.
    ///
    /// Self-loops and out-of-range endpoints are rejected; loaders strip
    /// self-loops before calling this.
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        node_labels: Vec<u32>,
    ) -> Result<Self> {
        if node_labels.len() != node_count {
            return Err(Error::Integrity(format!(
                "{} node labels for {} nodes",
                node_labels.len(),
                node_count
            )));
        }
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::Integrity(format!(
                    "edge ({u}, {v}) references a node outside 0..{node_count}"
                )));
            }
            if u == v {
                return Err(Error::Integrity(format!("self-loop on node {u}")));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();

        let mut degree = vec![0usize; node_count];
        for &(u, v) in &canon {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..node_count].to_vec();
        let mut neighbors = vec![0usize; offsets[node_count]];
        for &(u, v) in &canon {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        for v in 0..node_count {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }

        Ok(Self {
            node_count,
            edges: canon,
            offsets,
            neighbors,
            node_labels,
            node_features: None,
            target: None,
        })
    }

    /// Unlabelled convenience constructor (every node gets label 0).
    pub fn unlabeled(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        Self::new(node_count, edges, vec![0; node_count])
    }

    pub fn with_target(mut self, target: Target) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.node_count {
            return Err(Error::Integrity(format!(
                "{} feature rows for {} nodes",
                features.nrows(),
                self.node_count
            )));
        }
        self.node_features = Some(features);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// CSR row offsets; `offsets()[v]..offsets()[v + 1]` indexes `csr_neighbors()`.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn csr_neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn node_labels(&self) -> &[u32] {
        &self.node_labels
    }

    pub fn node_features(&self) -> Option<&Array2<f64>> {
        self.node_features.as_ref()
    }

    pub fn target(&self) -> Option<&Target> {
        self.target.as_ref()
    }

    pub fn class(&self) -> Option<usize> {
        match self.target {
            Some(Target::Class(c)) => Some(c),
            _ => None,
        }
    }

    /// Node feature matrix: the stored features, or a one-hot encoding of the
    /// node labels over `alphabet` symbols when none are stored.
    pub fn feature_matrix(&self, alphabet: usize) -> Array2<f64> {
        if let Some(x) = &self.node_features {
            return x.clone();
        }
        let mut x = Array2::zeros((self.node_count, alphabet));
        for (v, &l) in self.node_labels.iter().enumerate() {
            if (l as usize) < alphabet {
                x[[v, l as usize]] = 1.0;
            }
        }
        x
    }

    /// Returns the graph with nodes relabelled so that old node `v` becomes
    /// `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.node_count {
            return Err(Error::Integrity("permutation length mismatch".into()));
        }
        let mut labels = vec![0; self.node_count];
        for (v, &p) in perm.iter().enumerate() {
            labels[p] = self.node_labels[v];
        }
        let mut g = Graph::new(
            self.node_count,
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])),
            labels,
        )?;
        if let Some(x) = &self.node_features {
            let mut y = Array2::zeros(x.raw_dim());
            for (v, &p) in perm.iter().enumerate() {
                y.row_mut(p).assign(&x.row(v));
            }
            g.node_features = Some(y);
        }
        g.target = self.target.clone();
        Ok(g)
    }
}

/// Node sequence produced by a random walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    nodes: Vec<usize>,
}

impl Walk {
    pub fn from_nodes(nodes: Vec<usize>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Number of transitions.
    pub fn steps(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }
}

/// Induced r-hop neighbourhood of a node, re-indexed as a standalone graph.
///
/// Local node 0 is the centre; `parent_nodes[i]` is the parent index of
/// local node `i`, listed in BFS order.
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub center: usize,
    pub radius: usize,
    pub graph: Graph,
    pub parent_nodes: Vec<usize>,
}
