//! Density-weighted k-nearest-neighbor graphs and log-space shortest paths.

mod dijkstra;
mod knn;
mod weights;

pub use dijkstra::{densify, dijkstra, dijkstra_all, GraphPath};
pub use knn::NeighborIndex;
pub use weights::{
    density_edge_log_weight, nn_variant_edge_log_weight, power_edge_log_weight, EdgeWeighting, NnKind,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::Points;

/// Default neighbor count `max(10, ⌈2e ln n⌉)`.
pub fn default_k(n: usize) -> usize {
    let k = (2.0 * std::f64::consts::E * (n.max(1) as f64).ln()).ceil() as usize;
    k.max(10)
}

/// Undirected graph in compressed sparse row form with log-domain weights.
///
/// Every undirected edge appears in both endpoint rows with bitwise-equal
/// weights; rows are sorted by neighbor index.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnGraph {
    nodes: Points,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    log_weights: Vec<f64>,
}

impl KnnGraph {
    /// Builds the graph from undirected edges `(l, m, log_weight)`, each listed
    /// once in either orientation.
    pub fn from_edges(nodes: Points, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = nodes.len();
        let mut canon: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
        for &(l, m, w) in edges {
            if l >= n || m >= n {
                return Err(Error::invalid("edges", format!("edge ({l}, {m}) outside 0..{n}")));
            }
            if l == m {
                return Err(Error::invalid("edges", format!("self-loop at node {l}")));
            }
            if !w.is_finite() {
                return Err(Error::invalid("edges", format!("non-finite weight on ({l}, {m})")));
            }
            canon.push((l.min(m), l.max(m), w));
        }
        canon.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if let Some(w) = canon.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::invalid(
                "edges",
                format!("duplicate edge ({}, {})", w[0].0, w[0].1),
            ));
        }
        Ok(Self::assemble(nodes, &canon))
    }

    fn assemble(nodes: Points, canon: &[(usize, usize, f64)]) -> Self {
        let n = nodes.len();
        let mut degree = vec![0usize; n];
        for &(l, m, _) in canon {
            degree[l] += 1;
            degree[m] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0usize; offsets[n]];
        let mut log_weights = vec![0.0; offsets[n]];
        for &(l, m, w) in canon {
            neighbors[fill[l]] = m;
            log_weights[fill[l]] = w;
            fill[l] += 1;
            neighbors[fill[m]] = l;
            log_weights[fill[m]] = w;
            fill[m] += 1;
        }
        for i in 0..n {
            let (a, b) = (offsets[i], offsets[i + 1]);
            let mut row: Vec<(usize, f64)> = neighbors[a..b]
                .iter()
                .copied()
                .zip(log_weights[a..b].iter().copied())
                .collect();
            row.sort_by_key(|e| e.0);
            for (j, (m, w)) in row.into_iter().enumerate() {
                neighbors[a + j] = m;
                log_weights[a + j] = w;
            }
        }
        KnnGraph {
            nodes,
            offsets,
            neighbors,
            log_weights,
        }
    }

    pub fn nodes(&self) -> &Points {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// `(neighbor, log_weight)` pairs of node `l`, ascending by neighbor.
    pub fn neighbors(&self, l: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.offsets[l], self.offsets[l + 1]);
        self.neighbors[a..b]
            .iter()
            .copied()
            .zip(self.log_weights[a..b].iter().copied())
    }

    pub fn edge_log_weight(&self, l: usize, m: usize) -> Option<f64> {
        let (a, b) = (self.offsets[l], self.offsets[l + 1]);
        self.neighbors[a..b]
            .binary_search(&m)
            .ok()
            .map(|j| self.log_weights[a + j])
    }

    /// Undirected edges with `l < m`, in row order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        (0..self.len())
            .flat_map(|l| {
                self.neighbors(l)
                    .filter(move |&(m, _)| m > l)
                    .map(move |(m, w)| (l, m, w))
            })
            .collect()
    }

    /// Same topology, weights recomputed by `weighting`. Each undirected edge
    /// is weighted once, in parallel.
    pub fn reweighted(&self, weighting: &EdgeWeighting<'_>) -> Result<KnnGraph> {
        let prepared = weighting.prepare(&self.nodes)?;
        let canon: Vec<(usize, usize, f64)> = self
            .edges()
            .into_par_iter()
            .map(|(l, m, _)| Ok((l, m, prepared.weight(&self.nodes, l, m)?)))
            .collect::<Result<_>>()?;
        Ok(Self::assemble(self.nodes.clone(), &canon))
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            dim: self.nodes.dim(),
            nodes: self.nodes.rows().map(<[f64]>::to_vec).collect(),
            edges: self.edges(),
        }
    }

    pub fn from_document(doc: GraphDocument) -> Result<Self> {
        let mut nodes = Points::with_capacity(doc.dim, doc.nodes.len());
        if doc.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        for (i, row) in doc.nodes.iter().enumerate() {
            if row.len() != doc.dim {
                return Err(Error::invalid(
                    "nodes",
                    format!("row {i} has {} coordinates, expected {}", row.len(), doc.dim),
                ));
            }
            nodes.push(row);
        }
        if !nodes.is_finite() {
            return Err(Error::invalid("nodes", "must be finite"));
        }
        Self::from_edges(nodes, &doc.edges)
    }
}

/// Flat serialized form: node coordinates plus each undirected edge once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize, f64)>,
}

/// Exact kNN graph, union-symmetrized. Weights start at `0` (log of unit
/// length); use [`KnnGraph::reweighted`] to attach a metric.
pub fn build_knn(data: Points, k: usize) -> Result<KnnGraph> {
    let n = data.len();
    if k == 0 || k >= n {
        return Err(Error::invalid("k", format!("need 1 <= k < n (k = {k}, n = {n})")));
    }
    let index = NeighborIndex::new(data)?;
    let lists = index.knn_all(k);
    let mut pairs: Vec<(usize, usize)> = lists
        .iter()
        .enumerate()
        .flat_map(|(l, row)| row.iter().map(move |&(_, m)| (l.min(m), l.max(m))))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let canon: Vec<(usize, usize, f64)> = pairs.into_iter().map(|(l, m)| (l, m, 0.0)).collect();
    Ok(KnnGraph::assemble(index.into_points(), &canon))
}
