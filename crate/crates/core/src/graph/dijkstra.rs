use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::KnnGraph;
use crate::error::{Error, Result};
use crate::geometry::{resample_uniform, Path};
use crate::numerics::{log_add_exp, LogScalar};
use crate::points::Points;

/// Node sequence of a shortest path and its log-domain length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphPath {
    pub nodes: Vec<usize>,
    pub log_distance: LogScalar,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    log_dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed so the max-heap pops the smallest distance, then smallest node
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .log_dist
            .total_cmp(&self.log_dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_node(graph: &KnnGraph, node: usize) -> Result<()> {
    if node >= graph.len() {
        return Err(Error::invalid("node", format!("{node} outside 0..{}", graph.len())));
    }
    Ok(())
}

/// Runs until `stop` is settled (or everything, if `None`). Returns log
/// distances (`-inf` at the source, `+inf` if unreached) and predecessors.
fn search(graph: &KnnGraph, source: usize, stop: Option<usize>) -> (Vec<f64>, Vec<usize>) {
    let n = graph.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = f64::NEG_INFINITY;
    heap.push(Entry {
        log_dist: f64::NEG_INFINITY,
        node: source,
    });
    while let Some(Entry { log_dist, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        if Some(node) == stop {
            break;
        }
        for (m, w) in graph.neighbors(node) {
            if done[m] {
                continue;
            }
            let cand = log_add_exp(log_dist, w);
            if cand < dist[m] {
                dist[m] = cand;
                pred[m] = node;
                heap.push(Entry { log_dist: cand, node: m });
            }
        }
    }
    (dist, pred)
}

/// Log of the summed linear weights along `nodes`. Terms are added in sorted
/// order so a path and its reverse get bitwise-equal lengths.
fn canonical_length(graph: &KnnGraph, nodes: &[usize]) -> f64 {
    let mut w: Vec<f64> = nodes
        .windows(2)
        .map(|e| graph.edge_log_weight(e[0], e[1]).expect("path follows edges"))
        .collect();
    w.sort_by(f64::total_cmp);
    w.into_iter().fold(f64::NEG_INFINITY, log_add_exp)
}

fn trace(pred: &[usize], source: usize, target: usize) -> Vec<usize> {
    let mut nodes = vec![target];
    let mut cur = target;
    while cur != source {
        cur = pred[cur];
        nodes.push(cur);
    }
    nodes.reverse();
    nodes
}

/// Shortest path under the sum of linear-domain edge weights.
pub fn dijkstra(graph: &KnnGraph, source: usize, target: usize) -> Result<GraphPath> {
    check_node(graph, source)?;
    check_node(graph, target)?;
    let (dist, pred) = search(graph, source, Some(target));
    if dist[target] == f64::INFINITY {
        return Err(Error::Disconnected {
            from: source,
            to: target,
        });
    }
    let nodes = trace(&pred, source, target);
    Ok(GraphPath {
        log_distance: LogScalar(canonical_length(graph, &nodes)),
        nodes,
    })
}

/// Log distances from `source` to every node (`+inf` where unreachable).
pub fn dijkstra_all(graph: &KnnGraph, source: usize) -> Result<Vec<f64>> {
    check_node(graph, source)?;
    let (mut dist, pred) = search(graph, source, None);
    for t in 0..graph.len() {
        if dist[t].is_finite() {
            dist[t] = canonical_length(graph, &trace(&pred, source, t));
        }
    }
    Ok(dist)
}

/// Piecewise-linear curve through the path's nodes, resampled to `segments`
/// equal chords.
pub fn densify(gp: &GraphPath, graph: &KnnGraph, segments: usize) -> Result<Path> {
    if gp.nodes.is_empty() {
        return Err(Error::invalid("graph path", "must contain at least one node"));
    }
    for &l in &gp.nodes {
        check_node(graph, l)?;
    }
    let rows: Vec<&[f64]> = gp.nodes.iter().map(|&l| graph.nodes().row(l)).collect();
    if rows.len() == 1 {
        return Err(Error::ZeroLengthPath);
    }
    let poly = Path::new(Points::from_rows(&rows)?)?;
    resample_uniform(&poly, segments)
}
