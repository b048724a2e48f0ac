use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::dist_sq;
use crate::points::Points;

/// Exact nearest-neighbor search: points sorted along their highest-variance
/// coordinate, scanned outward from the query until the slab is wider than the
/// current k-th best distance.
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    points: Points,
    axis: usize,
    order: Vec<usize>,
    keys: Vec<f64>,
    rank: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    d2: f64,
    idx: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then_with(|| self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl NeighborIndex {
    pub fn new(points: Points) -> Result<Self> {
        if !points.is_finite() {
            return Err(Error::invalid("data", "must be finite"));
        }
        let d = points.dim();
        let mean = points.mean();
        let axis = (0..d)
            .map(|j| {
                let v: f64 = points.rows().map(|x| (x[j] - mean[j]).powi(2)).sum();
                (j, v)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(j, _)| j)
            .unwrap_or(0);
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points.row(a)[axis]
                .total_cmp(&points.row(b)[axis])
                .then(a.cmp(&b))
        });
        let keys = order.iter().map(|&i| points.row(i)[axis]).collect();
        let mut rank = vec![0; order.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        Ok(NeighborIndex {
            points,
            axis,
            order,
            keys,
            rank,
        })
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn into_points(self) -> Points {
        self.points
    }

    /// The `k` nearest other points of sample `query`, as `(distance², index)`
    /// ascending; ties broken by index.
    pub fn knn(&self, query: usize, k: usize) -> Vec<(f64, usize)> {
        let x = self.points.row(query);
        let qkey = x[self.axis];
        let pos = self.rank[query];
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let offer = |heap: &mut BinaryHeap<Candidate>, j: usize| {
            let c = Candidate {
                d2: dist_sq(x, self.points.row(j)),
                idx: j,
            };
            if heap.len() < k {
                heap.push(c);
            } else if c < *heap.peek().expect("non-empty") {
                heap.pop();
                heap.push(c);
            }
        };
        let full_bound = |heap: &BinaryHeap<Candidate>| {
            if heap.len() < k {
                f64::INFINITY
            } else {
                heap.peek().map_or(f64::INFINITY, |c| c.d2)
            }
        };
        let n = self.order.len();
        let (mut lo, mut hi) = (pos, pos + 1);
        let mut lo_open = true;
        let mut hi_open = true;
        while lo_open || hi_open {
            if hi_open {
                if hi >= n {
                    hi_open = false;
                } else {
                    let gap = self.keys[hi] - qkey;
                    if gap * gap > full_bound(&heap) {
                        hi_open = false;
                    } else {
                        offer(&mut heap, self.order[hi]);
                        hi += 1;
                    }
                }
            }
            if lo_open {
                if lo == 0 {
                    lo_open = false;
                } else {
                    let gap = qkey - self.keys[lo - 1];
                    if gap * gap > full_bound(&heap) {
                        lo_open = false;
                    } else {
                        lo -= 1;
                        offer(&mut heap, self.order[lo]);
                    }
                }
            }
        }
        let mut out: Vec<(f64, usize)> = heap.into_iter().map(|c| (c.d2, c.idx)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    /// Neighbor lists for every sample.
    pub fn knn_all(&self, k: usize) -> Vec<Vec<(f64, usize)>> {
        (0..self.points.len())
            .into_par_iter()
            .map(|i| self.knn(i, k))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use rand::Rng as _;

    fn brute(points: &Points, q: usize, k: usize) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = (0..points.len())
            .filter(|&j| j != q)
            .map(|j| (dist_sq(points.row(q), points.row(j)), j))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = Rng::new(9);
        for dim in [1usize, 2, 5] {
            let mut pts = Points::with_capacity(dim, 300);
            for _ in 0..300 {
                let row: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                pts.push(&row);
            }
            let idx = NeighborIndex::new(pts.clone()).unwrap();
            for q in (0..300).step_by(7) {
                assert_eq!(idx.knn(q, 6), brute(&pts, q, 6));
            }
        }
    }

    #[test]
    fn duplicates_and_ties_are_deterministic() {
        let pts = Points::from_rows(&[[0.0], [1.0], [1.0], [2.0]]).unwrap();
        let idx = NeighborIndex::new(pts).unwrap();
        assert_eq!(idx.knn(1, 2), vec![(0.0, 2), (1.0, 0)]);
        assert_eq!(idx.knn(0, 2), vec![(1.0, 1), (1.0, 2)]);
    }
}
