use crate::error::{Error, Result};
use crate::graph::NeighborIndex;
use crate::points::Points;

/// Nearest-neighbor density surrogate `p̂(X_l) ∝ (min_m ‖X_l - X_m‖)^(-d)`.
///
/// Values are unnormalized: the proportionality constant is dropped because
/// shortest paths are invariant to it.
#[derive(Clone, Debug)]
pub struct NnDensityField {
    index: NeighborIndex,
    intrinsic_dim: usize,
    nearest: Vec<f64>,
}

impl NnDensityField {
    pub fn new(data: Points, intrinsic_dim: usize) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::invalid("data", "need at least two samples"));
        }
        if intrinsic_dim == 0 {
            return Err(Error::invalid("intrinsic_dim", "must be at least 1"));
        }
        let index = NeighborIndex::new(data)?;
        let nearest = (0..index.points().len())
            .map(|i| index.knn(i, 1)[0].0.sqrt())
            .collect();
        Ok(NnDensityField {
            index,
            intrinsic_dim,
            nearest,
        })
    }

    pub fn from_index(index: NeighborIndex, intrinsic_dim: usize) -> Result<Self> {
        Self::new(index.into_points(), intrinsic_dim)
    }

    pub fn data(&self) -> &Points {
        self.index.points()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    /// `-d · log(distance to the nearest other sample)`.
    pub fn nn_log_density(&self, l: usize) -> Result<f64> {
        let r = *self
            .nearest
            .get(l)
            .ok_or_else(|| Error::invalid("index", format!("{l} out of range")))?;
        if r == 0.0 {
            return Err(Error::DegenerateNearestNeighbor { index: l });
        }
        Ok(-(self.intrinsic_dim as f64) * r.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_examples() {
        let f = NnDensityField::new(Points::from_rows(&[[0.0], [1.0], [3.0]]).unwrap(), 1).unwrap();
        assert_eq!(f.nn_log_density(0).unwrap(), 0.0);
        assert!((f.nn_log_density(2).unwrap() + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn scaling_shifts_by_log_c() {
        let rows = [[0.0, 0.0], [1.0, 0.5], [3.0, -1.0], [2.0, 2.0]];
        let c: f64 = 2.5;
        let scaled: Vec<[f64; 2]> = rows.iter().map(|r| [r[0] * c, r[1] * c]).collect();
        let a = NnDensityField::new(Points::from_rows(&rows).unwrap(), 2).unwrap();
        let b = NnDensityField::new(Points::from_rows(&scaled).unwrap(), 2).unwrap();
        for l in 0..4 {
            let diff = b.nn_log_density(l).unwrap() - a.nn_log_density(l).unwrap();
            assert!((diff + 2.0 * c.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_is_degenerate() {
        let f = NnDensityField::new(Points::from_rows(&[[1.0], [1.0], [4.0]]).unwrap(), 1).unwrap();
        assert!(matches!(
            f.nn_log_density(0),
            Err(Error::DegenerateNearestNeighbor { index: 0 })
        ));
        assert!(f.nn_log_density(2).is_ok());
    }
}
