use std::f64::consts::PI;

use super::{DensityModel, ScoreFunction};
use crate::error::{check_dim, Error, Result};
use crate::numerics::{dist_sq, LogSumExp};
use crate::points::Points;

/// Gaussian kernel density estimate with isotropic bandwidth `σ`.
#[derive(Clone, Debug)]
pub struct KdeModel {
    samples: Points,
    bandwidth: f64,
    log_norm: f64,
}

impl KdeModel {
    pub fn new(samples: Points, bandwidth: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "at least one sample required"));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid("bandwidth", "must be positive"));
        }
        let d = samples.dim() as f64;
        let log_norm =
            -(samples.len() as f64).ln() - 0.5 * d * (2.0 * PI * bandwidth * bandwidth).ln();
        Ok(KdeModel {
            samples,
            bandwidth,
            log_norm,
        })
    }

    /// Scott's rule with the pooled per-coordinate standard deviation.
    pub fn scott(samples: Points) -> Result<Self> {
        let n = samples.len() as f64;
        let d = samples.dim();
        let mean = samples.mean();
        let var: f64 = samples
            .rows()
            .map(|x| dist_sq(x, &mean))
            .sum::<f64>()
            / (d as f64 * (n - 1.0).max(1.0));
        let bw = var.sqrt() * n.powf(-1.0 / (d as f64 + 4.0));
        KdeModel::new(samples, bw)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn samples(&self) -> &Points {
        &self.samples
    }

    #[inline]
    fn exponent(&self, x: &[f64], xi: &[f64]) -> f64 {
        -dist_sq(x, xi) / (2.0 * self.bandwidth * self.bandwidth)
    }
}

impl ScoreFunction for KdeModel {
    fn dim(&self) -> usize {
        self.samples.dim()
    }

    /// Softmax-weighted pull toward the samples: `-Σ wᵢ (x - xᵢ) / σ²`.
    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        let mut max = f64::NEG_INFINITY;
        for xi in self.samples.rows() {
            max = max.max(self.exponent(x, xi));
        }
        let mut total = 0.0;
        out.iter_mut().for_each(|v| *v = 0.0);
        for xi in self.samples.rows() {
            let w = (self.exponent(x, xi) - max).exp();
            total += w;
            for (o, (a, b)) in out.iter_mut().zip(x.iter().zip(xi)) {
                *o += w * (a - b);
            }
        }
        let scale = -1.0 / (total * self.bandwidth * self.bandwidth);
        out.iter_mut().for_each(|v| *v *= scale);
        Ok(())
    }
}

impl DensityModel for KdeModel {
    fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let mut acc = LogSumExp::default();
        for xi in self.samples.rows() {
            acc.push(self.exponent(x, xi));
        }
        Ok(self.log_norm + acc.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_gradient;

    #[test]
    fn single_kernel_peak() {
        let sigma = 0.7;
        let kde = KdeModel::new(Points::from_rows(&[[1.0, -2.0]]).unwrap(), sigma).unwrap();
        let v = kde.log_density(&[1.0, -2.0]).unwrap();
        assert!((v + (2.0 * PI * sigma * sigma).ln()).abs() < 1e-14);
        let s = kde.score(&[1.5, -1.0]).unwrap();
        assert!((s[0] + 0.5 / 0.49).abs() < 1e-12 && (s[1] + 1.0 / 0.49).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair() {
        let sigma = 0.5;
        let kde = KdeModel::new(Points::from_rows(&[[-1.0], [1.0]]).unwrap(), sigma).unwrap();
        let single = -0.5 * (2.0 * PI * sigma * sigma).ln() - 1.0 / (2.0 * sigma * sigma);
        assert!((kde.log_density(&[0.0]).unwrap() - single).abs() < 1e-14);
        assert!(kde.score(&[0.0]).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn score_matches_finite_differences() {
        let rows: Vec<[f64; 2]> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.7;
                [t.sin() * 2.0, (1.3 * t).cos()]
            })
            .collect();
        let kde = KdeModel::new(Points::from_rows(&rows).unwrap(), 0.4).unwrap();
        for x in [[0.1, 0.2], [1.5, -0.7], [-2.2, 0.9]] {
            let s = kde.score(&x).unwrap();
            let fd = finite_diff_gradient(|p| kde.log_density(p).unwrap(), &x, 1e-4).unwrap();
            for (a, b) in s.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-5 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn bandwidth_limits_diverge() {
        let pts = Points::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let mut at_sample = Vec::new();
        let mut off_sample = Vec::new();
        for sigma in [1.0, 0.3, 0.1, 0.03, 0.01] {
            let kde = KdeModel::new(pts.clone(), sigma).unwrap();
            at_sample.push(kde.log_density(&[1.0]).unwrap());
            off_sample.push(kde.log_density(&[2.0]).unwrap());
        }
        assert!(at_sample.windows(2).all(|w| w[1] > w[0]));
        assert!(off_sample.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_bandwidth() {
        let pts = Points::from_rows(&[[0.0]]).unwrap();
        assert!(KdeModel::new(pts.clone(), 0.0).is_err());
        assert!(KdeModel::new(pts, f64::NAN).is_err());
    }
}
