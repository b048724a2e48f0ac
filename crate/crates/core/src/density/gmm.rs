use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DensityModel, ScoreFunction};
use crate::error::{check_dim, Error, Result};
use crate::numerics::{LogSumExp, Rng};
use crate::points::Points;

/// Gaussian mixture with full covariances.
///
/// Each covariance is factorized once (`Σ = L Lᵀ`); evaluation only ever
/// applies `L⁻¹` through triangular solves.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GmmDocument", into = "GmmDocument")]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    covariances: Vec<f64>,
    chol: Vec<f64>,
    /// `log w_k - D/2 log 2π - 1/2 log det Σ_k`
    log_norm: Vec<f64>,
}

/// On-disk form of a [`GaussianMixture`]: weights, means and row-major covariances.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GmmDocument {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
}

impl TryFrom<GmmDocument> for GaussianMixture {
    type Error = Error;

    fn try_from(doc: GmmDocument) -> Result<Self> {
        let d = doc.dim;
        if doc.means.len() != doc.weights.len() || doc.covariances.len() != doc.weights.len() {
            return Err(Error::invalid(
                "mixture",
                "weights, means and covariances must have the same number of components",
            ));
        }
        let mut means = Vec::with_capacity(d * doc.weights.len());
        for m in &doc.means {
            check_dim(d, m.len())?;
            means.extend_from_slice(m);
        }
        let mut covs = Vec::with_capacity(d * d * doc.weights.len());
        for c in &doc.covariances {
            check_dim(d * d, c.len())?;
            covs.extend_from_slice(c);
        }
        GaussianMixture::new(d, doc.weights, means, covs)
    }
}

impl From<GaussianMixture> for GmmDocument {
    fn from(g: GaussianMixture) -> Self {
        let d = g.dim;
        GmmDocument {
            dim: d,
            weights: g.weights.clone(),
            means: g.means.chunks_exact(d).map(<[f64]>::to_vec).collect(),
            covariances: g.covariances.chunks_exact(d * d).map(<[f64]>::to_vec).collect(),
        }
    }
}

/// In-place lower Cholesky factor of a row-major SPD matrix. `None` if not positive definite.
pub(crate) fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Solves `L z = b` in place.
#[inline]
fn forward_solve(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

/// Solves `Lᵀ z = b` in place.
#[inline]
fn backward_solve(l: &[f64], d: usize, b: &mut [f64]) {
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in i + 1..d {
            s -= l[k * d + i] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

impl GaussianMixture {
    /// Validates weights (non-negative, summing to 1 within 1e-12) and factorizes
    /// every covariance.
    pub fn new(dim: usize, weights: Vec<f64>, means: Vec<f64>, covariances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if k == 0 {
            return Err(Error::invalid("weights", "at least one component required"));
        }
        check_dim(k * dim, means.len())?;
        check_dim(k * dim * dim, covariances.len())?;
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights", "must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("weights", format!("must sum to 1 (sum = {total})")));
        }
        if means.iter().chain(&covariances).any(|v| !v.is_finite()) {
            return Err(Error::invalid("mixture", "means and covariances must be finite"));
        }
        let mut chol = Vec::with_capacity(covariances.len());
        let mut log_norm = Vec::with_capacity(k);
        for c in 0..k {
            let cov = &covariances[c * dim * dim..(c + 1) * dim * dim];
            for i in 0..dim {
                for j in 0..i {
                    let (a, b) = (cov[i * dim + j], cov[j * dim + i]);
                    if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                        return Err(Error::invalid(
                            "covariances",
                            format!("component {c} is not symmetric"),
                        ));
                    }
                }
            }
            let l = cholesky(cov, dim).ok_or(Error::DegenerateComponent { component: c })?;
            let half_log_det: f64 = (0..dim).map(|i| l[i * dim + i].ln()).sum();
            log_norm.push(weights[c].ln() - 0.5 * dim as f64 * (2.0 * PI).ln() - half_log_det);
            chol.extend(l);
        }
        Ok(GaussianMixture {
            dim,
            weights,
            means,
            covariances,
            chol,
            log_norm,
        })
    }

    pub fn standard_normal(dim: usize) -> Self {
        let mut cov = vec![0.0; dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = 1.0;
        }
        GaussianMixture::new(dim, vec![1.0], vec![0.0; dim], cov).expect("identity is SPD")
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn covariance(&self, k: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.covariances[k * dd..(k + 1) * dd]
    }

    fn chol(&self, k: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.chol[k * dd..(k + 1) * dd]
    }

    /// `log w_k + log N(x; μ_k, Σ_k)`; leaves `L_k⁻¹(x - μ_k)` in `z`.
    #[inline]
    fn component_log_term(&self, k: usize, x: &[f64], z: &mut [f64]) -> f64 {
        let mu = self.mean(k);
        for i in 0..self.dim {
            z[i] = x[i] - mu[i];
        }
        forward_solve(self.chol(k), self.dim, z);
        let q: f64 = z.iter().map(|v| v * v).sum();
        self.log_norm[k] - 0.5 * q
    }

    /// Per-component log terms `log w_k N_k(x)` written into `out`.
    pub fn component_log_terms(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        let mut z = vec![0.0; self.dim];
        for (k, o) in out.iter_mut().enumerate().take(self.n_components()) {
            *o = self.component_log_term(k, x, &mut z);
        }
        Ok(())
    }

    /// Responsibilities `r_k(x)` (log-space normalized), plus `log p(x)`.
    fn responsibilities(&self, x: &[f64], r: &mut [f64]) -> f64 {
        let mut z = vec![0.0; self.dim];
        let mut acc = LogSumExp::default();
        for (k, rk) in r.iter_mut().enumerate() {
            *rk = self.component_log_term(k, x, &mut z);
            acc.push(*rk);
        }
        let lp = acc.value();
        r.iter_mut().for_each(|v| *v = (*v - lp).exp());
        lp
    }

    /// `Σ_k⁻¹ (μ_k - x)`, written into `g`.
    #[inline]
    fn component_score(&self, k: usize, x: &[f64], g: &mut [f64]) {
        let mu = self.mean(k);
        for i in 0..self.dim {
            g[i] = mu[i] - x[i];
        }
        forward_solve(self.chol(k), self.dim, g);
        backward_solve(self.chol(k), self.dim, g);
    }

    /// Draws `n` samples along with their component labels.
    pub fn sample_labeled(&self, n: usize, rng: &mut Rng) -> (Points, Vec<usize>) {
        let d = self.dim;
        let mut cdf = Vec::with_capacity(self.n_components());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cdf.push(acc);
        }
        let mut pts = Points::with_capacity(d, n);
        let mut labels = Vec::with_capacity(n);
        let mut z = vec![0.0; d];
        let mut x = vec![0.0; d];
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let k = cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1);
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            let l = self.chol(k);
            let mu = self.mean(k);
            for i in 0..d {
                x[i] = mu[i] + (0..=i).map(|j| l[i * d + j] * z[j]).sum::<f64>();
            }
            pts.push(&x);
            labels.push(k);
        }
        (pts, labels)
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Points {
        self.sample_labeled(n, rng).0
    }

    /// Mean per-sample log-likelihood.
    pub fn mean_log_likelihood(&self, data: &Points) -> Result<f64> {
        check_dim(self.dim, data.dim())?;
        let mut total = 0.0;
        for x in data.rows() {
            total += self.log_density(x)?;
        }
        Ok(total / data.len() as f64)
    }
}

impl ScoreFunction for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        let d = self.dim;
        // keep every L_k⁻¹(x - μ_k): one more triangular solve turns it into
        // Σ_k⁻¹(x - μ_k)
        let mut z = vec![0.0; self.n_components() * d];
        let mut r = vec![0.0; self.n_components()];
        let mut acc = LogSumExp::default();
        for (k, rk) in r.iter_mut().enumerate() {
            *rk = self.component_log_term(k, x, &mut z[k * d..(k + 1) * d]);
            acc.push(*rk);
        }
        let lp = acc.value();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, rk) in r.iter().enumerate() {
            let rk = (rk - lp).exp();
            if rk == 0.0 {
                continue;
            }
            let g = &mut z[k * d..(k + 1) * d];
            backward_solve(self.chol(k), d, g);
            for i in 0..d {
                out[i] -= rk * g[i];
            }
        }
        Ok(())
    }

    /// `Σ_k r_k (g_k g_kᵀ - Σ_k⁻¹) - s sᵀ` with `g_k = Σ_k⁻¹(μ_k - x)`.
    fn score_jacobian_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        let d = self.dim;
        let mut r = vec![0.0; self.n_components()];
        self.responsibilities(x, &mut r);
        let mut g = vec![0.0; d];
        let mut col = vec![0.0; d];
        let mut s = vec![0.0; d];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, rk) in r.iter().enumerate() {
            if *rk == 0.0 {
                continue;
            }
            self.component_score(k, x, &mut g);
            for i in 0..d {
                s[i] += rk * g[i];
                for j in 0..d {
                    out[i * d + j] += rk * g[i] * g[j];
                }
            }
            let l = self.chol(k);
            for j in 0..d {
                col.iter_mut().for_each(|v| *v = 0.0);
                col[j] = 1.0;
                forward_solve(l, d, &mut col);
                backward_solve(l, d, &mut col);
                for i in 0..d {
                    out[i * d + j] -= rk * col[i];
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] -= s[i] * s[j];
            }
        }
        Ok(())
    }
}

impl DensityModel for GaussianMixture {
    fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let mut z = vec![0.0; self.dim];
        let mut acc = LogSumExp::default();
        for k in 0..self.n_components() {
            acc.push(self.component_log_term(k, x, &mut z));
        }
        Ok(acc.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_gradient;

    pub(crate) fn gmm3() -> GaussianMixture {
        GaussianMixture::new(
            2,
            vec![0.25, 0.5, 0.25],
            vec![2.0, 1.4, 6.5, 6.3, 8.0, 1.0],
            vec![3.0, 2.5, 2.5, 3.0, 3.0, 0.0, 0.0, 3.0, 2.0, -0.8, -0.8, 2.0],
        )
        .unwrap()
    }

    fn direct_density(g: &GaussianMixture, x: &[f64]) -> f64 {
        // explicit 2x2 inverse, independent of the Cholesky path
        let mut p = 0.0;
        for k in 0..g.n_components() {
            let c = g.covariance(k);
            let det = c[0] * c[3] - c[1] * c[2];
            let (dx, dy) = (x[0] - g.mean(k)[0], x[1] - g.mean(k)[1]);
            let q = (c[3] * dx * dx - 2.0 * c[1] * dx * dy + c[0] * dy * dy) / det;
            p += g.weights()[k] * (-0.5 * q).exp() / (2.0 * PI * det.sqrt());
        }
        p
    }

    #[test]
    fn standard_normal_at_origin() {
        let g = GaussianMixture::standard_normal(2);
        let v = g.log_density(&[0.0, 0.0]).unwrap();
        assert!((v + (2.0 * PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn gmm3_lower_bound_at_second_mean() {
        let g = gmm3();
        let v = g.log_density(&[6.5, 6.3]).unwrap();
        assert!(v >= (0.5 / (2.0 * PI * 3.0)).ln());
    }

    #[test]
    fn log_space_matches_direct_sum() {
        let g = gmm3();
        for x in [[0.0, 0.0], [4.0, 4.0], [7.0, 2.0], [-1.0, 5.0]] {
            let a = g.log_density(&x).unwrap();
            let b = direct_density(&g, &x).ln();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn standard_normal_score_is_minus_x() {
        let g = GaussianMixture::standard_normal(3);
        let s = g.score(&[0.5, -1.0, 2.0]).unwrap();
        for (a, b) in s.iter().zip([-0.5, 1.0, -2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_pair_has_zero_score_at_origin() {
        let g = GaussianMixture::new(
            2,
            vec![0.5, 0.5],
            vec![1.5, 0.0, -1.5, 0.0],
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let s = g.score(&[0.0, 0.0]).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn gmm3_score_matches_finite_differences() {
        let g = gmm3();
        let x = [4.0, 4.0];
        let s = g.score(&x).unwrap();
        let fd = finite_diff_gradient(|p| g.log_density(p).unwrap(), &x, 1e-4).unwrap();
        for (a, b) in s.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-5 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let g = gmm3();
        let x = [3.0, 2.5];
        let mut analytic = vec![0.0; 4];
        g.score_jacobian_into(&x, &mut analytic).unwrap();
        for j in 0..2 {
            let fd = finite_diff_gradient(|p| g.score(p).unwrap()[j], &x, 1e-5).unwrap();
            for i in 0..2 {
                assert!((analytic[j * 2 + i] - fd[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn component_order_does_not_matter() {
        let g = gmm3();
        let perm = [2usize, 0, 1];
        let weights = perm.iter().map(|&k| g.weights()[k]).collect();
        let means = perm.iter().flat_map(|&k| g.mean(k).to_vec()).collect();
        let covs = perm.iter().flat_map(|&k| g.covariance(k).to_vec()).collect();
        let h = GaussianMixture::new(2, weights, means, covs).unwrap();
        for x in [[1.0, 1.0], [5.0, 5.0], [9.0, -2.0]] {
            let (a, b) = (g.log_density(&x).unwrap(), h.log_density(&x).unwrap());
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            GaussianMixture::new(1, vec![0.6, 0.6], vec![0.0, 1.0], vec![1.0, 1.0]),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            GaussianMixture::new(1, vec![1.0], vec![0.0], vec![-1.0]),
            Err(Error::DegenerateComponent { component: 0 })
        ));
        let g = GaussianMixture::standard_normal(2);
        assert!(matches!(
            g.log_density(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(g.score(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn document_roundtrip() {
        let g = gmm3();
        let text = serde_json::to_string(&g).unwrap();
        let back: GaussianMixture = serde_json::from_str(&text).unwrap();
        assert_eq!(GmmDocument::from(g), GmmDocument::from(back));
    }
}
