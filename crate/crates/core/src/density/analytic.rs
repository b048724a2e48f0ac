//! Radially symmetric families used to study how the metric should scale with
//! dimension: the generalized Gaussian `p ∝ exp(-‖x‖^α/α)` and the
//! multivariate Student-t.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::{DensityModel, ScoreFunction};
use crate::error::{check_dim, Error, Result};
use crate::numerics::{dot, norm, Rng};
use crate::points::Points;

/// Score of the generalized Gaussian: `-‖x‖^(α-2) x`.
pub fn generalized_gaussian_score(x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", "must be positive"));
    }
    let r = norm(x);
    if r == 0.0 {
        if alpha < 2.0 {
            return Err(Error::ScoreSingular);
        }
        return Ok(vec![0.0; x.len()]);
    }
    let f = r.powf(alpha - 2.0);
    Ok(x.iter().map(|v| -f * v).collect())
}

/// Score of the multivariate Student-t: `-(ν+D)/(ν+‖x‖²) x`.
pub fn student_t_score(x: &[f64], nu: f64, dim: usize) -> Result<Vec<f64>> {
    check_dim(dim, x.len())?;
    if !(nu > 2.0) {
        return Err(Error::invalid("nu", "must exceed 2"));
    }
    let f = (nu + dim as f64) / (nu + dot(x, x));
    Ok(x.iter().map(|v| -f * v).collect())
}

#[derive(Clone, Debug)]
pub struct GeneralizedGaussian {
    dim: usize,
    alpha: f64,
    log_norm: f64,
}

impl GeneralizedGaussian {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be positive"));
        }
        let d = dim as f64;
        // Z = S_{D-1} α^{D/α - 1} Γ(D/α),  S_{D-1} = 2 π^{D/2} / Γ(D/2)
        let log_sphere = (2.0f64).ln() + 0.5 * d * PI.ln() - ln_gamma(0.5 * d);
        let log_z = log_sphere + (d / alpha - 1.0) * alpha.ln() + ln_gamma(d / alpha);
        Ok(GeneralizedGaussian {
            dim,
            alpha,
            log_norm: -log_z,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Samples via the radial law: `‖x‖^α / α ~ Gamma(D/α, 1)` with a uniform direction.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Points {
        let gamma = Gamma::new(self.dim as f64 / self.alpha, 1.0).expect("shape is positive");
        let mut pts = Points::with_capacity(self.dim, n);
        let mut dir = vec![0.0; self.dim];
        for _ in 0..n {
            let u: f64 = gamma.sample(rng);
            let r = (self.alpha * u).powf(1.0 / self.alpha);
            loop {
                for v in dir.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let len = norm(&dir);
                if len > 0.0 {
                    dir.iter_mut().for_each(|v| *v *= r / len);
                    break;
                }
            }
            pts.push(&dir);
        }
        pts
    }
}

impl ScoreFunction for GeneralizedGaussian {
    fn dim(&self) -> usize {
        self.dim
    }
    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        let s = generalized_gaussian_score(x, self.alpha)?;
        out.copy_from_slice(&s);
        Ok(())
    }
}

impl DensityModel for GeneralizedGaussian {
    fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.log_norm - norm(x).powf(self.alpha) / self.alpha)
    }
}

#[derive(Clone, Debug)]
pub struct StudentT {
    dim: usize,
    nu: f64,
    log_norm: f64,
}

impl StudentT {
    pub fn new(dim: usize, nu: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(nu > 2.0) || !nu.is_finite() {
            return Err(Error::invalid("nu", "must exceed 2"));
        }
        let d = dim as f64;
        let log_norm = ln_gamma(0.5 * (nu + d)) - ln_gamma(0.5 * nu) - 0.5 * d * (nu * PI).ln();
        Ok(StudentT { dim, nu, log_norm })
    }
}

impl ScoreFunction for StudentT {
    fn dim(&self) -> usize {
        self.dim
    }
    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let s = student_t_score(x, self.nu, self.dim)?;
        out.copy_from_slice(&s);
        Ok(())
    }
}

impl DensityModel for StudentT {
    fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.log_norm - 0.5 * (self.nu + self.dim as f64) * (dot(x, x) / self.nu).ln_1p())
    }
}
