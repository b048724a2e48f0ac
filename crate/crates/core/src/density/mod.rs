//! Probability densities and their score functions.
//!
//! A [`ScoreFunction`] is all the relaxation solver needs; a [`DensityModel`]
//! additionally provides the log-density used by path lengths and graph weights.
//! Every model here satisfies `score(x) == ∇ log_density(x)`, which the tests
//! check against central differences.

mod analytic;
mod em;
mod gmm;
mod kde;
mod nn;

pub use analytic::{generalized_gaussian_score, student_t_score, GeneralizedGaussian, StudentT};
pub use em::{gmm_fit_em, EmConfig, EmFit};
pub use gmm::{GaussianMixture, GmmDocument};
pub use kde::KdeModel;
pub use nn::NnDensityField;

use crate::error::Result;

/// Gradient of a log-density.
pub trait ScoreFunction: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `∇ log p(x)` into `out`.
    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, &mut out)?;
        Ok(out)
    }

    /// Jacobian of the score (Hessian of the log-density), row-major `dim × dim`.
    ///
    /// The default uses central differences of the score, so score-only models
    /// work with the Newton-accelerated solver too.
    fn score_jacobian_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        let mut probe = x.to_vec();
        let mut up = vec![0.0; d];
        let mut down = vec![0.0; d];
        for j in 0..d {
            let h = 1e-5 * (1.0 + x[j].abs());
            probe[j] = x[j] + h;
            self.score_into(&probe, &mut up)?;
            probe[j] = x[j] - h;
            self.score_into(&probe, &mut down)?;
            probe[j] = x[j];
            for i in 0..d {
                out[i * d + j] = (up[i] - down[i]) / (2.0 * h);
            }
        }
        // symmetrize: the exact Jacobian is a Hessian
        for i in 0..d {
            for j in 0..i {
                let m = 0.5 * (out[i * d + j] + out[j * d + i]);
                out[i * d + j] = m;
                out[j * d + i] = m;
            }
        }
        Ok(())
    }
}

/// A density with both log-density and score.
pub trait DensityModel: ScoreFunction {
    /// Natural log of the density at `x`.
    fn log_density(&self, x: &[f64]) -> Result<f64>;
}

impl<T: ScoreFunction + ?Sized> ScoreFunction for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).score_into(x, out)
    }
    fn score_jacobian_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).score_jacobian_into(x, out)
    }
}

impl<T: DensityModel + ?Sized> DensityModel for &T {
    fn log_density(&self, x: &[f64]) -> Result<f64> {
        (**self).log_density(x)
    }
}

impl<T: ScoreFunction + ?Sized> ScoreFunction for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).score_into(x, out)
    }
    fn score_jacobian_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).score_jacobian_into(x, out)
    }
}

impl<T: DensityModel + ?Sized> DensityModel for Box<T> {
    fn log_density(&self, x: &[f64]) -> Result<f64> {
        (**self).log_density(x)
    }
}

/// Constant density `exp(log_value)` everywhere; zero score.
///
/// Not normalizable on all of R^D, but useful wherever only relative
/// densities matter (degenerate-metric checks, tests).
#[derive(Clone, Debug)]
pub struct UniformDensity {
    pub dim: usize,
    pub log_value: f64,
}

impl ScoreFunction for UniformDensity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        crate::error::check_dim(self.dim, x.len())?;
        out.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }
    fn score_jacobian_into(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }
}

impl DensityModel for UniformDensity {
    fn log_density(&self, x: &[f64]) -> Result<f64> {
        crate::error::check_dim(self.dim, x.len())?;
        Ok(self.log_value)
    }
}
