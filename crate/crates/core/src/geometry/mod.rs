//! Fermat metric geometry: path lengths, the relaxation solver, ground-truth
//! distances and the log path ratio.
//!
//! The metric is conformal, `g_x(u, v) = <u, v> / p(x)^(2β)`, so a curve's
//! length is `∫ ‖γ'‖ / p(γ)^β dt`. Geodesics are computed in the
//! constant-Euclidean-speed parameterization
//!
//! ```text
//! φ'' - β (s·φ') φ' + β s ‖φ'‖² = 0,    s = ∇ log p
//! ```
//!
//! discretized with central differences on `n + 1` equally spaced points.
//! [`relax_step`] is one randomized Gauss–Seidel sweep of that system;
//! [`solve_geodesic`] adds coarse-to-fine continuation and Newton steps on the
//! same discrete equations and certifies the result with plain sweeps.

mod length;
mod path;
mod relax;
mod solver;

pub use length::{
    geodesic_metric_speed_profile, ground_truth_distance, lpr, path_length, GroundTruth,
    GroundTruthQuality,
};
pub use path::{resample_uniform, Path};
pub use relax::{geodesic_residual, relax, relax_step, RelaxationConfig, RelaxationReport};
pub use solver::{solve_geodesic, SolverConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse temperature of the metric `1 / p^β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    beta: f64,
}

impl MetricParams {
    /// `beta = 0` is accepted as the Euclidean limit.
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invalid("beta", "must be a finite non-negative number"));
        }
        Ok(MetricParams { beta })
    }

    /// Dimension-scaled choice `β = 1/D`.
    pub fn scaled(dim: usize) -> Self {
        MetricParams {
            beta: 1.0 / dim.max(1) as f64,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}
