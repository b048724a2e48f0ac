//! Seeded benchmark distributions and their reference density models.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{gmm_fit_em, EmConfig, GaussianMixture};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Rng};
use crate::points::Points;

/// Samples drawn to fit the reference mixture of a geometric dataset.
pub const REFERENCE_FIT_SAMPLES: usize = 100_000;

/// Which distribution to draw from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetKind {
    StandardNormal {
        dim: usize,
    },
    /// Fixed three-component 2D mixture.
    Gmm3,
    /// Unit circle, uniform angle, isotropic Gaussian noise.
    Circle {
        #[serde(default = "circle_noise")]
        noise: f64,
    },
    /// `r = θ / 2π` with `θ` uniform on `[0, 2π · rotations]`.
    Spiral {
        #[serde(default = "spiral_noise")]
        noise: f64,
        #[serde(default = "spiral_rotations")]
        rotations: f64,
    },
    /// Two spirals, the second rotated by `π`; each sample picks one at random.
    TwoSpirals {
        #[serde(default = "two_spirals_noise")]
        noise: f64,
        #[serde(default = "two_spirals_rotations")]
        rotations: f64,
    },
}

fn circle_noise() -> f64 {
    0.08
}
fn spiral_noise() -> f64 {
    0.05
}
fn spiral_rotations() -> f64 {
    1.75
}
fn two_spirals_noise() -> f64 {
    0.045
}
fn two_spirals_rotations() -> f64 {
    1.0
}

impl DatasetKind {
    pub fn circle() -> Self {
        DatasetKind::Circle {
            noise: circle_noise(),
        }
    }

    pub fn spiral() -> Self {
        DatasetKind::Spiral {
            noise: spiral_noise(),
            rotations: spiral_rotations(),
        }
    }

    pub fn two_spirals() -> Self {
        DatasetKind::TwoSpirals {
            noise: two_spirals_noise(),
            rotations: two_spirals_rotations(),
        }
    }

    /// The five 2D benchmark sets.
    pub fn planar() -> [DatasetKind; 5] {
        [
            DatasetKind::StandardNormal { dim: 2 },
            DatasetKind::Gmm3,
            DatasetKind::circle(),
            DatasetKind::spiral(),
            DatasetKind::two_spirals(),
        ]
    }

    pub fn dim(&self) -> usize {
        match self {
            DatasetKind::StandardNormal { dim } => *dim,
            _ => 2,
        }
    }

    pub fn name(&self) -> String {
        match self {
            DatasetKind::StandardNormal { dim } => format!("standard_normal_{dim}d"),
            DatasetKind::Gmm3 => "gmm3".into(),
            DatasetKind::Circle { .. } => "circle".into(),
            DatasetKind::Spiral { .. } => "spiral".into(),
            DatasetKind::TwoSpirals { .. } => "two_spirals".into(),
        }
    }

    /// Whether the reference model is fitted rather than known in closed form.
    pub fn is_geometric(&self) -> bool {
        matches!(
            self,
            DatasetKind::Circle { .. } | DatasetKind::Spiral { .. } | DatasetKind::TwoSpirals { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(field, "must be positive"))
            }
        };
        match *self {
            DatasetKind::StandardNormal { dim } if dim == 0 => {
                Err(Error::invalid("dim", "must be at least 1"))
            }
            DatasetKind::StandardNormal { .. } | DatasetKind::Gmm3 => Ok(()),
            DatasetKind::Circle { noise } => positive("noise", noise),
            DatasetKind::Spiral { noise, rotations } | DatasetKind::TwoSpirals { noise, rotations } => {
                positive("noise", noise)?;
                positive("rotations", rotations)
            }
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    /// Parses a dataset name as produced by [`DatasetKind::name`], with
    /// default noise and rotation settings.
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "gmm3" => DatasetKind::Gmm3,
            "circle" => DatasetKind::circle(),
            "spiral" => DatasetKind::spiral(),
            "two_spirals" => DatasetKind::two_spirals(),
            _ => {
                let dim = s
                    .strip_prefix("standard_normal_")
                    .and_then(|r| r.strip_suffix('d'))
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| Error::parse("dataset", format!("unknown dataset `{s}`")))?;
                DatasetKind::StandardNormal { dim }
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A dataset draw: distribution, size and seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n: usize,
    pub seed: u64,
    /// Mixture components fitted for geometric sets.
    #[serde(default = "default_components")]
    pub fitted_components: usize,
}

fn default_components() -> usize {
    50
}

impl DatasetSpec {
    pub fn new(kind: DatasetKind, n: usize, seed: u64) -> Self {
        DatasetSpec {
            kind,
            n,
            seed,
            fitted_components: default_components(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if self.fitted_components == 0 {
            return Err(Error::invalid("fitted_components", "must be at least 1"));
        }
        Ok(())
    }
}

/// The fixed three-component mixture.
pub fn gmm3() -> GaussianMixture {
    GaussianMixture::new(
        2,
        vec![0.25, 0.5, 0.25],
        vec![2.0, 1.4, 6.5, 6.3, 8.0, 1.0],
        vec![
            3.0, 2.5, 2.5, 3.0, //
            3.0, 0.0, 0.0, 3.0, //
            2.0, -0.8, -0.8, 2.0,
        ],
    )
    .expect("fixed mixture is valid")
}

fn noisy(rng: &mut Rng, x: f64, y: f64, noise: f64) -> [f64; 2] {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    [x + noise * a, y + noise * b]
}

fn spiral_point(rng: &mut Rng, rotations: f64, noise: f64, flip: bool) -> [f64; 2] {
    let theta = rng.random::<f64>() * 2.0 * PI * rotations;
    let r = theta / (2.0 * PI);
    let (mut x, mut y) = (r * theta.cos(), r * theta.sin());
    if flip {
        x = -x;
        y = -y;
    }
    noisy(rng, x, y, noise)
}

/// Draws `n` points of `kind` from `rng`.
pub fn sample_kind(kind: &DatasetKind, n: usize, rng: &mut Rng) -> Result<Points> {
    kind.validate()?;
    Ok(match *kind {
        DatasetKind::StandardNormal { dim } => {
            let mut pts = Points::with_capacity(dim, n);
            let mut row = vec![0.0; dim];
            for _ in 0..n {
                row.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                pts.push(&row);
            }
            pts
        }
        DatasetKind::Gmm3 => gmm3().sample(n, rng),
        DatasetKind::Circle { noise } => {
            let mut pts = Points::with_capacity(2, n);
            for _ in 0..n {
                let t = rng.random::<f64>() * 2.0 * PI;
                pts.push(&noisy(rng, t.cos(), t.sin(), noise));
            }
            pts
        }
        DatasetKind::Spiral { noise, rotations } => {
            let mut pts = Points::with_capacity(2, n);
            for _ in 0..n {
                pts.push(&spiral_point(rng, rotations, noise, false));
            }
            pts
        }
        DatasetKind::TwoSpirals { noise, rotations } => {
            let mut pts = Points::with_capacity(2, n);
            for _ in 0..n {
                let flip = rng.random::<bool>();
                pts.push(&spiral_point(rng, rotations, noise, flip));
            }
            pts
        }
    })
}

/// Seeded draw described by `spec`.
pub fn sample(spec: &DatasetSpec) -> Result<Points> {
    spec.validate()?;
    sample_kind(&spec.kind, spec.n, &mut Rng::new(spec.seed))
}

/// Ground-truth density of a dataset: exact for the Gaussian sets, an EM fit
/// on a fresh sample of [`REFERENCE_FIT_SAMPLES`] points otherwise.
pub fn reference_model(kind: &DatasetKind, components: usize, fit_seed: u64) -> Result<GaussianMixture> {
    reference_model_with(kind, components, fit_seed, REFERENCE_FIT_SAMPLES)
}

/// [`reference_model`] with an explicit fitting sample size.
pub fn reference_model_with(
    kind: &DatasetKind,
    components: usize,
    fit_seed: u64,
    fit_samples: usize,
) -> Result<GaussianMixture> {
    kind.validate()?;
    match *kind {
        DatasetKind::StandardNormal { dim } => Ok(GaussianMixture::standard_normal(dim)),
        DatasetKind::Gmm3 => Ok(gmm3()),
        _ => {
            let data = sample_kind(kind, fit_samples, &mut Rng::new(derive_seed(fit_seed, 0xF17)))?;
            let config = EmConfig {
                seed: derive_seed(fit_seed, 0xE3),
                ..EmConfig::default()
            };
            Ok(gmm_fit_em(&data, components, &config)?.model)
        }
    }
}
